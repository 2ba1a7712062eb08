#pragma once

#include <string>

#include "sfcgan/connectome.hpp"

namespace sfcgan {

/// Grayscale P5 heatmap, one pixel per matrix entry. The domain range
/// ([-1,1] for FC, [0,1] for SC) maps linearly to 0..255 via
/// floor((v - lo) / (hi - lo) * 255.999).
void render_heatmap(const Connectome& c, const std::string& path);

/// Strongest off-diagonal connections, upper triangle only, as CSV lines
/// "i,j,value" with no header: exactly floor(rho * n(n-1)/2) rows ordered by
/// descending |value|, ties broken by smaller (i, j).
void save_top_edges(const Connectome& c, double rho, const std::string& path);

}  // namespace sfcgan
