#include "sfcgan/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace sfcgan {

void render_heatmap(const Connectome& c, const std::string& path) {
  validate_connectome(c);
  const double lo = c.domain == Domain::FC ? -1.0 : 0.0;
  const double hi = 1.0;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << "P5\n" << c.n << " " << c.n << "\n255\n";

  std::vector<uint8_t> row(size_t(c.n));
  for (int i = 0; i < c.n; ++i) {
    for (int j = 0; j < c.n; ++j) {
      double t = (c.at(i, j) - lo) / (hi - lo) * 255.999;
      row[size_t(j)] = uint8_t(std::clamp(std::floor(t), 0.0, 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()), c.n);
  }
  if (!out) throw IoError("write failed: " + path);
}

void save_top_edges(const Connectome& c, double rho, const std::string& path) {
  validate_connectome(c);
  if (!(rho >= 0.0) || rho > 1.0)
    throw ValidationError("top fraction must be in [0, 1]");

  struct Edge {
    int i, j;
    double v;
  };
  std::vector<Edge> edges;
  edges.reserve(size_t(c.n) * (c.n - 1) / 2);
  for (int i = 0; i < c.n; ++i)
    for (int j = i + 1; j < c.n; ++j) edges.push_back({i, j, c.at(i, j)});

  std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::abs(a.v) > std::abs(b.v);
  });
  size_t k = size_t(std::floor(rho * double(edges.size())));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write edge list: " + path);
  for (size_t e = 0; e < k; ++e)
    out << edges[e].i << "," << edges[e].j << ","
        << format_general(edges[e].v, 10) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace sfcgan
