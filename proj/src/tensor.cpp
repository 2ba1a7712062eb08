#include "sfcgan/tensor.hpp"

#include <cmath>

namespace sfcgan::nn {

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace sfcgan::nn
