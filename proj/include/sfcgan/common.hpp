#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfcgan {

/// Bad user input: malformed config, schema violation, precondition failure.
/// Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem problem: missing file, unwritable path, truncated payload.
/// Maps to CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value detected mid-computation. Maps to CLI exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic RNG used everywhere instead of std:: distributions, whose
/// output is implementation-defined. splitmix64 core; uniform and gaussian
/// draws are bit-reproducible across platforms with the same libm.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; caches the second member of each pair.
  double gaussian();

  /// Uniform integer in [0, n). n must be > 0.
  uint64_t bounded(uint64_t n) {
    return uint64_t((__uint128_t(next_u64()) * n) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

/// Stable mix of two seeds into one stream seed.
uint64_t mix_seed(uint64_t a, uint64_t b);

/// Round a double to the nearest float32-representable value. Model
/// parameters and optimizer state live on this grid so the 32-bit
/// checkpoint payload round-trips bitwise.
inline double quantize_f32(double x) { return double(float(x)); }

/// Runs fn(i) for i in [0, n). threads <= 1 executes inline (the
/// deterministic reference mode); otherwise fans out over a thread pool.
/// Callers must ensure fn bodies are independent.
void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& fn);

/// Locale-independent formatting via std::to_chars.
std::string format_general(double v, int significant_digits);
std::string format_fixed(double v, int decimals);

}  // namespace sfcgan
