#pragma once

#include <cstdint>

namespace sfcgan::kern {

enum class Act { relu, leaky_relu, tanh, sigmoid };

inline constexpr double kLeakySlope = 0.2;

/// Dispatch table of numeric inner loops. A scalar reference implementation
/// always exists; an AVX2+FMA variant is selected at runtime when the CPU
/// supports it. All GEMM variants accumulate into C (row-major, contiguous).
struct Backend {
  const char* name;

  /// C[MxN] += A[MxK] * B[KxN]
  void (*gemm_nn)(int M, int N, int K, const double* A, const double* B, double* C);
  /// C[MxN] += A^T * B with A[KxM], B[KxN]
  void (*gemm_tn)(int M, int N, int K, const double* A, const double* B, double* C);
  /// C[MxN] += A * B^T with A[MxK], B[NxK]
  void (*gemm_nt)(int M, int N, int K, const double* A, const double* B, double* C);

  void (*act_fwd)(Act kind, int64_t n, const double* x, double* y);
  /// gx += gy * f'(x) expressed through the forward output y.
  void (*act_bwd)(Act kind, int64_t n, const double* y, const double* gy, double* gx);

  /// y += a * x
  void (*axpy)(int64_t n, double a, const double* x, double* y);
  void (*scale)(int64_t n, double a, double* x);
  double (*sum)(int64_t n, const double* x);
  double (*dot)(int64_t n, const double* x, const double* y);
  double (*asum)(int64_t n, const double* x);

  /// One Adam step over a flat buffer. Decay is decoupled: p *= (1 - lr*wd)
  /// before the moment update is applied. bc1/bc2 are the bias corrections
  /// 1 - beta^t for the current step t.
  void (*adam_update)(int64_t n, double* p, const double* g, double* m, double* v,
                      double lr, double wd, double beta1, double beta2,
                      double bc1, double bc2, double eps);
};

const Backend& backend();
const Backend& scalar_backend();
/// Null when the binary was built without AVX2 support or the CPU lacks it.
const Backend* avx2_backend();
/// Selects a backend by name ("scalar" or "avx2"); false if unavailable.
bool force_backend(const char* name);

/// Patch extraction turning convolution into GEMM. img is one image [C,H,W];
/// col is [(C*K*K) x (OH*OW)] with out-of-bounds taps written as zero.
void im2col(const double* img, int C, int H, int W, int K, int stride, int pad,
            double* col);
/// Adjoint of im2col: scatter-accumulate col back into img.
void col2im_add(const double* col, int C, int H, int W, int K, int stride, int pad,
                double* img);

inline int conv_out_size(int in, int K, int stride, int pad) {
  return (in + 2 * pad - K) / stride + 1;
}

}  // namespace sfcgan::kern
