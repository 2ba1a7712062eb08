#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

#include "sfcgan/kernels.hpp"

namespace sfcgan::kern {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// Two C rows x 16 columns per tile, accumulators kept in registers across k.
void a_gemm_nn(int M, int N, int K, const double* A, const double* B, double* C) {
  int i = 0;
  for (; i + 2 <= M; i += 2) {
    const double* a0 = A + size_t(i) * size_t(K);
    const double* a1 = a0 + K;
    double* c0 = C + size_t(i) * size_t(N);
    double* c1 = c0 + N;
    int j = 0;
    for (; j + 16 <= N; j += 16) {
      __m256d c00 = _mm256_loadu_pd(c0 + j);
      __m256d c01 = _mm256_loadu_pd(c0 + j + 4);
      __m256d c02 = _mm256_loadu_pd(c0 + j + 8);
      __m256d c03 = _mm256_loadu_pd(c0 + j + 12);
      __m256d c10 = _mm256_loadu_pd(c1 + j);
      __m256d c11 = _mm256_loadu_pd(c1 + j + 4);
      __m256d c12 = _mm256_loadu_pd(c1 + j + 8);
      __m256d c13 = _mm256_loadu_pd(c1 + j + 12);
      for (int k = 0; k < K; ++k) {
        const double* b = B + size_t(k) * size_t(N) + j;
        const __m256d av0 = _mm256_set1_pd(a0[k]);
        const __m256d av1 = _mm256_set1_pd(a1[k]);
        const __m256d b0 = _mm256_loadu_pd(b);
        const __m256d b1 = _mm256_loadu_pd(b + 4);
        const __m256d b2 = _mm256_loadu_pd(b + 8);
        const __m256d b3 = _mm256_loadu_pd(b + 12);
        c00 = _mm256_fmadd_pd(av0, b0, c00);
        c01 = _mm256_fmadd_pd(av0, b1, c01);
        c02 = _mm256_fmadd_pd(av0, b2, c02);
        c03 = _mm256_fmadd_pd(av0, b3, c03);
        c10 = _mm256_fmadd_pd(av1, b0, c10);
        c11 = _mm256_fmadd_pd(av1, b1, c11);
        c12 = _mm256_fmadd_pd(av1, b2, c12);
        c13 = _mm256_fmadd_pd(av1, b3, c13);
      }
      _mm256_storeu_pd(c0 + j, c00);
      _mm256_storeu_pd(c0 + j + 4, c01);
      _mm256_storeu_pd(c0 + j + 8, c02);
      _mm256_storeu_pd(c0 + j + 12, c03);
      _mm256_storeu_pd(c1 + j, c10);
      _mm256_storeu_pd(c1 + j + 4, c11);
      _mm256_storeu_pd(c1 + j + 8, c12);
      _mm256_storeu_pd(c1 + j + 12, c13);
    }
    for (; j + 4 <= N; j += 4) {
      __m256d s0 = _mm256_loadu_pd(c0 + j);
      __m256d s1 = _mm256_loadu_pd(c1 + j);
      for (int k = 0; k < K; ++k) {
        const __m256d b0 = _mm256_loadu_pd(B + size_t(k) * size_t(N) + j);
        s0 = _mm256_fmadd_pd(_mm256_set1_pd(a0[k]), b0, s0);
        s1 = _mm256_fmadd_pd(_mm256_set1_pd(a1[k]), b0, s1);
      }
      _mm256_storeu_pd(c0 + j, s0);
      _mm256_storeu_pd(c1 + j, s1);
    }
    for (; j < N; ++j) {
      double s0 = c0[j], s1 = c1[j];
      for (int k = 0; k < K; ++k) {
        const double bv = B[size_t(k) * size_t(N) + j];
        s0 += a0[k] * bv;
        s1 += a1[k] * bv;
      }
      c0[j] = s0;
      c1[j] = s1;
    }
  }
  for (; i < M; ++i) {
    const double* a0 = A + size_t(i) * size_t(K);
    double* c0 = C + size_t(i) * size_t(N);
    int j = 0;
    for (; j + 16 <= N; j += 16) {
      __m256d c00 = _mm256_loadu_pd(c0 + j);
      __m256d c01 = _mm256_loadu_pd(c0 + j + 4);
      __m256d c02 = _mm256_loadu_pd(c0 + j + 8);
      __m256d c03 = _mm256_loadu_pd(c0 + j + 12);
      for (int k = 0; k < K; ++k) {
        const double* b = B + size_t(k) * size_t(N) + j;
        const __m256d av = _mm256_set1_pd(a0[k]);
        c00 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b), c00);
        c01 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + 4), c01);
        c02 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + 8), c02);
        c03 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + 12), c03);
      }
      _mm256_storeu_pd(c0 + j, c00);
      _mm256_storeu_pd(c0 + j + 4, c01);
      _mm256_storeu_pd(c0 + j + 8, c02);
      _mm256_storeu_pd(c0 + j + 12, c03);
    }
    for (; j + 4 <= N; j += 4) {
      __m256d s0 = _mm256_loadu_pd(c0 + j);
      for (int k = 0; k < K; ++k)
        s0 = _mm256_fmadd_pd(_mm256_set1_pd(a0[k]),
                             _mm256_loadu_pd(B + size_t(k) * size_t(N) + j), s0);
      _mm256_storeu_pd(c0 + j, s0);
    }
    for (; j < N; ++j) {
      double s0 = c0[j];
      for (int k = 0; k < K; ++k) s0 += a0[k] * B[size_t(k) * size_t(N) + j];
      c0[j] = s0;
    }
  }
}

// Same tiling as a_gemm_nn; A is stored transposed (KxM), so the per-row
// scalars come from column i of A.
void a_gemm_tn(int M, int N, int K, const double* A, const double* B, double* C) {
  int i = 0;
  for (; i + 2 <= M; i += 2) {
    double* c0 = C + size_t(i) * size_t(N);
    double* c1 = c0 + N;
    int j = 0;
    for (; j + 16 <= N; j += 16) {
      __m256d c00 = _mm256_loadu_pd(c0 + j);
      __m256d c01 = _mm256_loadu_pd(c0 + j + 4);
      __m256d c02 = _mm256_loadu_pd(c0 + j + 8);
      __m256d c03 = _mm256_loadu_pd(c0 + j + 12);
      __m256d c10 = _mm256_loadu_pd(c1 + j);
      __m256d c11 = _mm256_loadu_pd(c1 + j + 4);
      __m256d c12 = _mm256_loadu_pd(c1 + j + 8);
      __m256d c13 = _mm256_loadu_pd(c1 + j + 12);
      for (int k = 0; k < K; ++k) {
        const double* ak = A + size_t(k) * size_t(M) + i;
        const double* b = B + size_t(k) * size_t(N) + j;
        const __m256d av0 = _mm256_set1_pd(ak[0]);
        const __m256d av1 = _mm256_set1_pd(ak[1]);
        const __m256d b0 = _mm256_loadu_pd(b);
        const __m256d b1 = _mm256_loadu_pd(b + 4);
        const __m256d b2 = _mm256_loadu_pd(b + 8);
        const __m256d b3 = _mm256_loadu_pd(b + 12);
        c00 = _mm256_fmadd_pd(av0, b0, c00);
        c01 = _mm256_fmadd_pd(av0, b1, c01);
        c02 = _mm256_fmadd_pd(av0, b2, c02);
        c03 = _mm256_fmadd_pd(av0, b3, c03);
        c10 = _mm256_fmadd_pd(av1, b0, c10);
        c11 = _mm256_fmadd_pd(av1, b1, c11);
        c12 = _mm256_fmadd_pd(av1, b2, c12);
        c13 = _mm256_fmadd_pd(av1, b3, c13);
      }
      _mm256_storeu_pd(c0 + j, c00);
      _mm256_storeu_pd(c0 + j + 4, c01);
      _mm256_storeu_pd(c0 + j + 8, c02);
      _mm256_storeu_pd(c0 + j + 12, c03);
      _mm256_storeu_pd(c1 + j, c10);
      _mm256_storeu_pd(c1 + j + 4, c11);
      _mm256_storeu_pd(c1 + j + 8, c12);
      _mm256_storeu_pd(c1 + j + 12, c13);
    }
    for (; j + 4 <= N; j += 4) {
      __m256d s0 = _mm256_loadu_pd(c0 + j);
      __m256d s1 = _mm256_loadu_pd(c1 + j);
      for (int k = 0; k < K; ++k) {
        const double* ak = A + size_t(k) * size_t(M) + i;
        const __m256d b0 = _mm256_loadu_pd(B + size_t(k) * size_t(N) + j);
        s0 = _mm256_fmadd_pd(_mm256_set1_pd(ak[0]), b0, s0);
        s1 = _mm256_fmadd_pd(_mm256_set1_pd(ak[1]), b0, s1);
      }
      _mm256_storeu_pd(c0 + j, s0);
      _mm256_storeu_pd(c1 + j, s1);
    }
    for (; j < N; ++j) {
      double s0 = c0[j], s1 = c1[j];
      for (int k = 0; k < K; ++k) {
        const double* ak = A + size_t(k) * size_t(M) + i;
        const double bv = B[size_t(k) * size_t(N) + j];
        s0 += ak[0] * bv;
        s1 += ak[1] * bv;
      }
      c0[j] = s0;
      c1[j] = s1;
    }
  }
  for (; i < M; ++i) {
    double* c0 = C + size_t(i) * size_t(N);
    int j = 0;
    for (; j + 4 <= N; j += 4) {
      __m256d s0 = _mm256_loadu_pd(c0 + j);
      for (int k = 0; k < K; ++k)
        s0 = _mm256_fmadd_pd(_mm256_set1_pd(A[size_t(k) * size_t(M) + i]),
                             _mm256_loadu_pd(B + size_t(k) * size_t(N) + j), s0);
      _mm256_storeu_pd(c0 + j, s0);
    }
    for (; j < N; ++j) {
      double s0 = c0[j];
      for (int k = 0; k < K; ++k)
        s0 += A[size_t(k) * size_t(M) + i] * B[size_t(k) * size_t(N) + j];
      c0[j] = s0;
    }
  }
}

// Rows of A against rows of B (dot products), 2x2 output tile.
void a_gemm_nt(int M, int N, int K, const double* A, const double* B, double* C) {
  int i = 0;
  for (; i + 2 <= M; i += 2) {
    const double* a0 = A + size_t(i) * size_t(K);
    const double* a1 = a0 + K;
    int j = 0;
    for (; j + 2 <= N; j += 2) {
      const double* b0 = B + size_t(j) * size_t(K);
      const double* b1 = b0 + K;
      __m256d s00 = _mm256_setzero_pd();
      __m256d s01 = _mm256_setzero_pd();
      __m256d s10 = _mm256_setzero_pd();
      __m256d s11 = _mm256_setzero_pd();
      int k = 0;
      for (; k + 4 <= K; k += 4) {
        const __m256d av0 = _mm256_loadu_pd(a0 + k);
        const __m256d av1 = _mm256_loadu_pd(a1 + k);
        const __m256d bv0 = _mm256_loadu_pd(b0 + k);
        const __m256d bv1 = _mm256_loadu_pd(b1 + k);
        s00 = _mm256_fmadd_pd(av0, bv0, s00);
        s01 = _mm256_fmadd_pd(av0, bv1, s01);
        s10 = _mm256_fmadd_pd(av1, bv0, s10);
        s11 = _mm256_fmadd_pd(av1, bv1, s11);
      }
      double d00 = hsum(s00), d01 = hsum(s01), d10 = hsum(s10), d11 = hsum(s11);
      for (; k < K; ++k) {
        d00 += a0[k] * b0[k];
        d01 += a0[k] * b1[k];
        d10 += a1[k] * b0[k];
        d11 += a1[k] * b1[k];
      }
      C[size_t(i) * size_t(N) + j] += d00;
      C[size_t(i) * size_t(N) + j + 1] += d01;
      C[size_t(i + 1) * size_t(N) + j] += d10;
      C[size_t(i + 1) * size_t(N) + j + 1] += d11;
    }
    for (; j < N; ++j) {
      const double* b0 = B + size_t(j) * size_t(K);
      __m256d s0 = _mm256_setzero_pd();
      __m256d s1 = _mm256_setzero_pd();
      int k = 0;
      for (; k + 4 <= K; k += 4) {
        const __m256d bv = _mm256_loadu_pd(b0 + k);
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a0 + k), bv, s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a1 + k), bv, s1);
      }
      double d0 = hsum(s0), d1 = hsum(s1);
      for (; k < K; ++k) {
        d0 += a0[k] * b0[k];
        d1 += a1[k] * b0[k];
      }
      C[size_t(i) * size_t(N) + j] += d0;
      C[size_t(i + 1) * size_t(N) + j] += d1;
    }
  }
  for (; i < M; ++i) {
    const double* a0 = A + size_t(i) * size_t(K);
    for (int j = 0; j < N; ++j) {
      const double* b0 = B + size_t(j) * size_t(K);
      __m256d s0 = _mm256_setzero_pd();
      int k = 0;
      for (; k + 4 <= K; k += 4)
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a0 + k), _mm256_loadu_pd(b0 + k), s0);
      double d0 = hsum(s0);
      for (; k < K; ++k) d0 += a0[k] * b0[k];
      C[size_t(i) * size_t(N) + j] += d0;
    }
  }
}

double sigmoid1(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Elementwise entries below are plain loops; this translation unit is built
// with AVX2+FMA enabled so the compiler vectorizes the branch-free ones.
void a_act_fwd(Act kind, int64_t n, const double* x, double* y) {
  switch (kind) {
    case Act::relu:
      for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case Act::leaky_relu:
      for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : kLeakySlope * x[i];
      break;
    case Act::tanh:
      for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
      break;
    case Act::sigmoid:
      for (int64_t i = 0; i < n; ++i) y[i] = sigmoid1(x[i]);
      break;
  }
}

void a_act_bwd(Act kind, int64_t n, const double* y, const double* gy, double* gx) {
  switch (kind) {
    case Act::relu:
      for (int64_t i = 0; i < n; ++i) gx[i] += y[i] > 0.0 ? gy[i] : 0.0;
      break;
    case Act::leaky_relu:
      for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] * (y[i] > 0.0 ? 1.0 : kLeakySlope);
      break;
    case Act::tanh:
      for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] * (1.0 - y[i] * y[i]);
      break;
    case Act::sigmoid:
      for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] * y[i] * (1.0 - y[i]);
      break;
  }
}

void a_axpy(int64_t n, double a, const double* x, double* y) {
  for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void a_scale(int64_t n, double a, double* x) {
  for (int64_t i = 0; i < n; ++i) x[i] *= a;
}

double a_sum(int64_t n, const double* x) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double a_dot(int64_t n, const double* x, const double* y) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double a_asum(int64_t n, const double* x) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += std::fabs(x[i]);
  return s;
}

void a_adam_update(int64_t n, double* p, const double* g, double* m, double* v,
                   double lr, double wd, double beta1, double beta2,
                   double bc1, double bc2, double eps) {
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double decayed = p[i] * (1.0 - lr * wd);
    p[i] = decayed - lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

const Backend kAvx2 = {
    "avx2",      a_gemm_nn, a_gemm_tn, a_gemm_nt, a_act_fwd, a_act_bwd,
    a_axpy,      a_scale,   a_sum,     a_dot,     a_asum,    a_adam_update,
};

}  // namespace

const Backend* avx2_backend() {
  static const bool ok =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok ? &kAvx2 : nullptr;
}

}  // namespace sfcgan::kern

#else

#include "sfcgan/kernels.hpp"

namespace sfcgan::kern {
const Backend* avx2_backend() { return nullptr; }
}  // namespace sfcgan::kern

#endif
