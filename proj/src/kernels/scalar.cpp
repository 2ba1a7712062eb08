#include <algorithm>
#include <cmath>
#include <cstring>

#include "sfcgan/kernels.hpp"

namespace sfcgan::kern {

namespace {

void s_gemm_nn(int M, int N, int K, const double* A, const double* B, double* C) {
  for (int i = 0; i < M; ++i) {
    const double* a = A + size_t(i) * size_t(K);
    double* c = C + size_t(i) * size_t(N);
    for (int k = 0; k < K; ++k) {
      const double av = a[k];
      const double* b = B + size_t(k) * size_t(N);
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

void s_gemm_tn(int M, int N, int K, const double* A, const double* B, double* C) {
  for (int k = 0; k < K; ++k) {
    const double* arow = A + size_t(k) * size_t(M);
    const double* brow = B + size_t(k) * size_t(N);
    for (int i = 0; i < M; ++i) {
      const double av = arow[i];
      double* c = C + size_t(i) * size_t(N);
      for (int j = 0; j < N; ++j) c[j] += av * brow[j];
    }
  }
}

void s_gemm_nt(int M, int N, int K, const double* A, const double* B, double* C) {
  for (int i = 0; i < M; ++i) {
    const double* a = A + size_t(i) * size_t(K);
    double* c = C + size_t(i) * size_t(N);
    for (int j = 0; j < N; ++j) {
      const double* b = B + size_t(j) * size_t(K);
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += a[k] * b[k];
      c[j] += s;
    }
  }
}

double sigmoid1(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void s_act_fwd(Act kind, int64_t n, const double* x, double* y) {
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

void s_act_bwd(Act kind, int64_t n, const double* y, const double* gy, double* gx) {
  switch (kind) {
    case Act::relu:
      for (int64_t i = 0; i < n; ++i)
        if (y[i] > 0.0) gx[i] += gy[i];
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

void s_axpy(int64_t n, double a, const double* x, double* y) {
  for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void s_scale(int64_t n, double a, double* x) {
  for (int64_t i = 0; i < n; ++i) x[i] *= a;
}

double s_sum(int64_t n, const double* x) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double s_dot(int64_t n, const double* x, const double* y) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double s_asum(int64_t n, const double* x) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += std::fabs(x[i]);
  return s;
}

void s_adam_update(int64_t n, double* p, const double* g, double* m, double* v,
                   double lr, double wd, double beta1, double beta2,
                   double bc1, double bc2, double eps) {
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double decayed = p[i] * (1.0 - lr * wd);
    p[i] = decayed - lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

const Backend kScalar = {
    "scalar",    s_gemm_nn, s_gemm_tn, s_gemm_nt, s_act_fwd, s_act_bwd,
    s_axpy,      s_scale,   s_sum,     s_dot,     s_asum,    s_adam_update,
};

}  // namespace

const Backend& scalar_backend() { return kScalar; }

void im2col(const double* img, int C, int H, int W, int K, int stride, int pad,
            double* col) {
  const int OH = conv_out_size(H, K, stride, pad);
  const int OW = conv_out_size(W, K, stride, pad);
  const size_t plane = size_t(OH) * size_t(OW);
  size_t row = 0;
  for (int c = 0; c < C; ++c) {
    const double* src = img + size_t(c) * size_t(H) * size_t(W);
    for (int ky = 0; ky < K; ++ky) {
      for (int kx = 0; kx < K; ++kx, ++row) {
        double* dst = col + row * plane;
        if (stride == 1) {
          // In-bounds taps form one contiguous run per output row, so the
          // row is two zero tails around a memcpy.
          const int x0 = std::min(OW, std::max(0, pad - kx));
          const int x1 = std::max(x0, std::min(OW, W + pad - kx));
          for (int oy = 0; oy < OH; ++oy) {
            const int iy = oy - pad + ky;
            double* drow = dst + size_t(oy) * size_t(OW);
            if (iy < 0 || iy >= H) {
              std::memset(drow, 0, size_t(OW) * sizeof(double));
              continue;
            }
            if (x0 > 0) std::memset(drow, 0, size_t(x0) * sizeof(double));
            if (x1 > x0)
              std::memcpy(drow + x0, src + size_t(iy) * size_t(W) + (x0 + kx - pad),
                          size_t(x1 - x0) * sizeof(double));
            if (OW > x1) std::memset(drow + x1, 0, size_t(OW - x1) * sizeof(double));
          }
          continue;
        }
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* drow = dst + size_t(oy) * size_t(OW);
          if (iy < 0 || iy >= H) {
            std::memset(drow, 0, size_t(OW) * sizeof(double));
            continue;
          }
          const double* srow = src + size_t(iy) * size_t(W);
          for (int ox = 0; ox < OW; ++ox) {
            const int ix = ox * stride - pad + kx;
            drow[ox] = (ix >= 0 && ix < W) ? srow[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, int C, int H, int W, int K, int stride, int pad,
                double* img) {
  const int OH = conv_out_size(H, K, stride, pad);
  const int OW = conv_out_size(W, K, stride, pad);
  const size_t plane = size_t(OH) * size_t(OW);
  size_t row = 0;
  for (int c = 0; c < C; ++c) {
    double* dst = img + size_t(c) * size_t(H) * size_t(W);
    for (int ky = 0; ky < K; ++ky) {
      for (int kx = 0; kx < K; ++kx, ++row) {
        const double* src = col + row * plane;
        // Same contiguous-run bounds as im2col when stride is 1.
        const int x0 = stride == 1 ? std::min(OW, std::max(0, pad - kx)) : 0;
        const int x1 = stride == 1 ? std::max(x0, std::min(OW, W + pad - kx)) : OW;
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          double* drow = dst + size_t(iy) * size_t(W);
          const double* srow = src + size_t(oy) * size_t(OW);
          if (stride == 1) {
            for (int ox = x0; ox < x1; ++ox) drow[ox + kx - pad] += srow[ox];
            continue;
          }
          for (int ox = x0; ox < x1; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace sfcgan::kern
