#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "sfcgan/common.hpp"
#include "sfcgan/kernels.hpp"
#include "sfcgan/tensor.hpp"

using namespace sfcgan;
using namespace sfcgan::kern;

namespace {

std::vector<double> random_vec(size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Naive references: fresh dot per output element, accumulated onto C.
void ref_gemm_nn(int M, int N, int K, const double* A, const double* B, double* C) {
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) {
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += A[i * K + k] * B[k * N + j];
      C[i * N + j] += s;
    }
}

void ref_gemm_tn(int M, int N, int K, const double* A, const double* B, double* C) {
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) {
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += A[k * M + i] * B[k * N + j];
      C[i * N + j] += s;
    }
}

void ref_gemm_nt(int M, int N, int K, const double* A, const double* B, double* C) {
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) {
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += A[i * K + k] * B[j * K + k];
      C[i * N + j] += s;
    }
}

bool rel_close(double a, double b, double tol) {
  const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) <= tol * scale;
}

void check_all_close(const std::vector<double>& a, const std::vector<double>& b,
                     double tol) {
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    INFO("index ", i);
    CHECK(rel_close(a[i], b[i], tol));
  }
}

const int kSizes[][3] = {
    {1, 1, 1}, {2, 3, 4},  {3, 17, 7}, {5, 16, 9},  {8, 33, 19},
    {4, 64, 1}, {7, 31, 2}, {2, 4, 25}, {16, 48, 36}, {1, 5, 3},
};

}  // namespace

TEST_CASE("gemm variants match naive references") {
  Rng rng(42);
  for (const auto& s : kSizes) {
    const int M = s[0], N = s[1], K = s[2];
    auto A = random_vec(size_t(M) * K, rng);
    auto B = random_vec(size_t(K) * N, rng);
    auto At = random_vec(size_t(K) * M, rng);
    auto Bt = random_vec(size_t(N) * K, rng);
    const auto C0 = random_vec(size_t(M) * N, rng);

    for (const Backend* be : {&scalar_backend(), avx2_backend()}) {
      if (be == nullptr) continue;
      CAPTURE(be->name);
      CAPTURE(M);
      CAPTURE(N);
      CAPTURE(K);

      auto c = C0, r = C0;
      be->gemm_nn(M, N, K, A.data(), B.data(), c.data());
      ref_gemm_nn(M, N, K, A.data(), B.data(), r.data());
      check_all_close(c, r, 1e-12);

      c = C0, r = C0;
      be->gemm_tn(M, N, K, At.data(), B.data(), c.data());
      ref_gemm_tn(M, N, K, At.data(), B.data(), r.data());
      check_all_close(c, r, 1e-12);

      c = C0, r = C0;
      be->gemm_nt(M, N, K, A.data(), Bt.data(), c.data());
      ref_gemm_nt(M, N, K, A.data(), Bt.data(), r.data());
      check_all_close(c, r, 1e-12);
    }
  }
}

TEST_CASE("avx2 and scalar backends agree") {
  const Backend* avx = avx2_backend();
  if (avx == nullptr) return;
  const Backend& sc = scalar_backend();
  Rng rng(7);
  for (const auto& s : kSizes) {
    const int M = s[0], N = s[1], K = s[2];
    auto A = random_vec(size_t(M) * K, rng);
    auto B = random_vec(size_t(K) * N, rng);
    auto c1 = random_vec(size_t(M) * N, rng);
    auto c2 = c1;
    sc.gemm_nn(M, N, K, A.data(), B.data(), c1.data());
    avx->gemm_nn(M, N, K, A.data(), B.data(), c2.data());
    check_all_close(c1, c2, 1e-12);
  }
  const auto x = random_vec(1001, rng);
  const auto y = random_vec(1001, rng);
  CHECK(rel_close(sc.dot(1001, x.data(), y.data()), avx->dot(1001, x.data(), y.data()),
                  1e-12));
  CHECK(rel_close(sc.sum(1001, x.data()), avx->sum(1001, x.data()), 1e-12));
  auto y1 = y, y2 = y;
  sc.axpy(1001, 0.37, x.data(), y1.data());
  avx->axpy(1001, 0.37, x.data(), y2.data());
  check_all_close(y1, y2, 1e-13);
}

TEST_CASE("force_backend and env selection") {
  CHECK(force_backend("scalar"));
  CHECK(std::string(backend().name) == "scalar");
  CHECK_FALSE(force_backend("nonsense"));
  if (avx2_backend() != nullptr) {
    CHECK(force_backend("avx2"));
    CHECK(std::string(backend().name) == "avx2");
  }
  force_backend("scalar");
}

TEST_CASE("activation values") {
  const Backend& be = scalar_backend();
  const double x[5] = {-2.0, -1.0, 0.0, 0.5, 3.0};
  double y[5];
  be.act_fwd(Act::relu, 5, x, y);
  CHECK(y[0] == 0.0);
  CHECK(y[4] == 3.0);
  be.act_fwd(Act::leaky_relu, 5, x, y);
  CHECK(y[1] == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(y[4] == 3.0);
  be.act_fwd(Act::sigmoid, 5, x, y);
  CHECK(y[2] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(y[0] > 0.0);
  CHECK(y[4] < 1.0);
  be.act_fwd(Act::tanh, 5, x, y);
  CHECK(y[2] == 0.0);
  CHECK(y[4] == doctest::Approx(std::tanh(3.0)));
}

TEST_CASE("activation backward matches finite differences") {
  Rng rng(11);
  const double h = 1e-6;
  for (Act kind : {Act::leaky_relu, Act::tanh, Act::sigmoid}) {
    for (const Backend* be : {&scalar_backend(), avx2_backend()}) {
      if (be == nullptr) continue;
      for (int rep = 0; rep < 20; ++rep) {
        double x = rng.uniform(-2.0, 2.0);
        if (std::fabs(x) < 1e-2) x += 0.5;
        double yp, ym, y;
        double xp = x + h, xm = x - h;
        be->act_fwd(kind, 1, &xp, &yp);
        be->act_fwd(kind, 1, &xm, &ym);
        be->act_fwd(kind, 1, &x, &y);
        const double fd = (yp - ym) / (2 * h);
        double g = 0.0, gy = 1.0;
        be->act_bwd(kind, 1, &y, &gy, &g);
        CHECK(rel_close(g, fd, 1e-6));
      }
    }
  }
}

TEST_CASE("adam update closed forms") {
  const Backend& be = scalar_backend();
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  SUBCASE("first step magnitude is about lr") {
    double p = 0.0, g = 3.0, m = 0.0, v = 0.0;
    be.adam_update(1, &p, &g, &m, &v, 1e-4, 0.0, b1, b2, 1.0 - b1, 1.0 - b2, eps);
    CHECK(std::fabs(std::fabs(p) - 1e-4) < 1e-7);
    CHECK(p < 0.0);
  }
  SUBCASE("zero gradient and zero decay is a no-op") {
    double p = 0.7, g = 0.0, m = 0.0, v = 0.0;
    be.adam_update(1, &p, &g, &m, &v, 1e-4, 0.0, b1, b2, 1.0 - b1, 1.0 - b2, eps);
    CHECK(p == 0.7);
  }
  SUBCASE("decoupled decay closed form") {
    double p = 1.0, g = 0.0, m = 0.0, v = 0.0;
    be.adam_update(1, &p, &g, &m, &v, 1e-4, 1e-4, b1, b2, 1.0 - b1, 1.0 - b2, eps);
    CHECK(p == 1.0 - 1e-8);
  }
}

TEST_CASE("im2col identity layout and adjointness") {
  SUBCASE("1x1 kernel, stride 1 is a copy") {
    Rng rng(3);
    auto img = random_vec(2 * 5 * 5, rng);
    std::vector<double> col(2 * 5 * 5, 0.0);
    im2col(img.data(), 2, 5, 5, 1, 1, 0, col.data());
    CHECK(col == img);
  }
  SUBCASE("col2im_add is the adjoint of im2col") {
    Rng rng(4);
    const int C = 3, H = 6, W = 7, K = 3, stride = 2, pad = 1;
    const int OH = conv_out_size(H, K, stride, pad);
    const int OW = conv_out_size(W, K, stride, pad);
    const size_t cols = size_t(C) * K * K * OH * OW;
    auto x = random_vec(size_t(C) * H * W, rng);
    auto y = random_vec(cols, rng);
    std::vector<double> cx(cols, 0.0);
    im2col(x.data(), C, H, W, K, stride, pad, cx.data());
    std::vector<double> xy(size_t(C) * H * W, 0.0);
    col2im_add(y.data(), C, H, W, K, stride, pad, xy.data());
    const double lhs = scalar_backend().dot(int64_t(cols), cx.data(), y.data());
    const double rhs =
        scalar_backend().dot(int64_t(x.size()), x.data(), xy.data());
    CHECK(rel_close(lhs, rhs, 1e-12));
  }
}

TEST_CASE("rng determinism and distribution sanity") {
  Rng a(123), b(123), c(124);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  CHECK(a.next_u64() != c.next_u64());

  Rng r(5);
  double mean = 0.0, m2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    mean += u;
  }
  mean /= n;
  CHECK(std::fabs(mean - 0.5) < 0.01);

  mean = 0.0;
  std::vector<double> gs(n);
  for (int i = 0; i < n; ++i) {
    gs[i] = r.gaussian();
    mean += gs[i];
  }
  mean /= n;
  for (double g : gs) m2 += (g - mean) * (g - mean);
  const double sd = std::sqrt(m2 / n);
  CHECK(std::fabs(mean) < 0.05);
  CHECK(std::fabs(sd - 1.0) < 0.05);

  for (int i = 0; i < 200; ++i) CHECK(r.bounded(7) < 7);

  std::vector<int> perm(10);
  for (int i = 0; i < 10; ++i) perm[i] = i;
  r.shuffle(perm);
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 10; ++i) CHECK(sorted[i] == i);

  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
}

TEST_CASE("number formatting is locale free and round-trips") {
  CHECK(format_fixed(1.23456, 2) == "1.23");
  CHECK(format_fixed(0.0, 4) == "0.0000");
  CHECK(format_fixed(-0.5, 2) == "-0.50");
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const double v = rng.uniform(-1.0, 1.0);
    const double back = std::strtod(format_general(v, 10).c_str(), nullptr);
    CHECK(std::fabs(back - v) <= 1e-8 * std::max(1.0, std::fabs(v)));
  }
}

TEST_CASE("parallel_for covers the range once") {
  for (int threads : {1, 4}) {
    std::vector<int> hits(1000, 0);
    parallel_for(1000, threads, [&](int64_t i) { hits[size_t(i)] += 1; });
    for (int h : hits) CHECK(h == 1);
  }
}

TEST_CASE("tensor basics") {
  nn::Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  t.at(1, 2) = 5.0;
  CHECK(t.data[5] == 5.0);
  CHECK_THROWS_AS(nn::Tensor::from({2, 2}, {1.0, 2.0, 3.0}), ValidationError);

  nn::Tensor q({1, 1, 2, 2});
  q.at(0, 0, 1, 1) = 0.1;
  CHECK(q.data[3] == 0.1);
  q.quantize_f32_grid();
  CHECK(q.data[3] == double(float(0.1)));
  CHECK(q.all_finite());
  CHECK(q.max_abs() == double(float(0.1)));
}
