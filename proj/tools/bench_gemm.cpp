#include <chrono>
#include <cstdio>
#include <vector>

#include "sfcgan/common.hpp"
#include "sfcgan/kernels.hpp"

using namespace sfcgan;
using namespace sfcgan::kern;

static void bench(const Backend& be, int M, int N, int K) {
  Rng rng(1);
  std::vector<double> A(size_t(M) * K), B(size_t(K) * N), C(size_t(M) * N, 0.0);
  for (double& v : A) v = rng.uniform(-1, 1);
  for (double& v : B) v = rng.uniform(-1, 1);
  const double flop = 2.0 * M * N * K;
  int reps = int(2e8 / flop) + 1;
  be.gemm_nn(M, N, K, A.data(), B.data(), C.data());
  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) be.gemm_nn(M, N, K, A.data(), B.data(), C.data());
  auto t1 = std::chrono::steady_clock::now();
  const double sec = std::chrono::duration<double>(t1 - t0).count();
  std::printf("%-7s nn  M=%-4d N=%-5d K=%-4d  %7.2f GF/s\n", be.name, M, N, K,
              flop * reps / sec / 1e9);

  std::vector<double> At(size_t(K) * M);
  for (double& v : At) v = rng.uniform(-1, 1);
  be.gemm_tn(M, N, K, At.data(), B.data(), C.data());
  t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) be.gemm_tn(M, N, K, At.data(), B.data(), C.data());
  t1 = std::chrono::steady_clock::now();
  std::printf("%-7s tn  M=%-4d N=%-5d K=%-4d  %7.2f GF/s\n", be.name, M, N, K,
              flop * reps / std::chrono::duration<double>(t1 - t0).count() / 1e9);

  std::vector<double> Bt(size_t(N) * K);
  for (double& v : Bt) v = rng.uniform(-1, 1);
  be.gemm_nt(M, N, K, A.data(), Bt.data(), C.data());
  t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) be.gemm_nt(M, N, K, A.data(), Bt.data(), C.data());
  t1 = std::chrono::steady_clock::now();
  std::printf("%-7s nt  M=%-4d N=%-5d K=%-4d  %7.2f GF/s\n", be.name, M, N, K,
              flop * reps / std::chrono::duration<double>(t1 - t0).count() / 1e9);
}

int main() {
  // Shapes that dominate generator/discriminator passes at n=32 and n=116.
  const int shapes[][3] = {
      {16, 1024, 9}, {32, 256, 144}, {32, 256, 288}, {256, 256, 32},
      {1, 1024, 144}, {32, 3364, 288},
  };
  for (const Backend* be : {&scalar_backend(), avx2_backend()}) {
    if (be == nullptr) continue;
    for (const auto& s : shapes) bench(*be, s[0], s[1], s[2]);
  }
  return 0;
}
