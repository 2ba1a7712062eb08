#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "sfcgan/kernels.hpp"

namespace sfcgan::kern {

namespace {

const Backend* pick_default() {
  if (const char* env = std::getenv("SFCGAN_KERNELS"); env && *env) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_backend();
    if (std::strcmp(env, "avx2") == 0) {
      if (const Backend* b = avx2_backend()) return b;
      std::fprintf(stderr,
                   "warning: SFCGAN_KERNELS=avx2 but AVX2 is unavailable, "
                   "falling back to scalar kernels\n");
      return &scalar_backend();
    }
    std::fprintf(stderr, "warning: unknown SFCGAN_KERNELS value '%s', autodetecting\n",
                 env);
  }
  if (const Backend* b = avx2_backend()) return b;
  return &scalar_backend();
}

const Backend* g_active = nullptr;

}  // namespace

const Backend& backend() {
  if (g_active == nullptr) g_active = pick_default();
  return *g_active;
}

bool force_backend(const char* name) {
  if (std::strcmp(name, "scalar") == 0) {
    g_active = &scalar_backend();
    return true;
  }
  if (std::strcmp(name, "avx2") == 0) {
    if (const Backend* b = avx2_backend()) {
      g_active = b;
      return true;
    }
    return false;
  }
  return false;
}

}  // namespace sfcgan::kern
