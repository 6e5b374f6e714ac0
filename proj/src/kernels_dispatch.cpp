#include <cstdlib>
#include <cstring>

#include "binbrain/kernels.hpp"

namespace binbrain::kernels {
namespace {

Backend resolve_initial() {
  if (const char* env = std::getenv("BINBRAIN_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Backend::avx2;
    // anything else (incl. "auto") falls through to detection
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

Backend& backend_slot() {
  static Backend backend = resolve_initial();
  return backend;
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops& active() {
  return backend_slot() == Backend::avx2 ? avx2_ops() : scalar_ops();
}

Backend active_backend() { return backend_slot(); }

void force_backend(Backend backend) {
  if (backend == Backend::avx2 && !avx2_supported()) backend = Backend::scalar;
  backend_slot() = backend;
}

std::string backend_name(Backend backend) {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

}  // namespace binbrain::kernels
