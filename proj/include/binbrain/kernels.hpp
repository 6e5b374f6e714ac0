#pragma once

#include <cstddef>
#include <string>

namespace binbrain::kernels {

// Inner-loop primitives behind tensor ops, layers and the optimizer.
// Two lanes ship: a scalar reference and an AVX2/FMA variant; the active
// lane is picked once at startup from CPUID (override: force_backend or
// BINBRAIN_KERNELS=scalar|avx2).
//
// Equivalence contract, checked by tests:
//   - elementwise kernels (add .. relu_backward_accum, adam_update) produce
//     bit-identical results in both lanes: same per-element operation order,
//     no FMA contraction.
//   - reductions and gemms may reassociate the summation; lanes agree to a
//     small relative tolerance only.
struct Ops {
  // out[i] = a[i] <op> b[i]
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*div)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = a[i] <op> s
  void (*add_scalar)(const double* a, double s, double* out, std::size_t n);
  void (*sub_scalar)(const double* a, double s, double* out, std::size_t n);
  void (*mul_scalar)(const double* a, double s, double* out, std::size_t n);
  void (*div_scalar)(const double* a, double s, double* out, std::size_t n);
  // dst[i] += src[i]
  void (*accumulate)(double* dst, const double* src, std::size_t n);
  // dst[i] += s * src[i]
  void (*axpy)(double* dst, double s, const double* src, std::size_t n);
  // dst[i] += a[i] * b[i]
  void (*mul_accum)(double* dst, const double* a, const double* b, std::size_t n);
  // dst[i] += a[i] / b[i]
  void (*div_accum)(double* dst, const double* a, const double* b, std::size_t n);
  // out[i] = max(0, a[i])
  void (*relu)(const double* a, double* out, std::size_t n);
  // dst[i] += g[i] where x[i] > 0 (subgradient at 0 is 0)
  void (*relu_backward_accum)(double* dst, const double* x, const double* g, std::size_t n);

  double (*reduce_sum)(const double* a, std::size_t n);
  // sum of (a[i] - mean)^2
  double (*reduce_centered_sumsq)(const double* a, double mean, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);

  // Row-major accumulating matrix products.
  // C[M,N] += A[M,K] * B[K,N]
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
  // C[M,N] += A^T * B with A stored [K,M]
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
  // C[M,N] += A * B^T with B stored [N,K]
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);

  // One bias-corrected adaptive-moment update:
  //   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
  //   p -= lr * (m/corr1) / (sqrt(v/corr2) + eps)
  void (*adam_update)(double* p, const double* g, double* m, double* v, std::size_t n,
                      double lr, double beta1, double beta2, double eps, double corr1, double corr2);
};

enum class Backend { scalar, avx2 };

const Ops& scalar_ops();
const Ops& avx2_ops();   // valid to call only when avx2_supported()

bool avx2_supported();

// Active lane. Resolved on first use; force_backend() overrides (tests).
const Ops& active();
Backend active_backend();
void force_backend(Backend backend);
std::string backend_name(Backend backend);

}  // namespace binbrain::kernels
