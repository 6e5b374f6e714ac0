#include <cmath>
#include <cstddef>

#include "binbrain/kernels.hpp"

// Scalar reference lane. Written as the plainest possible loops; the AVX2
// lane is validated against these.

namespace binbrain::kernels {
namespace {

void add_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void sub_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void mul_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void div_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] / b[i];
}

void add_scalar_s(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + s;
}
void sub_scalar_s(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - s;
}
void mul_scalar_s(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}
void div_scalar_s(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] / s;
}

void accumulate_s(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}
void axpy_s(double* dst, double s, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += s * src[i];
}
void mul_accum_s(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += a[i] * b[i];
}
void div_accum_s(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += a[i] / b[i];
}

void relu_s(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}
void relu_backward_accum_s(double* dst, const double* x, const double* g, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > 0.0) dst[i] += g[i];
}

double reduce_sum_s(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}
double reduce_centered_sumsq_s(const double* a, double mean, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = a[i] - mean;
    acc += d * d;
  }
  return acc;
}
double dot_s(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void gemm_nn_s(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = a[i * k + p];
      const double* brow = b + p * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

void gemm_tn_s(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  // a stored [k, m]
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < m; ++i) {
      double av = a[p * m + i];
      const double* brow = b + p * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

void gemm_nt_s(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  // b stored [n, k]
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      const double* arow = a + i * k;
      const double* brow = b + j * k;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
}

void adam_update_s(double* p, const double* g, double* m, double* v, std::size_t n,
                   double lr, double beta1, double beta2, double eps, double corr1, double corr2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
    double m_hat = m[i] / corr1;
    double v_hat = v[i] / corr2;
    p[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps));
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      add_s,        sub_s,        mul_s,        div_s,
      add_scalar_s, sub_scalar_s, mul_scalar_s, div_scalar_s,
      accumulate_s, axpy_s,       mul_accum_s,  div_accum_s,
      relu_s,       relu_backward_accum_s,
      reduce_sum_s, reduce_centered_sumsq_s,    dot_s,
      gemm_nn_s,    gemm_tn_s,    gemm_nt_s,
      adam_update_s,
  };
  return ops;
}

}  // namespace binbrain::kernels
