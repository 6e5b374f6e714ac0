#include <cmath>
#include <cstddef>
#include <cstdlib>

#include "binbrain/kernels.hpp"

// AVX2/FMA lane. Elementwise kernels keep the exact per-element operation
// sequence of the scalar lane (no FMA contraction) so both lanes agree
// bit-for-bit; gemms and reductions use FMA and lane-parallel accumulators
// and agree with the scalar lane to rounding only.

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace binbrain::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

void add_v(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}
void sub_v(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}
void mul_v(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}
void div_v(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_div_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] / b[i];
}

void add_scalar_v(const double* a, double s, double* out, std::size_t n) {
  __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), sv));
  for (; i < n; ++i) out[i] = a[i] + s;
}
void sub_scalar_v(const double* a, double s, double* out, std::size_t n) {
  __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), sv));
  for (; i < n; ++i) out[i] = a[i] - s;
}
void mul_scalar_v(const double* a, double s, double* out, std::size_t n) {
  __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), sv));
  for (; i < n; ++i) out[i] = a[i] * s;
}
void div_scalar_v(const double* a, double s, double* out, std::size_t n) {
  __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_div_pd(_mm256_loadu_pd(a + i), sv));
  for (; i < n; ++i) out[i] = a[i] / s;
}

void accumulate_v(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i), _mm256_loadu_pd(src + i)));
  for (; i < n; ++i) dst[i] += src[i];
}
void axpy_v(double* dst, double s, const double* src, std::size_t n) {
  __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(sv, _mm256_loadu_pd(src + i));
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i), prod));
  }
  for (; i < n; ++i) dst[i] += s * src[i];
}
void mul_accum_v(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i), prod));
  }
  for (; i < n; ++i) dst[i] += a[i] * b[i];
}
void div_accum_v(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d q = _mm256_div_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i), q));
  }
  for (; i < n; ++i) dst[i] += a[i] / b[i];
}

void relu_v(const double* a, double* out, std::size_t n) {
  __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  // max(x, 0): the second operand is returned on equality or NaN, matching
  // the scalar lane's (x > 0 ? x : 0).
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(a + i), zero));
  for (; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}
void relu_backward_accum_v(double* dst, const double* x, const double* g, std::size_t n) {
  __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_loadu_pd(dst + i);
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    __m256d summed = _mm256_add_pd(d, _mm256_loadu_pd(g + i));
    // blend keeps dst bits untouched in masked-off lanes
    _mm256_storeu_pd(dst + i, _mm256_blendv_pd(d, summed, mask));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) dst[i] += g[i];
}

double reduce_sum_v(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double total = hsum(acc);
  for (; i < n; ++i) total += a[i];
  return total;
}
double reduce_centered_sumsq_v(const double* a, double mean, std::size_t n) {
  __m256d mv = _mm256_set1_pd(mean);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), mv);
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    double d = a[i] - mean;
    total += d * d;
  }
  return total;
}
double dot_v(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

// Shared inner body for nn/tn: C[i, j..j+15] accumulated in registers while
// streaming B rows; `a_at(p)` supplies A(i,p) for the current output row.
template <typename AAt>
inline void gemm_row_block16(const double* b, double* crow, std::size_t k, std::size_t n, std::size_t j,
                             AAt a_at) {
  __m256d c0 = _mm256_loadu_pd(crow + j);
  __m256d c1 = _mm256_loadu_pd(crow + j + 4);
  __m256d c2 = _mm256_loadu_pd(crow + j + 8);
  __m256d c3 = _mm256_loadu_pd(crow + j + 12);
  for (std::size_t p = 0; p < k; ++p) {
    __m256d av = _mm256_set1_pd(a_at(p));
    const double* brow = b + p * n + j;
    c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow), c0);
    c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 4), c1);
    c2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 8), c2);
    c3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 12), c3);
  }
  _mm256_storeu_pd(crow + j, c0);
  _mm256_storeu_pd(crow + j + 4, c1);
  _mm256_storeu_pd(crow + j + 8, c2);
  _mm256_storeu_pd(crow + j + 12, c3);
}

template <typename AAt>
inline void gemm_row_block4(const double* b, double* crow, std::size_t k, std::size_t n, std::size_t j,
                            AAt a_at) {
  __m256d c0 = _mm256_loadu_pd(crow + j);
  for (std::size_t p = 0; p < k; ++p)
    c0 = _mm256_fmadd_pd(_mm256_set1_pd(a_at(p)), _mm256_loadu_pd(b + p * n + j), c0);
  _mm256_storeu_pd(crow + j, c0);
}

void gemm_nn_v(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    auto a_at = [arow](std::size_t p) { return arow[p]; };
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) gemm_row_block16(b, crow, k, n, j, a_at);
    for (; j + 4 <= n; j += 4) gemm_row_block4(b, crow, k, n, j, a_at);
    for (; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * b[p * n + j];
      crow[j] += acc;
    }
  }
}

void gemm_tn_v(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  // a stored [k, m]
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    auto a_at = [a, m, i](std::size_t p) { return a[p * m + i]; };
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) gemm_row_block16(b, crow, k, n, j, a_at);
    for (; j + 4 <= n; j += 4) gemm_row_block4(b, crow, k, n, j, a_at);
    for (; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      crow[j] += acc;
    }
  }
}

void gemm_nt_v(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  // b stored [n, k]; every output cell is a contiguous dot product
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot_v(a + i * k, b + j * k, k);
}

void adam_update_v(double* p, const double* g, double* m, double* v, std::size_t n,
                   double lr, double beta1, double beta2, double eps, double corr1, double corr2) {
  __m256d b1 = _mm256_set1_pd(beta1);
  __m256d b2 = _mm256_set1_pd(beta2);
  __m256d one_b1 = _mm256_set1_pd(1.0 - beta1);
  __m256d one_b2 = _mm256_set1_pd(1.0 - beta2);
  __m256d lrv = _mm256_set1_pd(lr);
  __m256d epsv = _mm256_set1_pd(eps);
  __m256d c1 = _mm256_set1_pd(corr1);
  __m256d c2 = _mm256_set1_pd(corr2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(one_b1, gv));
    __m256d g2 = _mm256_mul_pd(gv, gv);
    __m256d vv = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)), _mm256_mul_pd(one_b2, g2));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    __m256d m_hat = _mm256_div_pd(mv, c1);
    __m256d v_hat = _mm256_div_pd(vv, c2);
    __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(v_hat), epsv);
    __m256d step = _mm256_mul_pd(lrv, _mm256_div_pd(m_hat, denom));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
    double m_hat = m[i] / corr1;
    double v_hat = v[i] / corr2;
    p[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps));
  }
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops = {
      add_v,        sub_v,        mul_v,        div_v,
      add_scalar_v, sub_scalar_v, mul_scalar_v, div_scalar_v,
      accumulate_v, axpy_v,       mul_accum_v,  div_accum_v,
      relu_v,       relu_backward_accum_v,
      reduce_sum_v, reduce_centered_sumsq_v,    dot_v,
      gemm_nn_v,    gemm_tn_v,    gemm_nt_v,
      adam_update_v,
  };
  return ops;
}

}  // namespace binbrain::kernels

#else  // non-x86 or AVX2 not enabled for this TU

namespace binbrain::kernels {

const Ops& avx2_ops() {
  // Dispatch never hands this lane out when unsupported.
  std::abort();
}

}  // namespace binbrain::kernels

#endif
