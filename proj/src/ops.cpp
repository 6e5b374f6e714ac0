#include "binbrain/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "binbrain/errors.hpp"
#include "binbrain/kernels.hpp"

namespace binbrain {

namespace {

using detail::TensorImpl;
using Impl = std::shared_ptr<TensorImpl>;

double* grad_ptr(const Impl& impl) { return impl->grad ? impl->grad->data() : nullptr; }

Tensor binary_op(const Tensor& a, const Tensor& b, const char* name,
                 void (*fwd)(const double*, const double*, double*, std::size_t),
                 std::function<void(const Impl&, const Impl&, const Impl&)> pull) {
  require_same_shape(a, b, name);
  Tensor out = Tensor::zeros(a.shape());
  fwd(a.values().data(), b.values().data(), out.values_mut().data(), a.numel());
  if (GradTape* tape = GradTape::current(); tape && (a.grad_tracked() || b.grad_tracked())) {
    tape->record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), pull = std::move(pull)] {
      pull(ai, bi, oi);
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "add", kernels::active().add, [](const Impl& ai, const Impl& bi, const Impl& oi) {
    const double* g = oi->grad->data();
    std::size_t n = oi->grad->size();
    if (double* ga = grad_ptr(ai)) kernels::active().accumulate(ga, g, n);
    if (double* gb = grad_ptr(bi)) kernels::active().accumulate(gb, g, n);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "sub", kernels::active().sub, [](const Impl& ai, const Impl& bi, const Impl& oi) {
    const double* g = oi->grad->data();
    std::size_t n = oi->grad->size();
    if (double* ga = grad_ptr(ai)) kernels::active().accumulate(ga, g, n);
    if (double* gb = grad_ptr(bi)) kernels::active().axpy(gb, -1.0, g, n);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "mul", kernels::active().mul, [](const Impl& ai, const Impl& bi, const Impl& oi) {
    const double* g = oi->grad->data();
    std::size_t n = oi->grad->size();
    if (double* ga = grad_ptr(ai)) kernels::active().mul_accum(ga, g, bi->values->data(), n);
    if (double* gb = grad_ptr(bi)) kernels::active().mul_accum(gb, g, ai->values->data(), n);
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.values())
    if (v == 0.0) fail(Errc::division_by_zero, "divisor contains a zero element");
  return binary_op(a, b, "div", kernels::active().div, [](const Impl& ai, const Impl& bi, const Impl& oi) {
    const double* g = oi->grad->data();
    const double* bv = bi->values->data();
    std::size_t n = oi->grad->size();
    if (double* ga = grad_ptr(ai)) kernels::active().div_accum(ga, g, bv, n);
    if (double* gb = grad_ptr(bi)) {
      // d(a/b)/db = -a / b^2 = -(out / b)
      const double* ov = oi->values->data();
      std::vector<double> tmp(n);
      kernels::active().div(ov, bv, tmp.data(), n);
      kernels::active().mul(tmp.data(), g, tmp.data(), n);
      kernels::active().axpy(gb, -1.0, tmp.data(), n);
    }
  });
}

namespace {

Tensor scalar_op(const Tensor& a, double s, void (*fwd)(const double*, double, double*, std::size_t),
                 double grad_scale) {
  Tensor out = Tensor::zeros(a.shape());
  fwd(a.values().data(), s, out.values_mut().data(), a.numel());
  if (GradTape* tape = GradTape::current(); tape && a.grad_tracked()) {
    tape->record(out, [ai = a.impl(), oi = out.impl(), grad_scale] {
      kernels::active().axpy(ai->grad->data(), grad_scale, oi->grad->data(), oi->grad->size());
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, double s) { return scalar_op(a, s, kernels::active().add_scalar, 1.0); }
Tensor sub(const Tensor& a, double s) { return scalar_op(a, s, kernels::active().sub_scalar, 1.0); }
Tensor mul(const Tensor& a, double s) { return scalar_op(a, s, kernels::active().mul_scalar, s); }

Tensor div(const Tensor& a, double s) {
  if (s == 0.0) fail(Errc::division_by_zero, "scalar divisor is zero");
  return scalar_op(a, s, kernels::active().div_scalar, 1.0 / s);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    fail(Errc::shape_mismatch, "matmul expects rank-2 operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    fail(Errc::shape_mismatch, "matmul inner dimensions disagree: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out = Tensor::zeros({m, n});
  kernels::active().gemm_nn(a.values().data(), b.values().data(), out.values_mut().data(), m, k, n);
  if (GradTape* tape = GradTape::current(); tape && (a.grad_tracked() || b.grad_tracked())) {
    tape->record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), m, k, n] {
      const double* g = oi->grad->data();
      if (double* ga = grad_ptr(ai))
        kernels::active().gemm_nt(g, bi->values->data(), ga, m, n, k);  // dA += G * B^T
      if (double* gb = grad_ptr(bi))
        kernels::active().gemm_tn(ai->values->data(), g, gb, k, m, n);  // dB += A^T * G
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  Tensor out = Tensor::scalar(kernels::active().reduce_sum(a.values().data(), a.numel()));
  if (GradTape* tape = GradTape::current(); tape && a.grad_tracked()) {
    tape->record(out, [ai = a.impl(), oi = out.impl()] {
      kernels::active().add_scalar(ai->grad->data(), (*oi->grad)[0], ai->grad->data(), ai->grad->size());
    });
  }
  return out;
}

double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& input,
                               double h) {
  if (h <= 0.0) fail(Errc::invalid_config, "finite-difference step must be positive");

  auto eval = [&](const Tensor& x) {
    Tensor y = f(x);
    if (y.numel() != 1) fail(Errc::non_scalar_loss, "checked function must return a scalar");
    return y.item();
  };

  Tensor probe = input.clone();
  double first = eval(probe);
  double second = eval(probe);
  if (first != second)
    fail(Errc::non_deterministic_function, "two evaluations at the same point disagree");

  Tensor x = input.clone();
  x.set_requires_grad(true);
  GradTape tape;
  {
    TapeScope scope(tape);
    Tensor loss = f(x);
    tape.backward(loss);
  }
  std::span<const double> analytic = x.grad();

  Tensor shifted = input.clone();
  std::span<double> sv = shifted.values_mut();
  double worst = 0.0;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    double original = sv[i];
    sv[i] = original + h;
    double fp = eval(shifted);
    sv[i] = original - h;
    double fm = eval(shifted);
    sv[i] = original;
    double numeric = (fp - fm) / (2.0 * h);
    double err = std::abs(analytic[i] - numeric) / std::max(std::abs(analytic[i]), 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace binbrain
