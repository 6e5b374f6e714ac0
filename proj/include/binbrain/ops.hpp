#pragma once

#include <functional>

#include "binbrain/autodiff.hpp"
#include "binbrain/tensor.hpp"

namespace binbrain {

// Differentiable tensor arithmetic. Shapes must match exactly; the only
// broadcast is tensor-vs-scalar (the double overloads). Division checks the
// divisor for zero elements up front.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double s);
Tensor sub(const Tensor& a, double s);
Tensor mul(const Tensor& a, double s);
Tensor div(const Tensor& a, double s);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return sub(a, s); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, s); }
inline Tensor operator/(const Tensor& a, double s) { return div(a, s); }

// C[M,N] = A[M,K] * B[K,N]
Tensor matmul(const Tensor& a, const Tensor& b);

// Scalar sum of all elements.
Tensor sum(const Tensor& a);

// Central-difference audit of the tape gradient of `f` at `input`:
// max over elements of |analytic - (f(x+h) - f(x-h)) / 2h| / max(|analytic|, 1e-8).
// `f` must map a tensor to a single-element tensor and be deterministic
// (checked by evaluating twice at the same point).
double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& input,
                               double h);

}  // namespace binbrain
