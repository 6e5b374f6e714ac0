#include "binbrain/tensor.hpp"

#include <sstream>

#include "binbrain/errors.hpp"

namespace binbrain {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ",";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) fail(Errc::invalid_shape, "rank-0 shapes are not supported");
  for (std::size_t d : shape)
    if (d == 0) fail(Errc::invalid_shape, "zero-length dimension in " + shape_str(shape));
}

std::shared_ptr<detail::TensorImpl> make_impl(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != values.size())
    fail(Errc::invalid_shape, "value count " + std::to_string(values.size()) + " does not match shape " + shape_str(shape));
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::make_shared<std::vector<double>>(std::move(values));
  if (requires_grad) {
    impl->requires_grad = true;
    impl->grad = std::make_shared<std::vector<double>>(impl->values->size(), 0.0);
  }
  return impl;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return wrap(make_impl(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return wrap(make_impl(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  return wrap(make_impl(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value) { return from_values({1}, {value}); }

const Shape& Tensor::shape() const {
  if (!impl_) fail(Errc::invalid_shape, "use of undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) fail(Errc::invalid_shape, "axis out of range for " + shape_str(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->values->size() : 0; }

std::span<const double> Tensor::values() const {
  if (!impl_) fail(Errc::invalid_shape, "use of undefined tensor");
  return {impl_->values->data(), impl_->values->size()};
}

std::span<double> Tensor::values_mut() {
  if (!impl_) fail(Errc::invalid_shape, "use of undefined tensor");
  return {impl_->values->data(), impl_->values->size()};
}

double Tensor::item() const {
  if (numel() != 1) fail(Errc::invalid_shape, "item() requires a single-element tensor, got " + shape_str(shape()));
  return (*impl_->values)[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!impl_) fail(Errc::invalid_shape, "use of undefined tensor");
  impl_->requires_grad = on;
  if (on) {
    if (!impl_->grad) impl_->grad = std::make_shared<std::vector<double>>(impl_->values->size(), 0.0);
  } else {
    impl_->grad.reset();
  }
}

bool Tensor::grad_tracked() const { return impl_ && impl_->grad != nullptr; }

std::span<const double> Tensor::grad() const {
  if (!grad_tracked()) fail(Errc::invalid_shape, "tensor has no gradient buffer");
  return {impl_->grad->data(), impl_->grad->size()};
}

std::span<double> Tensor::grad_mut() {
  if (!grad_tracked()) fail(Errc::invalid_shape, "tensor has no gradient buffer");
  return {impl_->grad->data(), impl_->grad->size()};
}

void Tensor::zero_grad() {
  if (grad_tracked()) std::fill(impl_->grad->begin(), impl_->grad->end(), 0.0);
}

Tensor Tensor::reshape(Shape new_shape) const {
  if (!impl_) fail(Errc::invalid_shape, "use of undefined tensor");
  check_shape(new_shape);
  if (shape_numel(new_shape) != numel())
    fail(Errc::shape_mismatch,
         "reshape " + shape_str(impl_->shape) + " -> " + shape_str(new_shape) + " changes element count");
  auto view = std::make_shared<detail::TensorImpl>(*impl_);
  view->shape = std::move(new_shape);
  return wrap(std::move(view));
}

Tensor Tensor::clone() const {
  return from_values(shape(), *impl_->values);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    fail(Errc::shape_mismatch,
         std::string(what) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace binbrain
