#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace binbrain {

// Dimensions are positive; a zero dimension is rejected at construction.
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  // Shared across reshaped views; layout is row-major.
  std::shared_ptr<std::vector<double>> values;
  // Non-null while the tensor participates in gradient computation. Views
  // share the buffer, so gradients written through a view land on the base.
  std::shared_ptr<std::vector<double>> grad;
  bool requires_grad = false;
};

}  // namespace detail

// Dense 64-bit float tensor with value semantics over a shared payload.
// Values are treated as immutable once an op has produced them; values_mut()
// exists for leaves (parameter updates, state buffers, test setup).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  std::span<double> values_mut();
  double item() const;  // requires numel() == 1

  bool requires_grad() const;
  // Allocates or drops the gradient buffer; flipping a parameter to false is
  // how freezing works.
  void set_requires_grad(bool on);
  bool grad_tracked() const;
  std::span<const double> grad() const;
  std::span<double> grad_mut();
  void zero_grad();

  // View with the same element count; shares values and gradient storage.
  Tensor reshape(Shape new_shape) const;
  // Deep copy of the values into a fresh untracked leaf.
  Tensor clone() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl) { return Tensor(std::move(impl)); }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<detail::TensorImpl> impl_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace binbrain
