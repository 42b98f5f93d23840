// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpg::nc {

class ShapeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IndexError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class MaskError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class TapeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

/// 64-bit everywhere by default; Float32 emulates single-precision storage by
/// rounding every freshly produced tensor through float. Gradient checks are
/// only meaningful under Float64.
enum class Precision { Float64, Float32 };

void set_precision(Precision p);
Precision precision();

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty means "all zero"
  bool requires_grad = false;
  bool leaf = true;
  bool on_tape = false;
};

/**
 * Dense row-major tensor. Value-semantic handle over shared storage:
 * copying a Tensor aliases the same buffer, clone() makes a deep copy.
 */
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> data);
  static Tensor scalar(double value);
  /// Leaf tensor that participates in gradient computation.
  static Tensor param(Shape shape, std::vector<double> data);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->data.size(); }
  std::size_t rank() const { return impl_->shape.size(); }
  /// Leading dimension (1 for scalars).
  std::size_t rows() const { return impl_->shape.empty() ? 1 : impl_->shape[0]; }
  /// Elements per leading-dimension slice.
  std::size_t row_size() const {
    return impl_->shape.empty() ? 1 : size() / impl_->shape[0];
  }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  std::vector<double>& vec() { return impl_->data; }
  const std::vector<double>& vec() const { return impl_->data; }

  double& at(std::size_t i) { return impl_->data[i]; }
  double at(std::size_t i) const { return impl_->data[i]; }
  double& at(std::size_t i, std::size_t j) { return impl_->data[i * row_size() + j]; }
  double at(std::size_t i, std::size_t j) const { return impl_->data[i * row_size() + j]; }

  /// Value of a scalar (size-1) tensor.
  double value() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }
  bool is_leaf() const { return impl_->leaf; }

  /// Accumulated gradient, zero-filled on first access.
  std::vector<double>& grad();
  const std::vector<double>& grad_or_empty() const { return impl_->grad; }
  void zero_grad();

  Tensor clone() const;
  /// Same data, no gradient participation.
  Tensor detach() const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_tensor(Shape, std::vector<double>);
  std::shared_ptr<TensorImpl> impl_;
};

Tensor make_tensor(Shape shape, std::vector<double> data);

/**
 * Reverse-mode tape. Construction activates the tape for the current thread
 * (nesting restores the previous one on destruction). Ops record a backward
 * closure when any input requires a gradient; backward() replays them in
 * strict reverse order, accumulating into leaf gradients additively.
 */
class Tape {
public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(std::function<void()> backward_step, const Tensor& result);

  /// Seeds d(loss)/d(loss) = 1 and runs all recorded steps in reverse.
  /// Gradients of non-leaf tensors are cleared afterwards so that repeated
  /// calls accumulate exactly additively on the leaves.
  void backward(const Tensor& loss);

  std::size_t size() const { return steps_.size(); }

private:
  std::vector<std::function<void()>> steps_;
  std::vector<std::shared_ptr<TensorImpl>> results_;
  Tape* previous_ = nullptr;
};

namespace detail {
void ensure_grad(TensorImpl& t);
/// Applies the active precision policy to freshly produced values.
void quantize(std::vector<double>& v);
}  // namespace detail

}  // namespace mpg::nc
