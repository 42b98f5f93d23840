// SPDX-License-Identifier: Apache-2.0
#include "mpg/numcore/tensor.hpp"

#include <numeric>

namespace mpg::nc {

namespace {

thread_local Tape* g_active_tape = nullptr;
thread_local Precision g_precision = Precision::Float64;

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

void set_precision(Precision p) { g_precision = p; }
Precision precision() { return g_precision; }

void detail::quantize(std::vector<double>& v) {
  if (g_precision == Precision::Float32) {
    for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
  }
}

void detail::ensure_grad(TensorImpl& t) {
  if (t.grad.size() != t.data.size()) t.grad.assign(t.data.size(), 0.0);
}

Tensor make_tensor(Shape shape, std::vector<double> data) {
  auto impl = std::make_shared<TensorImpl>();
  if (shape_product(shape) != data.size())
    throw ShapeError("tensor data length does not match shape");
  impl->shape = std::move(shape);
  detail::quantize(data);
  impl->data = std::move(data);
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape) {
  std::vector<double> data(shape_product(shape), 0.0);
  return make_tensor(std::move(shape), std::move(data));
}

Tensor Tensor::full(Shape shape, double value) {
  std::vector<double> data(shape_product(shape), value);
  return make_tensor(std::move(shape), std::move(data));
}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
  return make_tensor(std::move(shape), std::move(data));
}

Tensor Tensor::scalar(double value) { return make_tensor({}, {value}); }

Tensor Tensor::param(Shape shape, std::vector<double> data) {
  Tensor t = make_tensor(std::move(shape), std::move(data));
  t.impl_->requires_grad = true;
  return t;
}

double Tensor::value() const {
  if (size() != 1) throw ShapeError("value() requires a scalar tensor");
  return impl_->data[0];
}

std::vector<double>& Tensor::grad() {
  detail::ensure_grad(*impl_);
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

Tensor Tensor::clone() const {
  Tensor t = make_tensor(impl_->shape, impl_->data);
  t.impl_->requires_grad = impl_->requires_grad;
  return t;
}

Tensor Tensor::detach() const {
  return make_tensor(impl_->shape, impl_->data);
}

Tape::Tape() {
  previous_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::function<void()> backward_step, const Tensor& result) {
  steps_.push_back(std::move(backward_step));
  results_.push_back(result.impl());
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) throw TapeError("backward requires a scalar loss");
  if (!loss.impl()->on_tape)
    throw TapeError("loss is detached from this tape");
  detail::ensure_grad(*loss.impl());
  loss.impl()->grad[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  // Intermediates carry per-pass gradients only; leaves keep accumulating.
  for (auto& impl : results_) impl->grad.clear();
}

}  // namespace mpg::nc
