// SPDX-License-Identifier: Apache-2.0
#include "mpg/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mpg::nc {

namespace {

constexpr double kGeluCoef = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / 3.14159265358979323846);

bool taping(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs)
    if (t && t->requires_grad()) return true;
  return false;
}

Tensor result_of(Shape shape, std::vector<double> data,
                 std::initializer_list<const Tensor*> inputs) {
  Tensor out = make_tensor(std::move(shape), std::move(data));
  if (taping(inputs)) {
    out.impl()->requires_grad = true;
    out.impl()->leaf = false;
    out.impl()->on_tape = true;
  }
  return out;
}

void record(const Tensor& out, std::function<void()> fn) {
  if (out.impl()->on_tape) Tape::active()->record(std::move(fn), out);
}

// Adds `g` into the gradient of `t` if it participates.
void accumulate(const std::shared_ptr<TensorImpl>& t, const std::vector<double>& g) {
  if (!t->requires_grad) return;
  detail::ensure_grad(*t);
  for (std::size_t i = 0; i < g.size(); ++i) t->grad[i] += g[i];
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch");
}

// C (m x n) = A (m x k) . B (k x n), with optional transposes and accumulate.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate_c) {
  if (!accumulate_c) std::fill(c, c + m * n, 0.0);
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a[i * k + p];
        if (av == 0.0) continue;
        const double* brow = b + p * n;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double* arow = a + i * k;
        const double* brow = b + j * k;
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        c[i * n + j] += acc;
      }
  } else if (trans_a && !trans_b) {
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < m; ++i) {
        const double av = a[p * m + i];
        if (av == 0.0) continue;
        const double* brow = b + p * n;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[j * k + p];
        c[i * n + j] += acc;
      }
  }
}

}  // namespace

double sigmoid_value(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double gelu_value(double x) {
  const double inner = kSqrt2OverPi * (x + kGeluCoef * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(inner));
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> data(a.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = a.data()[i] + b.data()[i];
  Tensor out = result_of(a.shape(), std::move(data), {&a, &b});
  record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
    if (oi->grad.empty()) return;
    accumulate(ai, oi->grad);
    accumulate(bi, oi->grad);
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> data(a.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = a.data()[i] - b.data()[i];
  Tensor out = result_of(a.shape(), std::move(data), {&a, &b});
  record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
    if (oi->grad.empty()) return;
    accumulate(ai, oi->grad);
    if (bi->requires_grad) {
      detail::ensure_grad(*bi);
      for (std::size_t i = 0; i < oi->grad.size(); ++i) bi->grad[i] -= oi->grad[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> data(a.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = a.data()[i] * b.data()[i];
  Tensor out = result_of(a.shape(), std::move(data), {&a, &b});
  record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
    if (oi->grad.empty()) return;
    if (ai->requires_grad) {
      detail::ensure_grad(*ai);
      for (std::size_t i = 0; i < oi->grad.size(); ++i)
        ai->grad[i] += oi->grad[i] * bi->data[i];
    }
    if (bi->requires_grad) {
      detail::ensure_grad(*bi);
      for (std::size_t i = 0; i < oi->grad.size(); ++i)
        bi->grad[i] += oi->grad[i] * ai->data[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> data(a.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = a.data()[i] * c;
  Tensor out = result_of(a.shape(), std::move(data), {&a});
  record(out, [ai = a.impl(), oi = out.impl(), c] {
    if (oi->grad.empty() || !ai->requires_grad) return;
    detail::ensure_grad(*ai);
    for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i] * c;
  });
  return out;
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> data(x.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = sigmoid_value(x.data()[i]);
  Tensor out = result_of(x.shape(), std::move(data), {&x});
  record(out, [xi = x.impl(), oi = out.impl()] {
    if (oi->grad.empty() || !xi->requires_grad) return;
    detail::ensure_grad(*xi);
    for (std::size_t i = 0; i < oi->grad.size(); ++i) {
      const double s = oi->data[i];
      xi->grad[i] += oi->grad[i] * s * (1.0 - s);
    }
  });
  return out;
}

Tensor tanh(const Tensor& x) {
  std::vector<double> data(x.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::tanh(x.data()[i]);
  Tensor out = result_of(x.shape(), std::move(data), {&x});
  record(out, [xi = x.impl(), oi = out.impl()] {
    if (oi->grad.empty() || !xi->requires_grad) return;
    detail::ensure_grad(*xi);
    for (std::size_t i = 0; i < oi->grad.size(); ++i) {
      const double t = oi->data[i];
      xi->grad[i] += oi->grad[i] * (1.0 - t * t);
    }
  });
  return out;
}

Tensor gelu(const Tensor& x) {
  std::vector<double> data(x.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = gelu_value(x.data()[i]);
  Tensor out = result_of(x.shape(), std::move(data), {&x});
  record(out, [xi = x.impl(), oi = out.impl()] {
    if (oi->grad.empty() || !xi->requires_grad) return;
    detail::ensure_grad(*xi);
    for (std::size_t i = 0; i < oi->grad.size(); ++i) {
      const double v = xi->data[i];
      const double inner = kSqrt2OverPi * (v + kGeluCoef * v * v * v);
      const double t = std::tanh(inner);
      const double dinner = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoef * v * v);
      const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner;
      xi->grad[i] += oi->grad[i] * d;
    }
  });
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul: both operands must be rank 2");
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  if (b.shape()[0] != k) throw ShapeError("matmul: inner dimensions differ");
  const std::size_t n = b.shape()[1];
  std::vector<double> data(m * n);
  gemm(false, false, m, n, k, a.data(), b.data(), data.data(), false);
  Tensor out = result_of({m, n}, std::move(data), {&a, &b});
  record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), m, n, k] {
    if (oi->grad.empty()) return;
    if (ai->requires_grad) {
      detail::ensure_grad(*ai);  // dA = dC . B^T
      gemm(false, true, m, k, n, oi->grad.data(), bi->data.data(), ai->grad.data(), true);
    }
    if (bi->requires_grad) {
      detail::ensure_grad(*bi);  // dB = A^T . dC
      gemm(true, false, k, n, m, ai->data.data(), oi->grad.data(), bi->grad.data(), true);
    }
  });
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias) {
  if (x.rank() != 2 || w.rank() != 2)
    throw ShapeError("linear: x and w must be rank 2");
  const std::size_t r = x.shape()[0], in = x.shape()[1];
  if (w.shape()[1] != in) throw ShapeError("linear: weight inner dimension differs");
  const std::size_t outn = w.shape()[0];
  if (bias && bias->size() != outn) throw ShapeError("linear: bias length differs");
  std::vector<double> data(r * outn);
  gemm(false, true, r, outn, in, x.data(), w.data(), data.data(), false);
  if (bias) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < outn; ++j) data[i * outn + j] += bias->data()[j];
  }
  Tensor out = result_of({r, outn}, std::move(data),
                         {&x, &w, bias ? bias : nullptr});
  auto binfo = bias ? bias->impl() : nullptr;
  record(out, [xi = x.impl(), wi = w.impl(), bi = binfo, oi = out.impl(), r, in, outn] {
    if (oi->grad.empty()) return;
    if (xi->requires_grad) {
      detail::ensure_grad(*xi);  // dX = dC . W
      gemm(false, false, r, in, outn, oi->grad.data(), wi->data.data(), xi->grad.data(), true);
    }
    if (wi->requires_grad) {
      detail::ensure_grad(*wi);  // dW = dC^T . X
      gemm(true, false, outn, in, r, oi->grad.data(), xi->data.data(), wi->grad.data(), true);
    }
    if (bi && bi->requires_grad) {
      detail::ensure_grad(*bi);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < outn; ++j) bi->grad[j] += oi->grad[i * outn + j];
    }
  });
  return out;
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() == 0)
    throw ShapeError("concat_last: rank mismatch");
  Shape shape = a.shape();
  for (std::size_t i = 0; i + 1 < shape.size(); ++i)
    if (b.shape()[i] != shape[i]) throw ShapeError("concat_last: leading dims differ");
  const std::size_t rows = a.size() / a.shape().back();
  const std::size_t ca = a.shape().back(), cb = b.shape().back();
  shape.back() = ca + cb;
  std::vector<double> data(rows * (ca + cb));
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy(a.data() + i * ca, a.data() + (i + 1) * ca, data.begin() + i * (ca + cb));
    std::copy(b.data() + i * cb, b.data() + (i + 1) * cb,
              data.begin() + i * (ca + cb) + ca);
  }
  Tensor out = result_of(std::move(shape), std::move(data), {&a, &b});
  record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), rows, ca, cb] {
    if (oi->grad.empty()) return;
    if (ai->requires_grad) {
      detail::ensure_grad(*ai);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < ca; ++j)
          ai->grad[i * ca + j] += oi->grad[i * (ca + cb) + j];
    }
    if (bi->requires_grad) {
      detail::ensure_grad(*bi);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cb; ++j)
          bi->grad[i * cb + j] += oi->grad[i * (ca + cb) + ca + j];
    }
  });
  return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& indices) {
  const std::size_t c = x.row_size();
  const std::size_t n = x.rows();
  std::vector<double> data(indices.size() * c);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int idx = indices[r];
    if (idx < 0 || static_cast<std::size_t>(idx) >= n)
      throw IndexError("gather_rows: index out of range");
    std::copy(x.data() + idx * c, x.data() + (idx + 1) * c, data.begin() + r * c);
  }
  Shape shape = x.shape();
  if (shape.empty()) throw ShapeError("gather_rows: scalar input");
  shape[0] = indices.size();
  Tensor out = result_of(std::move(shape), std::move(data), {&x});
  record(out, [xi = x.impl(), oi = out.impl(), indices, c] {
    if (oi->grad.empty() || !xi->requires_grad) return;
    detail::ensure_grad(*xi);
    for (std::size_t r = 0; r < indices.size(); ++r)
      for (std::size_t j = 0; j < c; ++j)
        xi->grad[indices[r] * c + j] += oi->grad[r * c + j];
  });
  return out;
}

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
  Tensor out = result_of({}, {acc}, {&x});
  record(out, [xi = x.impl(), oi = out.impl()] {
    if (oi->grad.empty() || !xi->requires_grad) return;
    detail::ensure_grad(*xi);
    for (auto& g : xi->grad) g += oi->grad[0];
  });
  return out;
}

Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.size()));
}

Tensor softmax_rows(const Tensor& x, const Tensor* mask) {
  if (x.rank() == 0) throw ShapeError("softmax_rows: scalar input");
  if (mask) check_same_shape(x, *mask, "softmax_rows mask");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  std::vector<double> data(x.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x.data() + r * n;
    const double* mrow = mask ? mask->data() + r * n : nullptr;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (!mrow || mrow[j] != 0.0) mx = std::max(mx, row[j]);
    if (!std::isfinite(mx)) throw MaskError("softmax_rows: fully masked row");
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mrow && mrow[j] == 0.0) continue;
      data[r * n + j] = std::exp(row[j] - mx);
      total += data[r * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) data[r * n + j] /= total;
  }
  Tensor out = result_of(x.shape(), std::move(data), {&x});
  record(out, [xi = x.impl(), oi = out.impl(), rows, n] {
    if (oi->grad.empty() || !xi->requires_grad) return;
    detail::ensure_grad(*xi);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        dot += oi->grad[r * n + j] * oi->data[r * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        const double a = oi->data[r * n + j];
        xi->grad[r * n + j] += a * (oi->grad[r * n + j] - dot);
      }
    }
  });
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() == 0) throw ShapeError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (gamma.size() != d || beta.size() != d)
    throw ShapeError("layer_norm: gamma/beta length differs from last dim");
  const std::size_t rows = x.size() / d;
  std::vector<double> data(x.size());
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (row[j] - mean) * is;
      (*xhat)[r * d + j] = xh;
      data[r * d + j] = xh * gamma.data()[j] + beta.data()[j];
    }
  }
  Tensor out = result_of(x.shape(), std::move(data), {&x, &gamma, &beta});
  record(out, [xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl(),
               xhat, inv_std, rows, d] {
    if (oi->grad.empty()) return;
    if (gi->requires_grad) {
      detail::ensure_grad(*gi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j)
          gi->grad[j] += oi->grad[r * d + j] * (*xhat)[r * d + j];
    }
    if (bi->requires_grad) {
      detail::ensure_grad(*bi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) bi->grad[j] += oi->grad[r * d + j];
    }
    if (xi->requires_grad) {
      detail::ensure_grad(*xi);
      const double dn = static_cast<double>(d);
      for (std::size_t r = 0; r < rows; ++r) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double dxh = oi->grad[r * d + j] * gi->data[j];
          sum_dxhat += dxh;
          sum_dxhat_xhat += dxh * (*xhat)[r * d + j];
        }
        const double is = (*inv_std)[r];
        for (std::size_t j = 0; j < d; ++j) {
          const double dxh = oi->grad[r * d + j] * gi->data[j];
          xi->grad[r * d + j] +=
              is / dn * (dn * dxh - sum_dxhat - (*xhat)[r * d + j] * sum_dxhat_xhat);
        }
      }
    }
  });
  return out;
}

Tensor segment_sum(const Tensor& x, const std::vector<int>& seg, std::size_t n_segments) {
  if (seg.size() != x.rows()) throw ShapeError("segment_sum: segment ids per row");
  const std::size_t c = x.row_size();
  for (int s : seg)
    if (s < 0 || static_cast<std::size_t>(s) >= n_segments)
      throw IndexError("segment_sum: segment id out of range");
  std::vector<double> data(n_segments * c, 0.0);
  for (std::size_t r = 0; r < seg.size(); ++r)
    for (std::size_t j = 0; j < c; ++j) data[seg[r] * c + j] += x.data()[r * c + j];
  Shape shape = x.shape();
  shape[0] = n_segments;
  Tensor out = result_of(std::move(shape), std::move(data), {&x});
  record(out, [xi = x.impl(), oi = out.impl(), seg, c] {
    if (oi->grad.empty() || !xi->requires_grad) return;
    detail::ensure_grad(*xi);
    for (std::size_t r = 0; r < seg.size(); ++r)
      for (std::size_t j = 0; j < c; ++j)
        xi->grad[r * c + j] += oi->grad[seg[r] * c + j];
  });
  return out;
}

Tensor segment_softmax(const Tensor& x, const std::vector<int>& seg, std::size_t n_segments) {
  if (seg.size() != x.rows()) throw ShapeError("segment_softmax: segment ids per row");
  const std::size_t c = x.row_size();
  const std::size_t rows = x.rows();
  for (int s : seg)
    if (s < 0 || static_cast<std::size_t>(s) >= n_segments)
      throw IndexError("segment_softmax: segment id out of range");
  // group max, then exp/sum in two passes
  std::vector<double> mx(n_segments * c, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j)
      mx[seg[r] * c + j] = std::max(mx[seg[r] * c + j], x.data()[r * c + j]);
  std::vector<double> data(x.size());
  std::vector<double> total(n_segments * c, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      data[r * c + j] = std::exp(x.data()[r * c + j] - mx[seg[r] * c + j]);
      total[seg[r] * c + j] += data[r * c + j];
    }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) data[r * c + j] /= total[seg[r] * c + j];
  Tensor out = result_of(x.shape(), std::move(data), {&x});
  record(out, [xi = x.impl(), oi = out.impl(), seg, c, n_segments] {
    if (oi->grad.empty() || !xi->requires_grad) return;
    detail::ensure_grad(*xi);
    std::vector<double> dot(n_segments * c, 0.0);
    for (std::size_t r = 0; r < seg.size(); ++r)
      for (std::size_t j = 0; j < c; ++j)
        dot[seg[r] * c + j] += oi->grad[r * c + j] * oi->data[r * c + j];
    for (std::size_t r = 0; r < seg.size(); ++r)
      for (std::size_t j = 0; j < c; ++j) {
        const double a = oi->data[r * c + j];
        xi->grad[r * c + j] += a * (oi->grad[r * c + j] - dot[seg[r] * c + j]);
      }
  });
  return out;
}

Tensor headwise_dot(const Tensor& a, const Tensor& b, std::size_t heads) {
  check_same_shape(a, b, "headwise_dot");
  if (a.rank() != 2 || a.shape()[1] % heads != 0)
    throw ShapeError("headwise_dot: columns must split into heads");
  const std::size_t rows = a.shape()[0];
  const std::size_t hc = a.shape()[1] / heads;
  std::vector<double> data(rows * heads, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t h = 0; h < heads; ++h) {
      const double* ar = a.data() + r * heads * hc + h * hc;
      const double* br = b.data() + r * heads * hc + h * hc;
      double acc = 0.0;
      for (std::size_t j = 0; j < hc; ++j) acc += ar[j] * br[j];
      data[r * heads + h] = acc;
    }
  Tensor out = result_of({rows, heads}, std::move(data), {&a, &b});
  record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), rows, heads, hc] {
    if (oi->grad.empty()) return;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t h = 0; h < heads; ++h) {
        const double g = oi->grad[r * heads + h];
        if (g == 0.0) continue;
        const std::size_t base = r * heads * hc + h * hc;
        if (ai->requires_grad) {
          detail::ensure_grad(*ai);
          for (std::size_t j = 0; j < hc; ++j) ai->grad[base + j] += g * bi->data[base + j];
        }
        if (bi->requires_grad) {
          detail::ensure_grad(*bi);
          for (std::size_t j = 0; j < hc; ++j) bi->grad[base + j] += g * ai->data[base + j];
        }
      }
  });
  return out;
}

Tensor scale_heads(const Tensor& v, const Tensor& w, std::size_t heads) {
  if (v.rank() != 2 || w.rank() != 2 || v.shape()[0] != w.shape()[0] ||
      w.shape()[1] != heads || v.shape()[1] % heads != 0)
    throw ShapeError("scale_heads: inconsistent shapes");
  const std::size_t rows = v.shape()[0];
  const std::size_t hc = v.shape()[1] / heads;
  std::vector<double> data(v.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t h = 0; h < heads; ++h) {
      const double s = w.data()[r * heads + h];
      const std::size_t base = r * heads * hc + h * hc;
      for (std::size_t j = 0; j < hc; ++j) data[base + j] = v.data()[base + j] * s;
    }
  Tensor out = result_of(v.shape(), std::move(data), {&v, &w});
  record(out, [vi = v.impl(), wi = w.impl(), oi = out.impl(), rows, heads, hc] {
    if (oi->grad.empty()) return;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t base = r * heads * hc + h * hc;
        const double s = wi->data[r * heads + h];
        if (vi->requires_grad) {
          detail::ensure_grad(*vi);
          for (std::size_t j = 0; j < hc; ++j) vi->grad[base + j] += oi->grad[base + j] * s;
        }
        if (wi->requires_grad) {
          detail::ensure_grad(*wi);
          double acc = 0.0;
          for (std::size_t j = 0; j < hc; ++j) acc += oi->grad[base + j] * vi->data[base + j];
          wi->grad[r * heads + h] += acc;
        }
      }
  });
  return out;
}

Tensor cross_entropy_logits(const Tensor& logits, const std::vector<double>& targets) {
  if (logits.size() != targets.size())
    throw ShapeError("cross_entropy_logits: one logit per target");
  const std::size_t m = targets.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double z = logits.data()[i];
    const double y = targets[i];
    // -(y log p + (1-y) log(1-p)) = max(z,0) - z y + log(1 + exp(-|z|))
    loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= static_cast<double>(m);
  Tensor out = result_of({}, {loss}, {&logits});
  record(out, [li = logits.impl(), oi = out.impl(), targets, m] {
    if (oi->grad.empty() || !li->requires_grad) return;
    detail::ensure_grad(*li);
    const double g = oi->grad[0] / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      li->grad[i] += g * (sigmoid_value(li->data[i]) - targets[i]);
  });
  return out;
}

Tensor cross_entropy_logits_masked(const Tensor& logits, const std::vector<double>& targets,
                                   const std::vector<double>& mask) {
  if (logits.size() != targets.size() || logits.size() != mask.size())
    throw ShapeError("cross_entropy_logits_masked: length mismatch");
  double present = 0.0;
  for (double m : mask) present += (m != 0.0) ? 1.0 : 0.0;
  if (present == 0.0) throw MaskError("cross_entropy_logits_masked: no present labels");
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (mask[i] == 0.0) continue;
    const double z = logits.data()[i];
    loss += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= present;
  Tensor out = result_of({}, {loss}, {&logits});
  record(out, [li = logits.impl(), oi = out.impl(), targets, mask, present] {
    if (oi->grad.empty() || !li->requires_grad) return;
    detail::ensure_grad(*li);
    const double g = oi->grad[0] / present;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (mask[i] == 0.0) continue;
      li->grad[i] += g * (sigmoid_value(li->data[i]) - targets[i]);
    }
  });
  return out;
}

Tensor mse_masked(const Tensor& predictions, const std::vector<double>& targets,
                  const std::vector<double>& mask) {
  if (predictions.size() != targets.size() || predictions.size() != mask.size())
    throw ShapeError("mse_masked: length mismatch");
  double present = 0.0;
  for (double m : mask) present += (m != 0.0) ? 1.0 : 0.0;
  if (present == 0.0) throw MaskError("mse_masked: no present labels");
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (mask[i] == 0.0) continue;
    const double d = predictions.data()[i] - targets[i];
    loss += d * d;
  }
  loss /= present;
  Tensor out = result_of({}, {loss}, {&predictions});
  record(out, [pi = predictions.impl(), oi = out.impl(), targets, mask, present] {
    if (oi->grad.empty() || !pi->requires_grad) return;
    detail::ensure_grad(*pi);
    const double g = oi->grad[0] / present;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (mask[i] == 0.0) continue;
      pi->grad[i] += g * 2.0 * (pi->data[i] - targets[i]);
    }
  });
  return out;
}

Tensor cross_entropy_logits(const Tensor& logits, const std::vector<int>& targets) {
  if (logits.rank() != 2 || logits.shape()[0] != targets.size())
    throw ShapeError("cross_entropy_logits: logits must be rows x classes");
  const std::size_t m = targets.size();
  const std::size_t c = logits.shape()[1];
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= c)
      throw IndexError("cross_entropy_logits: target class out of range");
    const double* row = logits.data() + i * c;
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double lse = 0.0;
    for (std::size_t j = 0; j < c; ++j) lse += std::exp(row[j] - mx);
    loss += mx + std::log(lse) - row[targets[i]];
  }
  loss /= static_cast<double>(m);
  Tensor out = result_of({}, {loss}, {&logits});
  record(out, [li = logits.impl(), oi = out.impl(), targets, m, c] {
    if (oi->grad.empty() || !li->requires_grad) return;
    detail::ensure_grad(*li);
    const double g = oi->grad[0] / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = li->data.data() + i * c;
      double mx = row[0];
      for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
      double lse = 0.0;
      for (std::size_t j = 0; j < c; ++j) lse += std::exp(row[j] - mx);
      for (std::size_t j = 0; j < c; ++j) {
        const double p = std::exp(row[j] - mx) / lse;
        li->grad[i * c + j] += g * (p - (static_cast<std::size_t>(targets[i]) == static_cast<std::size_t>(j) ? 1.0 : 0.0));
      }
    }
  });
  return out;
}

}  // namespace mpg::nc
