// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mpg/numcore/tensor.hpp"

#include <cstdint>
#include <optional>

namespace mpg::nc {

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
/// GELU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& x);

// ---- linear algebra --------------------------------------------------------

/// Standard matrix product, a: m x k, b: k x n.
Tensor matmul(const Tensor& a, const Tensor& b);

/// x: r x in, w: out x in, bias (optional): out. Returns x w^T (+ bias).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias = nullptr);

// ---- shape / gather --------------------------------------------------------

/// Concatenation along the last dimension; leading dimensions must agree.
Tensor concat_last(const Tensor& a, const Tensor& b);

/// out[r] = x[indices[r]] as rows. Backward scatter-adds.
Tensor gather_rows(const Tensor& x, const std::vector<int>& indices);

/// Table gather; identical to gather_rows, named for the embedding use.
inline Tensor embedding_lookup(const Tensor& table, const std::vector<int>& indices) {
  return gather_rows(table, indices);
}

// ---- reductions and normalizations -----------------------------------------

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

/// Row-wise softmax over the last dimension with optional 0/1 keep-mask.
/// Masked-out entries are exactly zero. Throws MaskError on a fully masked row.
Tensor softmax_rows(const Tensor& x, const Tensor* mask = nullptr);

/// Per-row normalization over the last dimension, eps inside the sqrt,
/// then affine transform by gamma/beta (both of length d).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// ---- segmented ops (sparse graph aggregation) -------------------------------

/// out[s] = sum of rows r with seg[r] == s. Segments may be empty (zero rows).
Tensor segment_sum(const Tensor& x, const std::vector<int>& seg, std::size_t n_segments);

/// Column-wise softmax within each segment of rows. Rows of an absent segment
/// simply do not exist; every present (segment, column) group normalizes to 1.
Tensor segment_softmax(const Tensor& x, const std::vector<int>& seg, std::size_t n_segments);

/// a, b: r x (heads * c). out[r, h] = dot(a[r, h-block], b[r, h-block]).
Tensor headwise_dot(const Tensor& a, const Tensor& b, std::size_t heads);

/// v: r x (heads * c), w: r x heads. Scales each head block of v[r] by w[r, h].
Tensor scale_heads(const Tensor& v, const Tensor& w, std::size_t heads);

// ---- losses ----------------------------------------------------------------

/// Binary cross-entropy from logits (stable log-sum-exp form), mean over rows.
Tensor cross_entropy_logits(const Tensor& logits, const std::vector<double>& targets);

/// Categorical cross-entropy from logits (r x classes), mean over rows.
Tensor cross_entropy_logits(const Tensor& logits, const std::vector<int>& targets);

/// Element-wise binary cross-entropy from logits with a 0/1 presence mask
/// (missing-label skipping); mean over present entries.
Tensor cross_entropy_logits_masked(const Tensor& logits, const std::vector<double>& targets,
                                   const std::vector<double>& mask);

/// Mean squared error over present entries.
Tensor mse_masked(const Tensor& predictions, const std::vector<double>& targets,
                  const std::vector<double>& mask);

// ---- non-differentiating helpers -------------------------------------------

double sigmoid_value(double z);
double gelu_value(double x);

}  // namespace mpg::nc
