// SPDX-License-Identifier: Apache-2.0
#include "support/naive_molgnet.hpp"

#include <cmath>

namespace mpg::testsupport {

namespace {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

// y = W x with W stored row-major (out x in)
Vec matvec(const nc::Tensor& w, const Vec& x) {
  const std::size_t out = w.shape()[0], in = w.shape()[1];
  Vec y(out, 0.0);
  for (std::size_t r = 0; r < out; ++r)
    for (std::size_t c = 0; c < in; ++c) y[r] += w.data()[r * in + c] * x[c];
  return y;
}

double naive_gelu(double x) {
  const double k = std::sqrt(2.0 / 3.14159265358979323846);
  return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

Vec layer_norm_row(const Vec& x, const nc::Tensor& gamma, const nc::Tensor& beta,
                   double eps = 1e-5) {
  const std::size_t d = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d);
  Vec y(d);
  for (std::size_t j = 0; j < d; ++j)
    y[j] = (x[j] - mean) / std::sqrt(var + eps) * gamma.data()[j] + beta.data()[j];
  return y;
}

}  // namespace

std::vector<std::vector<double>> naive_forward(const molgnet::BatchedGraph& batch,
                                               const molgnet::MolGNetParams& params,
                                               const molgnet::MolGNetConfig& config) {
  const int n = batch.n_nodes();
  const std::size_t d = static_cast<std::size_t>(config.hidden);
  const std::size_t heads = static_cast<std::size_t>(config.heads);
  const std::size_t dk = static_cast<std::size_t>(config.head_dim());

  // input representation
  Mat x(n, Vec(d, 0.0));
  for (int i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (int f = 0; f < chem::kAtomFields; ++f)
        acc += params.atom_embed.data()[batch.node_feats[i][f] * d + j];
      acc += params.segment_embed.data()[batch.node_seg[i] * d + j];
      x[i][j] = acc;
    }
  Mat e(batch.n_arcs(), Vec(d, 0.0));
  for (int a = 0; a < batch.n_arcs(); ++a) {
    const auto& arc = batch.arcs[a];
    for (std::size_t j = 0; j < d; ++j) {
      double acc = params.segment_embed.data()[arc.seg * d + j];
      if (arc.is_virtual) {
        acc += params.virtual_edge.data()[j];
      } else {
        for (int f = 0; f < chem::kBondFields; ++f)
          acc += params.bond_embed.data()[arc.bond[f] * d + j];
      }
      e[a][j] = acc;
    }
  }

  Mat h = x;
  for (int l = 0; l < config.n_layers; ++l) {
    const auto& layer = params.layers[l];
    if (!config.gru_persistent_hidden) h = x;
    for (int t = 0; t < config.steps_per_layer; ++t) {
      // neighbor attention, one node and one head at a time
      Mat messages(n, Vec(d, 0.0));
      for (int i = 0; i < n; ++i) {
        std::vector<int> in_arcs;
        for (int a = 0; a < batch.n_arcs(); ++a)
          if (batch.arcs[a].dst == i) in_arcs.push_back(a);
        if (in_arcs.empty()) continue;
        const Vec q = matvec(layer.w_q, x[i]);
        std::vector<Vec> keys, values;
        for (int a : in_arcs) {
          Vec info(d);
          for (std::size_t j = 0; j < d; ++j) info[j] = x[batch.arcs[a].src][j] + e[a][j];
          keys.push_back(matvec(layer.w_k, info));
          values.push_back(matvec(layer.w_v, info));
        }
        Vec concat(d, 0.0);
        for (std::size_t k = 0; k < heads; ++k) {
          std::vector<double> scores(in_arcs.size());
          for (std::size_t a = 0; a < in_arcs.size(); ++a) {
            double dot = 0.0;
            for (std::size_t r = 0; r < dk; ++r)
              dot += q[k * dk + r] * keys[a][k * dk + r];
            scores[a] = dot / std::sqrt(static_cast<double>(dk));
          }
          double mx = scores[0];
          for (double s : scores) mx = std::max(mx, s);
          double total = 0.0;
          for (auto& s : scores) {
            s = std::exp(s - mx);
            total += s;
          }
          for (auto& s : scores) s /= total;
          for (std::size_t a = 0; a < in_arcs.size(); ++a)
            for (std::size_t r = 0; r < dk; ++r)
              concat[k * dk + r] += scores[a] * values[a][k * dk + r];
        }
        messages[i] = matvec(layer.w_m, concat);
      }

      Mat x_next(n, Vec(d)), h_next(n, Vec(d));
      for (int i = 0; i < n; ++i) {
        Vec sum1(d);
        for (std::size_t j = 0; j < d; ++j) sum1[j] = x[i][j] + messages[i][j];
        const Vec u1 = layer_norm_row(sum1, layer.norm1_gamma, layer.norm1_beta);
        Vec f1 = matvec(layer.ffn_w1, u1);
        for (std::size_t j = 0; j < f1.size(); ++j)
          f1[j] = naive_gelu(f1[j] + layer.ffn_b1.data()[j]);
        Vec f2 = matvec(layer.ffn_w2, f1);
        Vec sum2(d);
        for (std::size_t j = 0; j < d; ++j)
          sum2[j] = u1[j] + f2[j] + layer.ffn_b2.data()[j];
        const Vec m = layer_norm_row(sum2, layer.norm2_gamma, layer.norm2_beta);

        const Vec mr = matvec(layer.gru_w_mr, m), xr = matvec(layer.gru_w_xr, h[i]);
        const Vec mu = matvec(layer.gru_w_mu, m), xu = matvec(layer.gru_w_xu, h[i]);
        const Vec in = matvec(layer.gru_w_in, m), hn = matvec(layer.gru_w_hn, h[i]);
        for (std::size_t j = 0; j < d; ++j) {
          const double r = 1.0 / (1.0 + std::exp(-(mr[j] + layer.gru_b_mr.data()[j] +
                                                    xr[j] + layer.gru_b_hr.data()[j])));
          const double u = 1.0 / (1.0 + std::exp(-(mu[j] + layer.gru_b_mu.data()[j] +
                                                    xu[j] + layer.gru_b_hu.data()[j])));
          const double c = std::tanh(in[j] + layer.gru_b_in.data()[j] +
                                     r * (hn[j] + layer.gru_b_hn.data()[j]));
          const double base = config.gru_standard_blend ? h[i][j] : x[i][j];
          h_next[i][j] = (1.0 - u) * base + u * c;
          x_next[i][j] = h_next[i][j];
        }
      }
      x = std::move(x_next);
      h = std::move(h_next);
    }
  }
  return x;
}

}  // namespace mpg::testsupport
