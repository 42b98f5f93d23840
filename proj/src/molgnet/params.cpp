// SPDX-License-Identifier: Apache-2.0
#include "mpg/molgnet/molgnet.hpp"

#include <cmath>

namespace mpg::molgnet {

void MolGNetConfig::validate() const {
  if (n_layers < 1 || steps_per_layer < 1)
    throw nc::ShapeError("molgnet config: N and T must be at least 1");
  if (hidden < 1 || heads < 1 || hidden % heads != 0)
    throw nc::ShapeError("molgnet config: hidden must split evenly into heads");
  if (ffn < 1) throw nc::ShapeError("molgnet config: ffn dimension must be positive");
  if (atom_vocab < 1 || bond_vocab < 1 || segments != kSegmentCount)
    throw nc::ShapeError("molgnet config: bad vocabulary sizes");
}

MolGNetConfig MolGNetConfig::full_scale() {
  MolGNetConfig c;
  c.n_layers = 5;
  c.steps_per_layer = 3;
  c.hidden = 768;
  c.ffn = 3072;
  c.heads = 12;
  return c;
}

nc::Tensor init_weight(std::size_t out, std::size_t in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> data(out * in);
  for (auto& v : data) v = rng.uniform(-bound, bound);
  return nc::Tensor::param({out, in}, std::move(data));
}

nc::Tensor init_bias(std::size_t n) {
  return nc::Tensor::param({n}, std::vector<double>(n, 0.0));
}

nc::Tensor init_embedding(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> data(rows * cols);
  for (auto& v : data) v = rng.normal() * 0.02;
  return nc::Tensor::param({rows, cols}, std::move(data));
}

MolGNetParams MolGNetParams::init(const MolGNetConfig& config, Rng& rng) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.hidden);
  const auto dff = static_cast<std::size_t>(config.ffn);
  MolGNetParams p;
  p.atom_embed = init_embedding(config.atom_vocab, d, rng);
  p.bond_embed = init_embedding(config.bond_vocab, d, rng);
  p.segment_embed = init_embedding(kSegmentCount, d, rng);
  p.virtual_edge = init_embedding(1, d, rng);
  p.layers.reserve(config.n_layers);
  for (int l = 0; l < config.n_layers; ++l) {
    LayerParams layer;
    layer.w_q = init_weight(d, d, rng);
    layer.w_k = init_weight(d, d, rng);
    layer.w_v = init_weight(d, d, rng);
    layer.w_m = init_weight(d, d, rng);
    layer.ffn_w1 = init_weight(dff, d, rng);
    layer.ffn_b1 = init_bias(dff);
    layer.ffn_w2 = init_weight(d, dff, rng);
    layer.ffn_b2 = init_bias(d);
    layer.norm1_gamma = nc::Tensor::param({d}, std::vector<double>(d, 1.0));
    layer.norm1_beta = init_bias(d);
    layer.norm2_gamma = nc::Tensor::param({d}, std::vector<double>(d, 1.0));
    layer.norm2_beta = init_bias(d);
    layer.gru_w_mr = init_weight(d, d, rng);
    layer.gru_w_xr = init_weight(d, d, rng);
    layer.gru_w_mu = init_weight(d, d, rng);
    layer.gru_w_xu = init_weight(d, d, rng);
    layer.gru_w_in = init_weight(d, d, rng);
    layer.gru_w_hn = init_weight(d, d, rng);
    layer.gru_b_mr = init_bias(d);
    layer.gru_b_hr = init_bias(d);
    layer.gru_b_mu = init_bias(d);
    layer.gru_b_hu = init_bias(d);
    layer.gru_b_in = init_bias(d);
    layer.gru_b_hn = init_bias(d);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

std::vector<std::pair<std::string, nc::Tensor>> MolGNetParams::named() const {
  std::vector<std::pair<std::string, nc::Tensor>> out;
  out.emplace_back("embed.atom", atom_embed);
  out.emplace_back("embed.bond", bond_embed);
  out.emplace_back("embed.segment", segment_embed);
  out.emplace_back("embed.virtual_edge", virtual_edge);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    out.emplace_back(prefix + "attn.w_q", layer.w_q);
    out.emplace_back(prefix + "attn.w_k", layer.w_k);
    out.emplace_back(prefix + "attn.w_v", layer.w_v);
    out.emplace_back(prefix + "attn.w_m", layer.w_m);
    out.emplace_back(prefix + "ffn.w_1", layer.ffn_w1);
    out.emplace_back(prefix + "ffn.b_1", layer.ffn_b1);
    out.emplace_back(prefix + "ffn.w_2", layer.ffn_w2);
    out.emplace_back(prefix + "ffn.b_2", layer.ffn_b2);
    out.emplace_back(prefix + "norm1.gamma", layer.norm1_gamma);
    out.emplace_back(prefix + "norm1.beta", layer.norm1_beta);
    out.emplace_back(prefix + "norm2.gamma", layer.norm2_gamma);
    out.emplace_back(prefix + "norm2.beta", layer.norm2_beta);
    out.emplace_back(prefix + "gru.w_mr", layer.gru_w_mr);
    out.emplace_back(prefix + "gru.w_xr", layer.gru_w_xr);
    out.emplace_back(prefix + "gru.w_mu", layer.gru_w_mu);
    out.emplace_back(prefix + "gru.w_xu", layer.gru_w_xu);
    out.emplace_back(prefix + "gru.w_in", layer.gru_w_in);
    out.emplace_back(prefix + "gru.w_hn", layer.gru_w_hn);
    out.emplace_back(prefix + "gru.b_mr", layer.gru_b_mr);
    out.emplace_back(prefix + "gru.b_hr", layer.gru_b_hr);
    out.emplace_back(prefix + "gru.b_mu", layer.gru_b_mu);
    out.emplace_back(prefix + "gru.b_hu", layer.gru_b_hu);
    out.emplace_back(prefix + "gru.b_in", layer.gru_b_in);
    out.emplace_back(prefix + "gru.b_hn", layer.gru_b_hn);
  }
  return out;
}

std::vector<nc::Tensor> MolGNetParams::all() const {
  std::vector<nc::Tensor> out;
  for (auto& [name, tensor] : named()) out.push_back(tensor);
  return out;
}

MolGNetParams MolGNetParams::clone() const {
  MolGNetParams copy;
  copy.atom_embed = atom_embed.clone();
  copy.bond_embed = bond_embed.clone();
  copy.segment_embed = segment_embed.clone();
  copy.virtual_edge = virtual_edge.clone();
  copy.layers.reserve(layers.size());
  for (const auto& layer : layers) {
    LayerParams c;
    c.w_q = layer.w_q.clone();
    c.w_k = layer.w_k.clone();
    c.w_v = layer.w_v.clone();
    c.w_m = layer.w_m.clone();
    c.ffn_w1 = layer.ffn_w1.clone();
    c.ffn_b1 = layer.ffn_b1.clone();
    c.ffn_w2 = layer.ffn_w2.clone();
    c.ffn_b2 = layer.ffn_b2.clone();
    c.norm1_gamma = layer.norm1_gamma.clone();
    c.norm1_beta = layer.norm1_beta.clone();
    c.norm2_gamma = layer.norm2_gamma.clone();
    c.norm2_beta = layer.norm2_beta.clone();
    c.gru_w_mr = layer.gru_w_mr.clone();
    c.gru_w_xr = layer.gru_w_xr.clone();
    c.gru_w_mu = layer.gru_w_mu.clone();
    c.gru_w_xu = layer.gru_w_xu.clone();
    c.gru_w_in = layer.gru_w_in.clone();
    c.gru_w_hn = layer.gru_w_hn.clone();
    c.gru_b_mr = layer.gru_b_mr.clone();
    c.gru_b_hr = layer.gru_b_hr.clone();
    c.gru_b_mu = layer.gru_b_mu.clone();
    c.gru_b_hu = layer.gru_b_hu.clone();
    c.gru_b_in = layer.gru_b_in.clone();
    c.gru_b_hn = layer.gru_b_hn.clone();
    copy.layers.push_back(std::move(c));
  }
  return copy;
}

}  // namespace mpg::molgnet
