// SPDX-License-Identifier: Apache-2.0
#include "mpg/molgnet/molgnet.hpp"

#include <cmath>

namespace mpg::molgnet {

namespace nc = mpg::nc;

EmbedOut embed_inputs(const BatchedGraph& batch, const MolGNetParams& params,
                      const MolGNetConfig& config) {
  const int n = batch.n_nodes();
  const int m = batch.n_arcs();

  std::vector<int> node_field_idx;
  std::vector<int> node_owner;
  node_field_idx.reserve(n * chem::kAtomFields);
  node_owner.reserve(n * chem::kAtomFields);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < chem::kAtomFields; ++f) {
      node_field_idx.push_back(batch.node_feats[i][f]);
      node_owner.push_back(i);
    }
  nc::Tensor feature_sum = nc::segment_sum(
      nc::embedding_lookup(params.atom_embed, node_field_idx), node_owner, n);
  nc::Tensor x0 = nc::add(feature_sum, nc::embedding_lookup(params.segment_embed, batch.node_seg));

  std::vector<int> bond_field_idx, bond_owner;
  std::vector<int> virtual_idx, virtual_owner;
  std::vector<int> arc_seg(m);
  for (int a = 0; a < m; ++a) {
    const Arc& arc = batch.arcs[a];
    arc_seg[a] = arc.seg;
    if (arc.is_virtual) {
      virtual_idx.push_back(0);
      virtual_owner.push_back(a);
    } else {
      for (int f = 0; f < chem::kBondFields; ++f) {
        bond_field_idx.push_back(arc.bond[f]);
        bond_owner.push_back(a);
      }
    }
  }
  nc::Tensor e = nc::embedding_lookup(params.segment_embed, arc_seg);
  if (!bond_field_idx.empty())
    e = nc::add(e, nc::segment_sum(nc::embedding_lookup(params.bond_embed, bond_field_idx),
                                   bond_owner, m));
  if (!virtual_idx.empty())
    e = nc::add(e, nc::segment_sum(nc::embedding_lookup(params.virtual_edge, virtual_idx),
                                   virtual_owner, m));
  (void)config;
  return {std::move(x0), std::move(e)};
}

AttentionOut neighbor_attention(const nc::Tensor& x, const nc::Tensor& e,
                                const BatchedGraph& batch, const LayerParams& layer,
                                const MolGNetConfig& config) {
  const int n = batch.n_nodes();
  std::vector<int> src(batch.n_arcs()), dst(batch.n_arcs());
  std::vector<int> indegree(n, 0);
  for (int a = 0; a < batch.n_arcs(); ++a) {
    src[a] = batch.arcs[a].src;
    dst[a] = batch.arcs[a].dst;
    ++indegree[dst[a]];
  }
  for (int i = 0; i < n; ++i) {
    if (indegree[i] > 0 || batch.is_collect(i)) continue;
    // A lone node is tolerable once a collection node anchors its graph;
    // without one there is nothing for it to attend to.
    if (batch.collect_node[batch.node_graph[i]] < 0)
      throw IsolatedNodeError("node " + std::to_string(i) + " has no neighbors");
  }

  const auto heads = static_cast<std::size_t>(config.heads);
  nc::Tensor neighbor_info = nc::add(nc::gather_rows(x, src), e);  // I_j = x_j + e_ij
  nc::Tensor q = nc::linear(x, layer.w_q);
  nc::Tensor k = nc::linear(neighbor_info, layer.w_k);
  nc::Tensor v = nc::linear(neighbor_info, layer.w_v);
  nc::Tensor scores = nc::scale(nc::headwise_dot(nc::gather_rows(q, dst), k, heads),
                                1.0 / std::sqrt(static_cast<double>(config.head_dim())));
  nc::Tensor attn = nc::segment_softmax(scores, dst, n);
  nc::Tensor summed = nc::segment_sum(nc::scale_heads(v, attn, heads), dst, n);
  nc::Tensor messages = nc::linear(summed, layer.w_m);
  return {std::move(messages), attn.detach()};
}

StepOut message_passing_step(const nc::Tensor& x, const nc::Tensor& h, const nc::Tensor& e,
                             const BatchedGraph& batch, const LayerParams& layer,
                             const MolGNetConfig& config) {
  AttentionOut attn = neighbor_attention(x, e, batch, layer, config);
  nc::Tensor u1 = nc::layer_norm(nc::add(x, attn.messages), layer.norm1_gamma, layer.norm1_beta);
  nc::Tensor ffn = nc::linear(nc::gelu(nc::linear(u1, layer.ffn_w1, &layer.ffn_b1)),
                              layer.ffn_w2, &layer.ffn_b2);
  nc::Tensor m = nc::layer_norm(nc::add(u1, ffn), layer.norm2_gamma, layer.norm2_beta);

  nc::Tensor reset = nc::sigmoid(nc::add(nc::linear(m, layer.gru_w_mr, &layer.gru_b_mr),
                                         nc::linear(h, layer.gru_w_xr, &layer.gru_b_hr)));
  nc::Tensor update = nc::sigmoid(nc::add(nc::linear(m, layer.gru_w_mu, &layer.gru_b_mu),
                                          nc::linear(h, layer.gru_w_xu, &layer.gru_b_hu)));
  nc::Tensor candidate =
      nc::tanh(nc::add(nc::linear(m, layer.gru_w_in, &layer.gru_b_in),
                       nc::mul(reset, nc::linear(h, layer.gru_w_hn, &layer.gru_b_hn))));
  // The default blend mixes the candidate with the previous node state;
  // the standard GRU variant mixes with the previous hidden state.
  const nc::Tensor& base = config.gru_standard_blend ? h : x;
  nc::Tensor h_next =
      nc::add(nc::sub(base, nc::mul(update, base)), nc::mul(update, candidate));
  return {h_next, h_next, std::move(attn.scores)};
}

ForwardOut forward(const BatchedGraph& batch, const MolGNetParams& params,
                   const MolGNetConfig& config) {
  config.validate();
  if (static_cast<int>(params.layers.size()) != config.n_layers)
    throw nc::ShapeError("forward: layer count differs from config");
  EmbedOut embedded = embed_inputs(batch, params, config);
  ForwardOut out;
  nc::Tensor x = embedded.x0;
  nc::Tensor h = embedded.x0;  // h^0 is the atom representation
  for (int l = 0; l < config.n_layers; ++l) {
    if (!config.gru_persistent_hidden) h = x;  // hidden resets at layer entry
    for (int t = 0; t < config.steps_per_layer; ++t) {
      StepOut step = message_passing_step(x, h, embedded.e, batch, params.layers[l], config);
      x = step.x;
      h = step.h;
      out.attention.push_back(std::move(step.attn));
    }
  }
  out.node_states = std::move(x);
  return out;
}

nc::Tensor collection_embedding(const BatchedGraph& batch, const nc::Tensor& node_states) {
  std::vector<int> collect(batch.n_graphs);
  for (int g = 0; g < batch.n_graphs; ++g) {
    if (batch.collect_node[g] < 0)
      throw StructureError("graph " + std::to_string(g) + " has no collection node");
    collect[g] = batch.collect_node[g];
  }
  return nc::gather_rows(node_states, collect);
}

nc::Tensor mean_node_embedding(const BatchedGraph& batch, const nc::Tensor& node_states) {
  std::vector<int> ordinary;
  std::vector<int> graph_of;
  std::vector<double> counts(batch.n_graphs, 0.0);
  for (int i = 0; i < batch.n_nodes(); ++i) {
    if (batch.is_collect(i)) continue;
    ordinary.push_back(i);
    graph_of.push_back(batch.node_graph[i]);
    counts[batch.node_graph[i]] += 1.0;
  }
  nc::Tensor sums = nc::segment_sum(nc::gather_rows(node_states, ordinary), graph_of,
                                    batch.n_graphs);
  const std::size_t d = node_states.row_size();
  std::vector<double> recip(batch.n_graphs * d);
  for (int g = 0; g < batch.n_graphs; ++g)
    for (std::size_t j = 0; j < d; ++j) recip[g * d + j] = 1.0 / counts[g];
  return nc::mul(sums, nc::Tensor::from({static_cast<std::size_t>(batch.n_graphs), d},
                                        std::move(recip)));
}

std::vector<std::vector<double>> collection_attention_weights(const ForwardOut& out,
                                                              const BatchedGraph& batch) {
  if (out.attention.empty()) throw StructureError("forward retained no attention");
  const nc::Tensor& last = out.attention.back();
  const std::size_t heads = last.row_size();
  std::vector<std::vector<double>> weights(batch.n_graphs);
  for (int g = 0; g < batch.n_graphs; ++g)
    if (batch.collect_node[g] < 0)
      throw StructureError("graph " + std::to_string(g) + " has no collection node");
  for (int a = 0; a < batch.n_arcs(); ++a) {
    const Arc& arc = batch.arcs[a];
    if (!arc.is_virtual) continue;
    double mean = 0.0;
    for (std::size_t hh = 0; hh < heads; ++hh) mean += last.at(a, hh);
    weights[batch.node_graph[arc.src]].push_back(mean / static_cast<double>(heads));
  }
  for (auto& w : weights) {
    double total = 0.0;
    for (double v : w) total += v;
    for (double& v : w) v /= total;
  }
  return weights;
}

}  // namespace mpg::molgnet
