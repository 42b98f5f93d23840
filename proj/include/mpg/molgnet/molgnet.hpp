// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mpg/chem/featurize.hpp"
#include "mpg/numcore/ops.hpp"
#include "mpg/rng.hpp"

#include <string>
#include <vector>

namespace mpg::molgnet {

class IsolatedNodeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class StructureError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Segment roles for two-graph input.
enum Segment : int { kSeg1 = 0, kSeg2 = 1, kSegCollect = 2 };
inline constexpr int kSegmentCount = 3;

/**
 * Architecture hyperparameters. Every layer runs `steps_per_layer` shared
 * message-passing steps; all sub-layer outputs have dimension `hidden`.
 *
 * The default GRU blend mixes the update-gated candidate with the previous
 * *node* state. `gru_standard_blend` switches to the textbook form that
 * mixes with the previous hidden state instead, and
 * `gru_persistent_hidden` carries the hidden state across layers instead of
 * resetting it to the layer-entry node state.
 */
struct MolGNetConfig {
  int n_layers = 3;
  int steps_per_layer = 2;
  int hidden = 64;
  int ffn = 256;  // 4 * hidden unless overridden
  int heads = 4;
  int atom_vocab = chem::FeatureVocab::standard().atom_vocab_size;
  int bond_vocab = chem::FeatureVocab::standard().bond_vocab_size;
  int segments = kSegmentCount;
  bool gru_standard_blend = false;
  bool gru_persistent_hidden = false;

  int head_dim() const { return hidden / heads; }
  void validate() const;

  /// Full-size configuration: N=5, T=3, d=768, d_ff=3072, 12 heads.
  static MolGNetConfig full_scale();

  bool operator==(const MolGNetConfig&) const = default;
};

struct LayerParams {
  nc::Tensor w_q, w_k, w_v, w_m;
  nc::Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  nc::Tensor norm1_gamma, norm1_beta, norm2_gamma, norm2_beta;
  nc::Tensor gru_w_mr, gru_w_xr, gru_w_mu, gru_w_xu, gru_w_in, gru_w_hn;
  nc::Tensor gru_b_mr, gru_b_hr, gru_b_mu, gru_b_hu, gru_b_in, gru_b_hn;
};

struct MolGNetParams {
  nc::Tensor atom_embed;     // atom_vocab x d
  nc::Tensor bond_embed;     // bond_vocab x d
  nc::Tensor segment_embed;  // 3 x d
  nc::Tensor virtual_edge;   // 1 x d
  std::vector<LayerParams> layers;

  static MolGNetParams init(const MolGNetConfig& config, Rng& rng);

  /// Stable checkpoint naming: "embed.atom", "layer0.attn.w_q", ...
  std::vector<std::pair<std::string, nc::Tensor>> named() const;
  std::vector<nc::Tensor> all() const;
  MolGNetParams clone() const;
};

/// Uniform Xavier bounds for weight matrices, biases zero, embeddings
/// normal(0, 0.02), norm gammas one.
nc::Tensor init_weight(std::size_t out, std::size_t in, Rng& rng);
nc::Tensor init_bias(std::size_t n);
nc::Tensor init_embedding(std::size_t rows, std::size_t cols, Rng& rng);

/// One directed arc of the stitched graph. Real arcs carry bond feature
/// indices; virtual arcs point at a collection node.
struct Arc {
  int src = 0;
  int dst = 0;
  int seg = kSeg1;
  bool is_virtual = false;
  chem::BondIndices bond = {0, 0};
};

/**
 * One or more molecules stitched into a single disjoint union for the model.
 * Per graph there is at most one collection node, receiving a virtual arc
 * from every ordinary node of its graph and emitting none.
 */
struct BatchedGraph {
  std::vector<chem::AtomIndices> node_feats;
  std::vector<int> node_seg;
  std::vector<int> node_graph;
  std::vector<Arc> arcs;
  std::vector<int> collect_node;  // per graph, -1 when absent
  int n_graphs = 0;

  int n_nodes() const { return static_cast<int>(node_feats.size()); }
  int n_arcs() const { return static_cast<int>(arcs.size()); }
  bool is_collect(int node) const { return node_seg[node] == kSegCollect; }

  /// Structural invariants: arc endpoints valid, every ordinary node of a
  /// collected graph feeds its collection node, no arc leaves a collection
  /// node. Throws StructureError.
  void validate() const;
};

/// Appends one molecule (or fragment) under the given segment; returns the
/// index of its first node. The graph must already exist via begin_graph().
class BatchBuilder {
public:
  explicit BatchBuilder(const chem::FeatureVocab& vocab) : vocab_(&vocab) {}

  void begin_graph();
  int add_fragment(const chem::MolGraph& fragment, int segment);
  /// Adds the collection node for the current graph and the virtual arcs
  /// from every node added to this graph so far.
  void add_collection_node();
  BatchedGraph finish();

private:
  const chem::FeatureVocab* vocab_;
  BatchedGraph batch_;
  int graph_first_node_ = 0;
  bool in_graph_ = false;
};

/// Disjoint union of single-graph batches, renumbering nodes and graphs.
BatchedGraph merge_batches(const std::vector<const BatchedGraph*>& parts);

struct EmbedOut {
  nc::Tensor x0;  // nodes x d
  nc::Tensor e;   // arcs x d, fixed across steps and layers
};

/// Input representation: sum of feature embeddings plus segment embedding;
/// virtual arcs use the virtual-edge vector plus the collect segment row.
EmbedOut embed_inputs(const BatchedGraph& batch, const MolGNetParams& params,
                      const MolGNetConfig& config);

struct AttentionOut {
  nc::Tensor messages;  // nodes x d
  nc::Tensor scores;    // arcs x heads, detached copy of the softmax weights
};

/// Scaled dot-product attention of each node over its in-neighbors, neighbor
/// information being neighbor state plus edge state. Nodes with no in-arcs
/// receive a zero message when their graph has a collection node and raise
/// IsolatedNodeError otherwise.
AttentionOut neighbor_attention(const nc::Tensor& x, const nc::Tensor& e,
                                const BatchedGraph& batch, const LayerParams& layer,
                                const MolGNetConfig& config);

struct StepOut {
  nc::Tensor x;
  nc::Tensor h;
  nc::Tensor attn;  // arcs x heads
};

/// One message-passing step: attention and feed-forward sub-layers, each in
/// a residual + layer-norm wrapper, then the GRU vertex update.
StepOut message_passing_step(const nc::Tensor& x, const nc::Tensor& h, const nc::Tensor& e,
                             const BatchedGraph& batch, const LayerParams& layer,
                             const MolGNetConfig& config);

struct ForwardOut {
  nc::Tensor node_states;           // nodes x d
  std::vector<nc::Tensor> attention;  // one arcs x heads tensor per (layer, step)
};

ForwardOut forward(const BatchedGraph& batch, const MolGNetParams& params,
                   const MolGNetConfig& config);

/// Final-layer states of each graph's collection node (graphs x d).
nc::Tensor collection_embedding(const BatchedGraph& batch, const nc::Tensor& node_states);

/// Mean over node states per graph, the alternative graph-level readout.
nc::Tensor mean_node_embedding(const BatchedGraph& batch, const nc::Tensor& node_states);

/// Last-layer, last-step attention into each collection node: head-averaged,
/// renormalized to sum one per graph, in the graph's node order.
std::vector<std::vector<double>> collection_attention_weights(const ForwardOut& out,
                                                              const BatchedGraph& batch);

}  // namespace mpg::molgnet
