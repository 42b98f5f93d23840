// SPDX-License-Identifier: Apache-2.0
#include "mpg/ssl/ssl.hpp"

#include <algorithm>
#include <cmath>

namespace mpg::ssl {

namespace {

// Induced subgraph on atoms [from, to). Atom records and surviving bond
// records are copied verbatim (features describe the source chemistry);
// bonds with one endpoint outside the range are severed.
Fragment induced_fragment(const chem::MolGraph& graph, int from, int to, int source_id) {
  Fragment frag;
  frag.source_id = source_id;
  frag.graph.source = graph.source;
  for (int i = from; i < to; ++i) {
    frag.graph.atoms.push_back(graph.atoms[i]);
    frag.graph.adjacency.emplace_back();
    frag.source_atoms.push_back(i);
  }
  for (const auto& bond : graph.bonds) {
    if (bond.a < from || bond.a >= to || bond.b < from || bond.b >= to) continue;
    const int index = frag.graph.bond_count();
    chem::BondRecord copy = bond;
    copy.a = bond.a - from;
    copy.b = bond.b - from;
    frag.graph.bonds.push_back(copy);
    frag.graph.adjacency[copy.a].emplace_back(copy.b, index);
    frag.graph.adjacency[copy.b].emplace_back(copy.a, index);
  }
  return frag;
}

}  // namespace

std::pair<Fragment, Fragment> decompose(const chem::MolGraph& graph, Rng& rng,
                                        int source_id) {
  const int n = graph.atom_count();
  if (n < 3)
    throw TooSmallError("decompose needs at least 3 atoms, got " + std::to_string(n));
  const int lo = (n + 2) / 3;       // ceil(n/3)
  const int hi = (2 * n) / 3;       // floor(2n/3)
  const int border = static_cast<int>(rng.range(lo, hi));
  return {induced_fragment(graph, 0, border, source_id),
          induced_fragment(graph, border, n, source_id)};
}

SubgraphPair make_psd_sample(const std::vector<chem::MolGraph>& corpus, std::size_t index,
                             Rng& rng) {
  if (corpus.size() < 2)
    throw TooSmallError("PSD corpus needs at least 2 decomposable molecules");
  auto [left, right] = decompose(corpus[index], rng, static_cast<int>(index));
  SubgraphPair pair{std::move(left), std::move(right), 1};
  if (rng.uniform() < 0.5) {
    std::size_t other = rng.below(corpus.size() - 1);
    if (other >= index) ++other;
    auto [other_left, other_right] = decompose(corpus[other], rng, static_cast<int>(other));
    pair.right = (rng.below(2) == 0) ? std::move(other_left) : std::move(other_right);
    pair.label = 0;
  }
  return pair;
}

molgnet::BatchedGraph stitch(const SubgraphPair& pair, const chem::FeatureVocab& vocab) {
  if (pair.left.graph.atoms.empty() || pair.right.graph.atoms.empty())
    throw TooSmallError("stitch requires non-empty fragments");
  molgnet::BatchBuilder builder(vocab);
  builder.begin_graph();
  builder.add_fragment(pair.left.graph, molgnet::kSeg1);
  builder.add_fragment(pair.right.graph, molgnet::kSeg2);
  builder.add_collection_node();
  return builder.finish();
}

MaskResult apply_attr_mask(molgnet::BatchedGraph& batch, double mask_rate, Rng& rng,
                           const chem::FeatureVocab& vocab) {
  if (mask_rate <= 0.0 || mask_rate >= 1.0)
    throw nc::ShapeError("mask rate must lie in (0, 1)");
  const int mask_index = vocab.atom_offsets[0] + chem::element_index(chem::Element::Mask);
  MaskResult result;
  for (int g = 0; g < batch.n_graphs; ++g) {
    std::vector<int> candidates;
    for (int i = 0; i < batch.n_nodes(); ++i)
      if (batch.node_graph[i] == g && !batch.is_collect(i)) candidates.push_back(i);
    if (candidates.empty()) continue;
    const auto want = static_cast<std::size_t>(
        std::max(1.0, std::ceil(mask_rate * static_cast<double>(candidates.size()))));
    rng.shuffle(candidates);
    for (std::size_t k = 0; k < want && k < candidates.size(); ++k) {
      const int node = candidates[k];
      result.positions.push_back(node);
      result.targets.push_back(batch.node_feats[node][0] - vocab.atom_offsets[0]);
      batch.node_feats[node][0] = mask_index;
    }
  }
  return result;
}

PretrainSample make_pretrain_sample(const std::vector<chem::MolGraph>& corpus,
                                    std::size_t index, double mask_rate, Rng& rng,
                                    const chem::FeatureVocab& vocab) {
  PretrainSample sample;
  SubgraphPair pair = make_psd_sample(corpus, index, rng);
  sample.psd_label = pair.label;
  sample.batch = stitch(pair, vocab);
  sample.mask = apply_attr_mask(sample.batch, mask_rate, rng, vocab);
  return sample;
}

PsdHead PsdHead::init(int hidden, Rng& rng) {
  PsdHead head;
  head.w1 = molgnet::init_weight(hidden, hidden, rng);
  head.b1 = molgnet::init_bias(hidden);
  head.w2 = molgnet::init_weight(1, hidden, rng);
  head.b2 = molgnet::init_bias(1);
  return head;
}

std::vector<std::pair<std::string, nc::Tensor>> PsdHead::named() const {
  return {{"psd_head.w_1", w1}, {"psd_head.b_1", b1}, {"psd_head.w_2", w2}, {"psd_head.b_2", b2}};
}

nc::Tensor PsdHead::logits(const nc::Tensor& collect) const {
  return nc::linear(nc::gelu(nc::linear(collect, w1, &b1)), w2, &b2);
}

MaskHead MaskHead::init(int hidden, int element_classes, Rng& rng) {
  MaskHead head;
  head.w = molgnet::init_weight(element_classes, hidden, rng);
  head.b = molgnet::init_bias(element_classes);
  return head;
}

std::vector<std::pair<std::string, nc::Tensor>> MaskHead::named() const {
  return {{"mask_head.w", w}, {"mask_head.b", b}};
}

PsdLossOut psd_loss(const nc::Tensor& collection_vectors, const std::vector<int>& labels,
                    const PsdHead& head) {
  if (collection_vectors.rows() != labels.size())
    throw nc::ShapeError("psd_loss: one label per collection vector");
  nc::Tensor logits = head.logits(collection_vectors);
  std::vector<double> targets(labels.begin(), labels.end());
  PsdLossOut out;
  out.loss = nc::cross_entropy_logits(logits, targets);
  out.probabilities.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.probabilities.push_back(nc::sigmoid_value(logits.at(i)));
  return out;
}

MaskLossOut mask_loss(const nc::Tensor& node_states, const std::vector<int>& positions,
                      const std::vector<int>& targets, const MaskHead& head) {
  if (positions.empty()) throw EmptyMaskError("mask_loss: no masked positions");
  if (positions.size() != targets.size())
    throw nc::ShapeError("mask_loss: positions/targets length mismatch");
  nc::Tensor logits = nc::linear(nc::gather_rows(node_states, positions), head.w, &head.b);
  MaskLossOut out;
  out.loss = nc::cross_entropy_logits(logits, targets);
  const std::size_t classes = logits.row_size();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c)
      if (logits.at(i, c) > logits.at(i, best)) best = c;
    if (static_cast<int>(best) == targets[i]) ++hits;
  }
  out.accuracy = static_cast<double>(hits) / static_cast<double>(targets.size());
  return out;
}

namespace {

struct MergedBatch {
  molgnet::BatchedGraph batch;
  std::vector<int> labels;
  std::vector<int> mask_positions;
  std::vector<int> mask_targets;
};

MergedBatch merge_samples(const std::vector<PretrainSample>& samples) {
  MergedBatch merged;
  std::vector<const molgnet::BatchedGraph*> parts;
  parts.reserve(samples.size());
  int node_offset = 0;
  for (const auto& sample : samples) {
    parts.push_back(&sample.batch);
    merged.labels.push_back(sample.psd_label);
    for (std::size_t i = 0; i < sample.mask.positions.size(); ++i) {
      merged.mask_positions.push_back(sample.mask.positions[i] + node_offset);
      merged.mask_targets.push_back(sample.mask.targets[i]);
    }
    node_offset += sample.batch.n_nodes();
  }
  merged.batch = molgnet::merge_batches(parts);
  return merged;
}

StepMetrics run_batch(const MergedBatch& merged, const molgnet::MolGNetParams& params,
                      const PsdHead& psd_head, const MaskHead& mask_head,
                      const molgnet::MolGNetConfig& config, double lambda,
                      nc::Tensor* total_loss) {
  molgnet::ForwardOut out = molgnet::forward(merged.batch, params, config);
  nc::Tensor collect = molgnet::collection_embedding(merged.batch, out.node_states);
  PsdLossOut psd = psd_loss(collect, merged.labels, psd_head);
  MaskLossOut mask = mask_loss(out.node_states, merged.mask_positions, merged.mask_targets,
                               mask_head);
  StepMetrics metrics;
  metrics.psd_loss = psd.loss.value();
  metrics.mask_loss = mask.loss.value();
  metrics.mask_accuracy = mask.accuracy;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < merged.labels.size(); ++i)
    if ((psd.probabilities[i] >= 0.5) == (merged.labels[i] == 1)) ++hits;
  metrics.psd_accuracy = static_cast<double>(hits) / static_cast<double>(merged.labels.size());
  if (total_loss)
    *total_loss = lambda == 0.0 ? psd.loss : nc::add(psd.loss, nc::scale(mask.loss, lambda));
  return metrics;
}

}  // namespace

StepMetrics joint_pretrain_step(const std::vector<PretrainSample>& samples,
                                molgnet::MolGNetParams& params, PsdHead& psd_head,
                                MaskHead& mask_head, const molgnet::MolGNetConfig& config,
                                nc::Adam& optimizer, double lambda) {
  if (samples.empty()) throw nc::ShapeError("joint_pretrain_step: empty batch");
  MergedBatch merged = merge_samples(samples);
  nc::Tensor total;
  StepMetrics metrics;
  {
    nc::Tape tape;
    metrics = run_batch(merged, params, psd_head, mask_head, config, lambda, &total);
    tape.backward(total);
  }
  optimizer.step();
  optimizer.zero_grad();
  return metrics;
}

StepMetrics evaluate_samples(const std::vector<PretrainSample>& samples,
                             const molgnet::MolGNetParams& params, const PsdHead& psd_head,
                             const MaskHead& mask_head, const molgnet::MolGNetConfig& config,
                             double lambda) {
  if (samples.empty()) throw nc::ShapeError("evaluate_samples: empty batch");
  MergedBatch merged = merge_samples(samples);
  return run_batch(merged, params, psd_head, mask_head, config, lambda, nullptr);
}

}  // namespace mpg::ssl
