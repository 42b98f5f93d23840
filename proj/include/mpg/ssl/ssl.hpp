// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mpg/molgnet/molgnet.hpp"
#include "mpg/numcore/adam.hpp"

#include <functional>
#include <optional>

namespace mpg::ssl {

class TooSmallError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class EmptyMaskError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Molecule fragment with provenance back to its source molecule.
struct Fragment {
  chem::MolGraph graph;
  std::vector<int> source_atoms;  // original atom indexes, in order
  int source_id = -1;             // corpus index of the source molecule
};

struct SubgraphPair {
  Fragment left;
  Fragment right;
  int label = 1;  // 1 = homologous, 0 = negative sample
};

/// Splits by a border index drawn uniformly from [ceil(n/3), floor(2n/3)]:
/// left keeps atoms [0, border), right keeps [border, n); bonds crossing the
/// border are severed. Atom/bond features are carried over untouched.
std::pair<Fragment, Fragment> decompose(const chem::MolGraph& graph, Rng& rng,
                                        int source_id = -1);

/// Decomposes molecule `index`; with probability 1/2 swaps the right fragment
/// for one side (chosen uniformly) of another, uniformly drawn molecule.
/// Every molecule in `corpus` must be decomposable (>= 3 atoms).
SubgraphPair make_psd_sample(const std::vector<chem::MolGraph>& corpus, std::size_t index,
                             Rng& rng);

/// One stitched graph: left fragment under seg1, right under seg2, one
/// collection node fed by every ordinary node.
molgnet::BatchedGraph stitch(const SubgraphPair& pair, const chem::FeatureVocab& vocab);

struct MaskResult {
  std::vector<int> positions;  // node indexes within the batch
  std::vector<int> targets;    // original element-field values
};

/// Overwrites the element feature of ceil(mask_rate * n_real) ordinary atoms
/// per graph (at least one) with the MASK index; collection nodes are never
/// chosen. Returns positions and the pre-mask element values.
MaskResult apply_attr_mask(molgnet::BatchedGraph& batch, double mask_rate, Rng& rng,
                           const chem::FeatureVocab& vocab);

struct PretrainSample {
  molgnet::BatchedGraph batch;
  int psd_label = 1;
  MaskResult mask;
};

PretrainSample make_pretrain_sample(const std::vector<chem::MolGraph>& corpus,
                                    std::size_t index, double mask_rate, Rng& rng,
                                    const chem::FeatureVocab& vocab);

/// Two-layer feed-forward head (d -> d -> 1, GELU between) over collection
/// embeddings.
struct PsdHead {
  nc::Tensor w1, b1, w2, b2;
  static PsdHead init(int hidden, Rng& rng);
  std::vector<std::pair<std::string, nc::Tensor>> named() const;
  nc::Tensor logits(const nc::Tensor& collect) const;  // graphs x 1
};

/// Linear head from node state to element-class logits.
struct MaskHead {
  nc::Tensor w, b;
  static MaskHead init(int hidden, int element_classes, Rng& rng);
  std::vector<std::pair<std::string, nc::Tensor>> named() const;
};

struct PsdLossOut {
  nc::Tensor loss;
  std::vector<double> probabilities;
};

/// Mean binary cross-entropy of the PSD logits against the labels.
PsdLossOut psd_loss(const nc::Tensor& collection_vectors, const std::vector<int>& labels,
                    const PsdHead& head);

struct MaskLossOut {
  nc::Tensor loss;
  double accuracy = 0.0;
};

/// Mean categorical cross-entropy at the masked positions.
MaskLossOut mask_loss(const nc::Tensor& node_states, const std::vector<int>& positions,
                      const std::vector<int>& targets, const MaskHead& head);

struct StepMetrics {
  double psd_loss = 0.0;
  double mask_loss = 0.0;
  double psd_accuracy = 0.0;
  double mask_accuracy = 0.0;
};

/// Forward over the merged batch, joint loss psd + lambda * mask, one
/// optimizer step.
StepMetrics joint_pretrain_step(const std::vector<PretrainSample>& samples,
                                molgnet::MolGNetParams& params, PsdHead& psd_head,
                                MaskHead& mask_head, const molgnet::MolGNetConfig& config,
                                nc::Adam& optimizer, double lambda);

/// Loss and accuracies without touching parameters (held-out evaluation).
StepMetrics evaluate_samples(const std::vector<PretrainSample>& samples,
                             const molgnet::MolGNetParams& params, const PsdHead& psd_head,
                             const MaskHead& mask_head, const molgnet::MolGNetConfig& config,
                             double lambda);

struct PretrainOptions {
  int steps = 300;
  int batch_size = 32;
  double mask_rate = 0.15;
  double lambda = 1.0;
  std::uint64_t seed = 7;
  double holdout_fraction = 0.1;
  int holdout_samples = 256;
  nc::AdamConfig adam = {1e-3, 0.9, 0.999, 1e-8};
  int checkpoint_every = 100;
};

struct PretrainMetricsRow {
  int step = 0;
  StepMetrics train;
};

struct PretrainResult {
  StepMetrics held_out;
  std::vector<PretrainMetricsRow> history;
};

/**
 * Joint PSD + AttrMasking pre-training over a parsed corpus. Molecules with
 * fewer than three atoms are skipped. A seeded fraction is held out and
 * evaluated at the end; `on_metrics` sees every step, `on_checkpoint` fires
 * every `checkpoint_every` steps and once at the end.
 */
PretrainResult pretrain(const std::vector<chem::MolGraph>& corpus,
                        molgnet::MolGNetParams& params, PsdHead& psd_head,
                        MaskHead& mask_head, const molgnet::MolGNetConfig& config,
                        const PretrainOptions& options,
                        const std::function<void(const PretrainMetricsRow&)>& on_metrics = {},
                        const std::function<void(int step)>& on_checkpoint = {});

}  // namespace mpg::ssl
