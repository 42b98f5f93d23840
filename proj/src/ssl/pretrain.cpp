// SPDX-License-Identifier: Apache-2.0
#include "mpg/ssl/ssl.hpp"

namespace mpg::ssl {

PretrainResult pretrain(const std::vector<chem::MolGraph>& corpus,
                        molgnet::MolGNetParams& params, PsdHead& psd_head,
                        MaskHead& mask_head, const molgnet::MolGNetConfig& config,
                        const PretrainOptions& options,
                        const std::function<void(const PretrainMetricsRow&)>& on_metrics,
                        const std::function<void(int step)>& on_checkpoint) {
  const auto& vocab = chem::FeatureVocab::standard();
  std::vector<chem::MolGraph> usable;
  for (const auto& mol : corpus)
    if (mol.atom_count() >= 3) usable.push_back(mol);
  if (usable.size() < 4)
    throw TooSmallError("pretraining corpus too small after filtering");

  // seeded holdout split
  Rng split_rng = Rng(options.seed).fork(1);
  std::vector<std::size_t> order(usable.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  split_rng.shuffle(order);
  auto n_holdout = static_cast<std::size_t>(
      static_cast<double>(usable.size()) * options.holdout_fraction);
  n_holdout = std::max<std::size_t>(n_holdout, 2);
  std::vector<chem::MolGraph> holdout, train;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_holdout ? holdout : train).push_back(usable[order[i]]);

  // fixed held-out evaluation set
  Rng eval_rng = Rng(options.seed).fork(2);
  std::vector<PretrainSample> eval_samples;
  for (int i = 0; i < options.holdout_samples; ++i)
    eval_samples.push_back(make_pretrain_sample(
        holdout, eval_rng.below(holdout.size()), options.mask_rate, eval_rng, vocab));

  nc::Adam optimizer(
      [&] {
        std::vector<nc::Tensor> ts = params.all();
        for (auto& [n, t] : psd_head.named()) ts.push_back(t);
        for (auto& [n, t] : mask_head.named()) ts.push_back(t);
        return ts;
      }(),
      options.adam);

  Rng sample_rng = Rng(options.seed).fork(3);
  PretrainResult result;
  for (int step = 1; step <= options.steps; ++step) {
    std::vector<PretrainSample> batch;
    batch.reserve(options.batch_size);
    for (int b = 0; b < options.batch_size; ++b)
      batch.push_back(make_pretrain_sample(train, sample_rng.below(train.size()),
                                           options.mask_rate, sample_rng, vocab));
    PretrainMetricsRow row;
    row.step = step;
    row.train = joint_pretrain_step(batch, params, psd_head, mask_head, config, optimizer,
                                    options.lambda);
    if (on_metrics) on_metrics(row);
    result.history.push_back(row);
    if (on_checkpoint &&
        (step % options.checkpoint_every == 0 || step == options.steps))
      on_checkpoint(step);
  }
  result.held_out =
      evaluate_samples(eval_samples, params, psd_head, mask_head, config, options.lambda);
  return result;
}

}  // namespace mpg::ssl
