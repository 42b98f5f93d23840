// SPDX-License-Identifier: Apache-2.0
#include "mpg/tasks/tasks.hpp"

namespace mpg::tasks {

std::vector<std::vector<double>> embed_molecules(const std::vector<chem::MolGraph>& mols,
                                                 const molgnet::MolGNetParams& params,
                                                 const molgnet::MolGNetConfig& config) {
  const auto& vocab = chem::FeatureVocab::standard();
  std::vector<std::vector<double>> embeddings;
  embeddings.reserve(mols.size());
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < mols.size(); start += kChunk) {
    std::vector<molgnet::BatchedGraph> parts;
    std::vector<const molgnet::BatchedGraph*> part_ptrs;
    for (std::size_t i = start; i < std::min(mols.size(), start + kChunk); ++i)
      parts.push_back(assemble_single(mols[i], vocab));
    for (const auto& p : parts) part_ptrs.push_back(&p);
    molgnet::BatchedGraph merged = molgnet::merge_batches(part_ptrs);
    molgnet::ForwardOut out = molgnet::forward(merged, params, config);
    nc::Tensor collect = molgnet::collection_embedding(merged, out.node_states);
    const std::size_t d = collect.row_size();
    for (std::size_t g = 0; g < collect.rows(); ++g) {
      std::vector<double> row(d);
      for (std::size_t j = 0; j < d; ++j) row[j] = collect.at(g, j);
      embeddings.push_back(std::move(row));
    }
  }
  return embeddings;
}

ValiditySeparation validity_separation_experiment(
    const std::vector<chem::MolGraph>& corpus, const molgnet::MolGNetParams& untrained,
    const molgnet::MolGNetParams& pretrained, const molgnet::MolGNetConfig& config,
    std::uint64_t shuffle_seed) {
  if (corpus.size() < 100)
    throw DegenerateError("validity separation needs at least 100 molecules");
  std::vector<chem::MolGraph> all = corpus;
  std::vector<int> cluster(corpus.size(), 0);
  Rng rng(shuffle_seed);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    all.push_back(chem::shuffle_atom_features(corpus[i], rng.next_u64()));
    cluster.push_back(1);
  }
  ValiditySeparation result;
  result.db_untrained = davies_bouldin(embed_molecules(all, untrained, config), cluster);
  result.db_pretrained = davies_bouldin(embed_molecules(all, pretrained, config), cluster);
  return result;
}

}  // namespace mpg::tasks
