// SPDX-License-Identifier: Apache-2.0
#include "mpg/tasks/tasks.hpp"

namespace mpg::tasks {

molgnet::BatchedGraph assemble_single(const chem::MolGraph& mol,
                                      const chem::FeatureVocab& vocab) {
  molgnet::BatchBuilder builder(vocab);
  builder.begin_graph();
  builder.add_fragment(mol, molgnet::kSeg1);
  builder.add_collection_node();
  return builder.finish();
}

molgnet::BatchedGraph assemble_pair(const chem::MolGraph& a, const chem::MolGraph& b,
                                    const chem::FeatureVocab& vocab) {
  molgnet::BatchBuilder builder(vocab);
  builder.begin_graph();
  builder.add_fragment(a, molgnet::kSeg1);
  builder.add_fragment(b, molgnet::kSeg2);
  builder.add_collection_node();
  return builder.finish();
}

}  // namespace mpg::tasks
