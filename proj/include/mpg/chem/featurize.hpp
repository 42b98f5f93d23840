// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mpg/chem/mol.hpp"

#include <array>

namespace mpg::chem {

inline constexpr int kAtomFields = 5;  // element, charge, h count, aromatic, degree
inline constexpr int kBondFields = 2;  // order, in_ring

/**
 * Embedding vocabulary: per-field cardinalities with prefix-sum offsets so a
 * single table per side (atom/bond) serves all fields with disjoint ranges.
 */
struct FeatureVocab {
  std::vector<int> atom_cards;
  std::vector<int> bond_cards;
  std::vector<int> atom_offsets;
  std::vector<int> bond_offsets;
  int atom_vocab_size = 0;
  int bond_vocab_size = 0;

  FeatureVocab(std::vector<int> atom_cardinalities, std::vector<int> bond_cardinalities);

  /// element(13 incl. MASK/COLLECT), charge(5: -2..+2), total H(5, clamped),
  /// aromatic(2), degree(6, clamped); bonds: order(4), in_ring(2).
  static const FeatureVocab& standard();
};

using AtomIndices = std::array<int, kAtomFields>;
using BondIndices = std::array<int, kBondFields>;

struct Featurized {
  std::vector<AtomIndices> atoms;
  std::vector<BondIndices> bonds;
};

/// Globally offset embedding indices for one atom. Throws VocabError when a
/// field value falls outside its declared cardinality.
AtomIndices featurize_atom(const AtomRecord& atom, const FeatureVocab& vocab);
BondIndices featurize_bond(const BondRecord& bond, const FeatureVocab& vocab);

Featurized featurize(const MolGraph& graph, const FeatureVocab& vocab);

/// Element-field index (equal to the global index, element being field 0).
int element_index(Element e);

/// Features of the reserved symbols: MASK/COLLECT element, neutral defaults.
AtomIndices mask_atom_indices(const FeatureVocab& vocab);
AtomIndices collect_atom_indices(const FeatureVocab& vocab);

}  // namespace mpg::chem
