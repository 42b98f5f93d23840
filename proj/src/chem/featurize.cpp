// SPDX-License-Identifier: Apache-2.0
#include "mpg/chem/featurize.hpp"

#include <algorithm>

namespace mpg::chem {

namespace {

int checked(int value, int card, int offset, const char* field) {
  if (value < 0 || value >= card)
    throw VocabError(std::string(field) + " value " + std::to_string(value) +
                     " outside cardinality " + std::to_string(card));
  return offset + value;
}

}  // namespace

FeatureVocab::FeatureVocab(std::vector<int> atom_cardinalities,
                           std::vector<int> bond_cardinalities)
    : atom_cards(std::move(atom_cardinalities)), bond_cards(std::move(bond_cardinalities)) {
  atom_offsets.resize(atom_cards.size());
  for (std::size_t i = 0; i < atom_cards.size(); ++i) {
    atom_offsets[i] = atom_vocab_size;
    atom_vocab_size += atom_cards[i];
  }
  bond_offsets.resize(bond_cards.size());
  for (std::size_t i = 0; i < bond_cards.size(); ++i) {
    bond_offsets[i] = bond_vocab_size;
    bond_vocab_size += bond_cards[i];
  }
}

const FeatureVocab& FeatureVocab::standard() {
  static const FeatureVocab vocab({kElementCount, 5, 5, 2, 6}, {4, 2});
  return vocab;
}

int element_index(Element e) { return static_cast<int>(e); }

AtomIndices featurize_atom(const AtomRecord& atom, const FeatureVocab& vocab) {
  if (vocab.atom_cards.size() != kAtomFields)
    throw VocabError("atom vocab must declare five fields");
  AtomIndices out;
  out[0] = checked(element_index(atom.element), vocab.atom_cards[0], vocab.atom_offsets[0],
                   "element");
  out[1] = checked(atom.formal_charge + 2, vocab.atom_cards[1], vocab.atom_offsets[1],
                   "formal charge");
  const int h = std::min(atom.total_h(), vocab.atom_cards[2] - 1);
  out[2] = checked(h, vocab.atom_cards[2], vocab.atom_offsets[2], "h count");
  out[3] = checked(atom.aromatic ? 1 : 0, vocab.atom_cards[3], vocab.atom_offsets[3],
                   "aromatic");
  const int degree = std::min(atom.degree, vocab.atom_cards[4] - 1);
  out[4] = checked(degree, vocab.atom_cards[4], vocab.atom_offsets[4], "degree");
  return out;
}

BondIndices featurize_bond(const BondRecord& bond, const FeatureVocab& vocab) {
  if (vocab.bond_cards.size() != kBondFields)
    throw VocabError("bond vocab must declare two fields");
  BondIndices out;
  out[0] = checked(static_cast<int>(bond.order), vocab.bond_cards[0], vocab.bond_offsets[0],
                   "bond order");
  out[1] = checked(bond.in_ring ? 1 : 0, vocab.bond_cards[1], vocab.bond_offsets[1],
                   "in_ring");
  return out;
}

Featurized featurize(const MolGraph& graph, const FeatureVocab& vocab) {
  Featurized out;
  out.atoms.reserve(graph.atoms.size());
  for (const auto& atom : graph.atoms) out.atoms.push_back(featurize_atom(atom, vocab));
  out.bonds.reserve(graph.bonds.size());
  for (const auto& bond : graph.bonds) out.bonds.push_back(featurize_bond(bond, vocab));
  return out;
}

AtomIndices mask_atom_indices(const FeatureVocab& vocab) {
  AtomRecord record;
  record.element = Element::Mask;
  return featurize_atom(record, vocab);
}

AtomIndices collect_atom_indices(const FeatureVocab& vocab) {
  AtomRecord record;
  record.element = Element::Collect;
  return featurize_atom(record, vocab);
}

}  // namespace mpg::chem
