// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mpg::chem {

class SyntaxError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ValenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class VocabError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Supported elements plus the two reserved symbols. The parser never emits
/// Mask or Collect; they exist for attribute masking and the collection node.
enum class Element : int {
  B = 0, C, N, O, P, S, F, Cl, Br, I, H,
  Mask,
  Collect,
};

inline constexpr int kElementCount = 13;

std::string_view element_symbol(Element e);

enum class BondOrder : int { Single = 0, Double, Triple, Aromatic };

struct AtomRecord {
  Element element = Element::C;
  int formal_charge = 0;   // in [-2, +2]
  int explicit_h = 0;      // hydrogens stated in a bracket atom
  int implicit_h = 0;      // hydrogens inferred from free valence
  bool aromatic = false;
  int degree = 0;          // heavy-atom neighbor count at parse time

  int total_h() const { return explicit_h + implicit_h; }
};

struct BondRecord {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
  bool in_ring = false;
};

/**
 * Molecular graph. Bonds are undirected and stored once; `adjacency[i]`
 * lists (neighbor atom index, bond index) pairs and is kept symmetric.
 */
struct MolGraph {
  std::vector<AtomRecord> atoms;
  std::vector<BondRecord> bonds;
  std::vector<std::vector<std::pair<int, int>>> adjacency;
  std::string source;

  int atom_count() const { return static_cast<int>(atoms.size()); }
  int bond_count() const { return static_cast<int>(bonds.size()); }

  /// Appends a bond and both adjacency entries. Rejects self-loops and
  /// duplicate bonds between the same atom pair.
  void add_bond(int a, int b, BondOrder order);

  /// Checks the structural invariants (symmetry, endpoint validity).
  void check_invariants() const;
};

/**
 * Parses the supported SMILES subset: organic-subset bare atoms, lowercase
 * aromatic atoms, bracket atoms with H-count and charge, bond symbols
 * - = # :, parenthesized branches, ring closures 1..9 and %nn. Raises
 * SyntaxError for anything outside the grammar (stereo, isotopes, wildcards,
 * dot-disconnections included) and ValenceError for over-bonded atoms when
 * check_valence is set.
 */
MolGraph parse_smiles(std::string_view text, bool check_valence = true);

/// Allowed base valences of an element (empty for Mask/Collect).
const std::vector<int>& base_valences(Element e);

/// Runs the valence check on an already-built graph; throws ValenceError.
void check_valences(const MolGraph& graph);

/// Copy with atom records permuted across positions (bonds untouched);
/// the standard trick for manufacturing structurally invalid molecules.
/// Graphs with fewer than two atoms are returned unchanged.
MolGraph shuffle_atom_features(const MolGraph& graph, std::uint64_t seed);

}  // namespace mpg::chem
