// SPDX-License-Identifier: Apache-2.0
#include "mpg/chem/mol.hpp"

#include "mpg/rng.hpp"

#include <algorithm>
#include <map>
#include <optional>

namespace mpg::chem {

namespace {

struct ElementInfo {
  Element element;
  std::string_view symbol;
  std::vector<int> valences;
  bool organic_subset;   // may appear bare, outside brackets
  bool aromatic_ok;      // has a lowercase aromatic form
};

const std::vector<ElementInfo>& element_table() {
  static const std::vector<ElementInfo> table = {
      {Element::B, "B", {3}, true, true},
      {Element::C, "C", {4}, true, true},
      {Element::N, "N", {3}, true, true},
      {Element::O, "O", {2}, true, true},
      {Element::P, "P", {3, 5}, true, true},
      {Element::S, "S", {2, 4, 6}, true, true},
      {Element::F, "F", {1}, true, false},
      {Element::Cl, "Cl", {1}, true, false},
      {Element::Br, "Br", {1}, true, false},
      {Element::I, "I", {1}, true, false},
      {Element::H, "H", {1}, false, false},
      {Element::Mask, "?", {}, false, false},
      {Element::Collect, "*", {}, false, false},
  };
  return table;
}

const ElementInfo& info_of(Element e) {
  return element_table()[static_cast<int>(e)];
}

// Bond orders in half-units so aromatic (1.5) stays integral.
int order_halves(BondOrder order) {
  switch (order) {
    case BondOrder::Single: return 2;
    case BondOrder::Double: return 4;
    case BondOrder::Triple: return 6;
    case BondOrder::Aromatic: return 3;
  }
  return 2;
}

struct PendingRing {
  int atom;
  std::optional<BondOrder> order;
  std::size_t position;  // for error messages
};

class Parser {
public:
  Parser(std::string_view text, bool check_valence)
      : text_(text), check_valence_(check_valence) {}

  MolGraph run() {
    if (text_.empty()) throw SyntaxError("empty SMILES string");
    graph_.source = std::string(text_);
    while (!eof()) step();
    if (!branch_stack_.empty()) throw SyntaxError("unbalanced '(' in SMILES");
    if (!open_rings_.empty())
      throw SyntaxError("dangling ring closure " + std::to_string(open_rings_.begin()->first));
    if (pending_bond_.has_value()) throw SyntaxError("trailing bond symbol");
    if (graph_.atoms.empty()) throw SyntaxError("SMILES contains no atoms");
    finish();
    return std::move(graph_);
  }

private:
  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }
  char take() { return text_[pos_++]; }

  [[noreturn]] void fail(const std::string& what) const {
    throw SyntaxError(what + " at position " + std::to_string(pos_) + " in '" +
                      std::string(text_) + "'");
  }

  void step() {
    const char c = peek();
    switch (c) {
      case '(': {
        take();
        if (prev_atom_ < 0) fail("branch before any atom");
        branch_stack_.push_back(prev_atom_);
        return;
      }
      case ')': {
        take();
        if (branch_stack_.empty()) fail("unbalanced ')'");
        if (pending_bond_.has_value()) fail("bond symbol before ')'");
        prev_atom_ = branch_stack_.back();
        branch_stack_.pop_back();
        return;
      }
      case '-': take(); set_pending(BondOrder::Single); return;
      case '=': take(); set_pending(BondOrder::Double); return;
      case '#': take(); set_pending(BondOrder::Triple); return;
      case ':': take(); set_pending(BondOrder::Aromatic); return;
      case '%': {
        take();
        if (pos_ + 1 >= text_.size() || !isdigit(text_[pos_]) || !isdigit(text_[pos_ + 1]))
          fail("'%' ring closure needs two digits");
        const int number = (take() - '0') * 10 + (take() - '0');
        ring_closure(number);
        return;
      }
      case '[': parse_bracket_atom(); return;
      default: break;
    }
    if (isdigit(c)) {
      take();
      ring_closure(c - '0');
      return;
    }
    if (parse_organic_atom()) return;
    fail(std::string("unexpected symbol '") + c + "'");
  }

  void set_pending(BondOrder order) {
    if (pending_bond_.has_value()) fail("two bond symbols in a row");
    if (prev_atom_ < 0) fail("bond symbol before any atom");
    pending_bond_ = order;
  }

  bool parse_organic_atom() {
    const char c = peek();
    for (const auto& info : element_table()) {
      if (!info.organic_subset) continue;
      const auto& sym = info.symbol;
      // two-letter symbols first (Cl before C, Br before B)
      if (sym.size() == 2 && text_.substr(pos_, 2) == sym) {
        pos_ += 2;
        add_atom(info.element, false, 0, -1, false);
        return true;
      }
    }
    for (const auto& info : element_table()) {
      if (!info.organic_subset || info.symbol.size() != 1) continue;
      if (c == info.symbol[0]) {
        take();
        add_atom(info.element, false, 0, -1, false);
        return true;
      }
      if (info.aromatic_ok && c == std::tolower(info.symbol[0])) {
        take();
        add_atom(info.element, true, 0, -1, false);
        return true;
      }
    }
    return false;
  }

  void parse_bracket_atom() {
    take();  // '['
    if (eof()) fail("unterminated bracket atom");
    if (isdigit(peek())) fail("isotope specifications are not supported");
    bool aromatic = false;
    Element element;
    if (!match_bracket_element(element, aromatic)) fail("unknown element in bracket atom");
    int h_count = 0;
    if (!eof() && peek() == 'H') {
      take();
      h_count = 1;
      if (!eof() && isdigit(peek())) h_count = take() - '0';
    }
    int charge = 0;
    if (!eof() && (peek() == '+' || peek() == '-')) {
      const char sign = take();
      int magnitude = 1;
      if (!eof() && isdigit(peek())) {
        magnitude = take() - '0';
      } else {
        while (!eof() && peek() == sign) {
          take();
          ++magnitude;
        }
      }
      charge = (sign == '+') ? magnitude : -magnitude;
    }
    if (eof() || peek() != ']') fail("malformed bracket atom");
    take();  // ']'
    if (charge < -2 || charge > 2) fail("formal charge outside [-2, +2]");
    add_atom(element, aromatic, charge, h_count, true);
  }

  bool match_bracket_element(Element& element, bool& aromatic) {
    for (const auto& info : element_table()) {
      if (info.element == Element::Mask || info.element == Element::Collect) continue;
      if (info.symbol.size() == 2 && text_.substr(pos_, 2) == info.symbol) {
        pos_ += 2;
        element = info.element;
        aromatic = false;
        return true;
      }
    }
    for (const auto& info : element_table()) {
      if (info.element == Element::Mask || info.element == Element::Collect) continue;
      if (info.symbol.size() != 1) continue;
      if (peek() == info.symbol[0]) {
        take();
        element = info.element;
        aromatic = false;
        return true;
      }
      if (info.aromatic_ok && peek() == std::tolower(info.symbol[0])) {
        take();
        element = info.element;
        aromatic = true;
        return true;
      }
    }
    return false;
  }

  void add_atom(Element element, bool aromatic, int charge, int explicit_h, bool bracket) {
    AtomRecord atom;
    atom.element = element;
    atom.aromatic = aromatic;
    atom.formal_charge = charge;
    atom.explicit_h = std::max(explicit_h, 0);
    from_bracket_.push_back(bracket);
    const int index = graph_.atom_count();
    graph_.atoms.push_back(atom);
    graph_.adjacency.emplace_back();
    if (prev_atom_ >= 0) {
      graph_.add_bond(prev_atom_, index, resolve_order(prev_atom_, index, pending_bond_));
      pending_bond_.reset();
    } else if (pending_bond_.has_value()) {
      fail("bond symbol before any atom");
    }
    prev_atom_ = index;
  }

  // Unspecified bonds between two aromatic atoms are aromatic, else single.
  BondOrder resolve_order(int a, int b, std::optional<BondOrder> stated) const {
    if (stated.has_value()) return *stated;
    if (graph_.atoms[a].aromatic && graph_.atoms[b].aromatic) return BondOrder::Aromatic;
    return BondOrder::Single;
  }

  void ring_closure(int number) {
    if (prev_atom_ < 0) fail("ring closure before any atom");
    auto it = open_rings_.find(number);
    if (it == open_rings_.end()) {
      open_rings_[number] = PendingRing{prev_atom_, pending_bond_, pos_};
      pending_bond_.reset();
      return;
    }
    const PendingRing open = it->second;
    open_rings_.erase(it);
    if (open.atom == prev_atom_) fail("ring closure bonds an atom to itself");
    if (open.order.has_value() && pending_bond_.has_value() && *open.order != *pending_bond_)
      fail("conflicting bond orders on ring closure");
    std::optional<BondOrder> stated = open.order.has_value() ? open.order : pending_bond_;
    pending_bond_.reset();
    graph_.add_bond(open.atom, prev_atom_, resolve_order(open.atom, prev_atom_, stated));
  }

  // Implicit hydrogens, degrees, ring membership, optional valence check.
  void finish() {
    for (int i = 0; i < graph_.atom_count(); ++i) {
      auto& atom = graph_.atoms[i];
      atom.degree = static_cast<int>(graph_.adjacency[i].size());
      if (from_bracket_[i]) continue;  // bracket atoms carry only their stated H
      int halves = 0;
      for (const auto& [nbr, bond] : graph_.adjacency[i])
        halves += order_halves(graph_.bonds[bond].order);
      const int used = (halves + 1) / 2;  // aromatic halves round up
      const auto& valences = info_of(atom.element).valences;
      int allowed = valences.back();
      for (int v : valences)
        if (v >= used) { allowed = v; break; }
      atom.implicit_h = std::max(0, allowed - used);
    }
    mark_rings();
    graph_.check_invariants();
    if (check_valence_) check_valences(graph_);
  }

  // A bond is in a ring iff it is not a bridge (Tarjan lowlink DFS).
  void mark_rings() {
    const int n = graph_.atom_count();
    std::vector<int> entry(n, -1), low(n, 0);
    int timer = 0;
    // iterative DFS over possibly disconnected graphs
    for (int root = 0; root < n; ++root) {
      if (entry[root] >= 0) continue;
      std::vector<std::tuple<int, int, std::size_t>> stack;  // node, via bond, next edge
      stack.emplace_back(root, -1, 0);
      entry[root] = low[root] = timer++;
      while (!stack.empty()) {
        auto& [node, via, next] = stack.back();
        if (next < graph_.adjacency[node].size()) {
          const auto [nbr, bond] = graph_.adjacency[node][next++];
          if (bond == via) continue;
          if (entry[nbr] >= 0) {
            low[node] = std::min(low[node], entry[nbr]);
            if (entry[nbr] < entry[node]) graph_.bonds[bond].in_ring = true;  // back edge
          } else {
            entry[nbr] = low[nbr] = timer++;
            stack.emplace_back(nbr, bond, 0);
          }
        } else {
          const int done = node;
          const int done_via = via;
          stack.pop_back();
          if (!stack.empty()) {
            const int parent = std::get<0>(stack.back());
            low[parent] = std::min(low[parent], low[done]);
            if (low[done] <= entry[parent]) graph_.bonds[done_via].in_ring = true;
          }
        }
      }
    }
  }

  std::string_view text_;
  bool check_valence_;
  std::size_t pos_ = 0;
  MolGraph graph_;
  std::vector<bool> from_bracket_;
  int prev_atom_ = -1;
  std::optional<BondOrder> pending_bond_;
  std::vector<int> branch_stack_;
  std::map<int, PendingRing> open_rings_;
};

}  // namespace

std::string_view element_symbol(Element e) { return info_of(e).symbol; }

const std::vector<int>& base_valences(Element e) { return info_of(e).valences; }

void MolGraph::add_bond(int a, int b, BondOrder order) {
  if (a == b) throw SyntaxError("self-loop bond");
  if (a < 0 || b < 0 || a >= atom_count() || b >= atom_count())
    throw SyntaxError("bond endpoint out of range");
  for (const auto& [nbr, bond] : adjacency[a])
    if (nbr == b) throw SyntaxError("duplicate bond between the same atom pair");
  const int index = bond_count();
  bonds.push_back(BondRecord{a, b, order, false});
  adjacency[a].emplace_back(b, index);
  adjacency[b].emplace_back(a, index);
}

void MolGraph::check_invariants() const {
  if (atoms.empty()) throw SyntaxError("graph has no atoms");
  if (adjacency.size() != atoms.size()) throw SyntaxError("adjacency size mismatch");
  for (const auto& bond : bonds) {
    if (bond.a == bond.b || bond.a < 0 || bond.b < 0 || bond.a >= atom_count() ||
        bond.b >= atom_count())
      throw SyntaxError("bond endpoints invalid");
  }
  for (int i = 0; i < atom_count(); ++i) {
    for (const auto& [nbr, bond] : adjacency[i]) {
      const auto& other = adjacency[nbr];
      const bool mirrored = std::any_of(other.begin(), other.end(), [&](auto p) {
        return p.first == i && p.second == bond;
      });
      if (!mirrored) throw SyntaxError("adjacency is not symmetric");
    }
  }
}

void check_valences(const MolGraph& graph) {
  for (int i = 0; i < graph.atom_count(); ++i) {
    const auto& atom = graph.atoms[i];
    const auto& valences = base_valences(atom.element);
    if (valences.empty()) continue;  // reserved symbols are not chemical atoms
    // Aromatic bonds count as one sigma bond here; the 1.5 convention is only
    // used when inferring hydrogens on bare aromatic atoms.
    int used = atom.explicit_h + atom.implicit_h;
    for (const auto& [nbr, bond] : graph.adjacency[i]) {
      switch (graph.bonds[bond].order) {
        case BondOrder::Single: used += 1; break;
        case BondOrder::Double: used += 2; break;
        case BondOrder::Triple: used += 3; break;
        case BondOrder::Aromatic: used += 1; break;
      }
    }
    const int allowed = std::max(0, valences.back() + atom.formal_charge);
    if (used > allowed)
      throw ValenceError("atom " + std::to_string(i) + " (" +
                         std::string(element_symbol(atom.element)) + ") uses valence " +
                         std::to_string(used) + " > " + std::to_string(allowed) +
                         " in '" + graph.source + "'");
  }
}

MolGraph parse_smiles(std::string_view text, bool check_valence) {
  for (char c : text)
    if (static_cast<unsigned char>(c) >= 128)
      throw SyntaxError("SMILES must be ASCII");
  return Parser(text, check_valence).run();
}

MolGraph shuffle_atom_features(const MolGraph& graph, std::uint64_t seed) {
  MolGraph shuffled = graph;
  const std::size_t n = graph.atoms.size();
  if (n < 2) return shuffled;
  Rng rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t i = 0; i < n; ++i) shuffled.atoms[i] = graph.atoms[order[i]];
  return shuffled;
}

}  // namespace mpg::chem
