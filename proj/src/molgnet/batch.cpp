// SPDX-License-Identifier: Apache-2.0
#include "mpg/molgnet/molgnet.hpp"

namespace mpg::molgnet {

void BatchedGraph::validate() const {
  if (static_cast<int>(node_seg.size()) != n_nodes() ||
      static_cast<int>(node_graph.size()) != n_nodes() ||
      static_cast<int>(collect_node.size()) != n_graphs)
    throw StructureError("batched graph: inconsistent node bookkeeping");
  for (const auto& arc : arcs) {
    if (arc.src < 0 || arc.src >= n_nodes() || arc.dst < 0 || arc.dst >= n_nodes())
      throw StructureError("batched graph: arc endpoint out of range");
    if (node_graph[arc.src] != node_graph[arc.dst])
      throw StructureError("batched graph: arc crosses graphs");
    if (is_collect(arc.src))
      throw StructureError("batched graph: arc leaves a collection node");
    if (arc.is_virtual != is_collect(arc.dst))
      throw StructureError("batched graph: virtual flag inconsistent with target");
  }
  for (int g = 0; g < n_graphs; ++g) {
    const int collect = collect_node[g];
    if (collect < 0) continue;
    if (node_graph[collect] != g || !is_collect(collect))
      throw StructureError("batched graph: collection node mislabeled");
    std::vector<bool> feeds(n_nodes(), false);
    for (const auto& arc : arcs)
      if (arc.dst == collect) feeds[arc.src] = true;
    for (int i = 0; i < n_nodes(); ++i)
      if (node_graph[i] == g && i != collect && !feeds[i])
        throw StructureError("batched graph: node missing its virtual arc");
  }
  for (int i = 0; i < n_nodes(); ++i)
    if (is_collect(i)) {
      const int g = node_graph[i];
      if (g < 0 || g >= n_graphs || collect_node[g] != i)
        throw StructureError("batched graph: unregistered collection node");
    }
}

void BatchBuilder::begin_graph() {
  graph_first_node_ = batch_.n_nodes();
  batch_.collect_node.push_back(-1);
  ++batch_.n_graphs;
  in_graph_ = true;
}

int BatchBuilder::add_fragment(const chem::MolGraph& fragment, int segment) {
  if (!in_graph_) throw StructureError("add_fragment outside begin_graph");
  const int offset = batch_.n_nodes();
  const int graph_id = batch_.n_graphs - 1;
  const auto feats = chem::featurize(fragment, *vocab_);
  for (int i = 0; i < fragment.atom_count(); ++i) {
    batch_.node_feats.push_back(feats.atoms[i]);
    batch_.node_seg.push_back(segment);
    batch_.node_graph.push_back(graph_id);
  }
  // one undirected bond becomes two directed arcs
  for (int b = 0; b < fragment.bond_count(); ++b) {
    const auto& bond = fragment.bonds[b];
    Arc forward{offset + bond.a, offset + bond.b, segment, false, feats.bonds[b]};
    Arc backward{offset + bond.b, offset + bond.a, segment, false, feats.bonds[b]};
    batch_.arcs.push_back(forward);
    batch_.arcs.push_back(backward);
  }
  return offset;
}

void BatchBuilder::add_collection_node() {
  if (!in_graph_) throw StructureError("add_collection_node outside begin_graph");
  const int graph_id = batch_.n_graphs - 1;
  if (batch_.collect_node[graph_id] >= 0)
    throw StructureError("graph already has a collection node");
  const int collect = batch_.n_nodes();
  batch_.node_feats.push_back(chem::collect_atom_indices(*vocab_));
  batch_.node_seg.push_back(kSegCollect);
  batch_.node_graph.push_back(graph_id);
  batch_.collect_node[graph_id] = collect;
  for (int i = graph_first_node_; i < collect; ++i)
    batch_.arcs.push_back(Arc{i, collect, kSegCollect, true, {0, 0}});
}

BatchedGraph BatchBuilder::finish() {
  in_graph_ = false;
  batch_.validate();
  return std::move(batch_);
}

BatchedGraph merge_batches(const std::vector<const BatchedGraph*>& parts) {
  BatchedGraph merged;
  int node_offset = 0;
  int graph_offset = 0;
  for (const BatchedGraph* part : parts) {
    for (int i = 0; i < part->n_nodes(); ++i) {
      merged.node_feats.push_back(part->node_feats[i]);
      merged.node_seg.push_back(part->node_seg[i]);
      merged.node_graph.push_back(part->node_graph[i] + graph_offset);
    }
    for (Arc arc : part->arcs) {
      arc.src += node_offset;
      arc.dst += node_offset;
      merged.arcs.push_back(arc);
    }
    for (int c : part->collect_node)
      merged.collect_node.push_back(c < 0 ? -1 : c + node_offset);
    node_offset += part->n_nodes();
    graph_offset += part->n_graphs;
  }
  merged.n_graphs = graph_offset;
  merged.validate();
  return merged;
}

}  // namespace mpg::molgnet
