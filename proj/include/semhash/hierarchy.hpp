#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semhash/common.hpp"

namespace semhash {

using NodeId = int;

struct TaxonomyNode {
  NodeId id = 0;
  std::string name;
  std::optional<NodeId> parent;
};

/// Immutable rooted label tree. Node ids are dense, assigned in order of first
/// appearance in the edge list.
class Taxonomy {
 public:
  Taxonomy(std::vector<TaxonomyNode> nodes, NodeId root);

  std::size_t size() const { return nodes_.size(); }
  NodeId root() const { return root_; }
  /// Longest root-to-leaf edge count.
  int height() const { return subtree_height_[root_]; }

  const TaxonomyNode& node(NodeId id) const;
  const std::vector<TaxonomyNode>& nodes() const { return nodes_; }
  const std::vector<NodeId>& children(NodeId id) const;
  int depth(NodeId id) const;
  /// Longest edge count from `id` down to a descendant leaf.
  int subtree_height(NodeId id) const;
  bool is_leaf(NodeId id) const { return children(id).empty(); }

  /// Leaf ids in ascending id order; the class universe for datasets.
  const std::vector<NodeId>& leaves() const { return leaves_; }
  /// Position of a leaf in `leaves()`.
  int leaf_index(NodeId id) const;
  const std::map<std::string, NodeId, std::less<>>& leaf_labels() const { return leaf_labels_; }

  std::optional<NodeId> find(std::string_view name) const;
  /// Leaf lookup by name; throws UnknownLabel or NotALeaf.
  NodeId leaf_by_name(std::string_view name) const;

  void check_node(NodeId id) const;

 private:
  std::vector<TaxonomyNode> nodes_;
  NodeId root_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<int> depth_;
  std::vector<int> subtree_height_;
  std::vector<NodeId> leaves_;
  std::vector<int> leaf_index_;
  std::map<std::string, NodeId, std::less<>> leaf_labels_;
};

/// Parses "parent child" lines; `#` starts a comment line and blank lines are
/// skipped.
Taxonomy parse_taxonomy(std::string_view text);
Taxonomy load_taxonomy(const std::string& path);
/// Edge list in node-id order; parses back to an identical tree.
std::string serialize_taxonomy(const Taxonomy& t);

NodeId lca(const Taxonomy& t, NodeId a, NodeId b);

/// subtree_height(lca(a, b)) / height(); both arguments must be leaves.
double semantic_distance(const Taxonomy& t, NodeId a, NodeId b);

struct SemanticDistanceMatrix {
  std::vector<NodeId> labels;
  Matrix values;
};

SemanticDistanceMatrix distance_matrix(const Taxonomy& t, std::span<const NodeId> labels);

}  // namespace semhash
