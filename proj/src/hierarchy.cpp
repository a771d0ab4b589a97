#include "semhash/hierarchy.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "semhash/binary_io.hpp"

namespace semhash {

Taxonomy::Taxonomy(std::vector<TaxonomyNode> nodes, NodeId root)
    : nodes_(std::move(nodes)), root_(root) {
  const auto n = static_cast<NodeId>(nodes_.size());
  if (n == 0) {
    throw Error(ErrorKind::kEmptyInput, "taxonomy has no nodes");
  }
  children_.assign(n, {});
  for (const auto& node : nodes_) {
    if (node.parent) {
      check_node(*node.parent);
      children_[*node.parent].push_back(node.id);
    }
  }

  // Breadth-first from the root gives depths and a topological order.
  depth_.assign(n, -1);
  std::vector<NodeId> order{root_};
  depth_[root_] = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (NodeId c : children_[order[i]]) {
      if (depth_[c] != -1) {
        throw Error(ErrorKind::kCycleDetected, "node " + nodes_[c].name + " reached twice");
      }
      depth_[c] = depth_[order[i]] + 1;
      order.push_back(c);
    }
  }
  if (static_cast<NodeId>(order.size()) != n) {
    throw Error(ErrorKind::kCycleDetected, "not every node is reachable from the root");
  }

  subtree_height_.assign(n, 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (const auto& p = nodes_[*it].parent) {
      subtree_height_[*p] = std::max(subtree_height_[*p], subtree_height_[*it] + 1);
    }
  }

  leaf_index_.assign(n, -1);
  for (NodeId id = 0; id < n; ++id) {
    if (children_[id].empty()) {
      leaf_index_[id] = static_cast<int>(leaves_.size());
      leaves_.push_back(id);
      leaf_labels_.emplace(nodes_[id].name, id);
    }
  }
}

const TaxonomyNode& Taxonomy::node(NodeId id) const {
  check_node(id);
  return nodes_[id];
}

const std::vector<NodeId>& Taxonomy::children(NodeId id) const {
  check_node(id);
  return children_[id];
}

int Taxonomy::depth(NodeId id) const {
  check_node(id);
  return depth_[id];
}

int Taxonomy::subtree_height(NodeId id) const {
  check_node(id);
  return subtree_height_[id];
}

int Taxonomy::leaf_index(NodeId id) const {
  check_node(id);
  if (leaf_index_[id] < 0) {
    throw Error(ErrorKind::kNotALeaf, nodes_[id].name);
  }
  return leaf_index_[id];
}

std::optional<NodeId> Taxonomy::find(std::string_view name) const {
  for (const auto& node : nodes_) {
    if (node.name == name) return node.id;
  }
  return std::nullopt;
}

NodeId Taxonomy::leaf_by_name(std::string_view name) const {
  if (auto it = leaf_labels_.find(name); it != leaf_labels_.end()) {
    return it->second;
  }
  if (find(name)) {
    throw Error(ErrorKind::kNotALeaf, std::string(name));
  }
  throw Error(ErrorKind::kUnknownLabel, std::string(name));
}

void Taxonomy::check_node(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw Error(ErrorKind::kUnknownNode, "node id " + std::to_string(id));
  }
}

Taxonomy parse_taxonomy(std::string_view text) {
  std::vector<TaxonomyNode> nodes;
  std::unordered_map<std::string, NodeId> ids;
  auto intern = [&](const std::string& name) {
    auto [it, inserted] = ids.emplace(name, static_cast<NodeId>(nodes.size()));
    if (inserted) nodes.push_back({it->second, name, std::nullopt});
    return it->second;
  };

  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string parent_name, child_name, extra;
    if (!(fields >> parent_name)) continue;
    if (parent_name.front() == '#') continue;
    if (!(fields >> child_name) || (fields >> extra)) {
      throw Error(ErrorKind::kMalformedLine,
                  "line " + std::to_string(line_no) + ": expected \"parent child\"");
    }
    const NodeId parent = intern(parent_name);
    const NodeId child = intern(child_name);
    if (parent == child) {
      throw Error(ErrorKind::kCycleDetected, "self edge on " + parent_name);
    }
    auto& slot = nodes[child].parent;
    if (slot && *slot != parent) {
      throw Error(ErrorKind::kMultipleParents,
                  child_name + " has parents " + nodes[*slot].name + " and " + parent_name);
    }
    slot = parent;
  }
  if (nodes.empty()) {
    throw Error(ErrorKind::kEmptyInput, "no edges");
  }

  // Each node has at most one parent, so a cycle shows up as a parent chain
  // that revisits a node.
  std::vector<int> state(nodes.size(), 0);  // 0 unseen, 1 on current chain, 2 done
  for (NodeId start = 0; start < static_cast<NodeId>(nodes.size()); ++start) {
    std::vector<NodeId> chain;
    std::optional<NodeId> cur = start;
    while (cur && state[*cur] == 0) {
      state[*cur] = 1;
      chain.push_back(*cur);
      cur = nodes[*cur].parent;
    }
    if (cur && state[*cur] == 1) {
      throw Error(ErrorKind::kCycleDetected, "cycle through " + nodes[*cur].name);
    }
    for (NodeId id : chain) state[id] = 2;
  }

  std::vector<NodeId> roots;
  for (const auto& node : nodes) {
    if (!node.parent) roots.push_back(node.id);
  }
  if (roots.empty()) {
    throw Error(ErrorKind::kNoRoot, "every node has a parent");
  }
  if (roots.size() > 1) {
    throw Error(ErrorKind::kMultipleRoots,
                nodes[roots[0]].name + " and " + nodes[roots[1]].name + " both lack parents");
  }
  return Taxonomy(std::move(nodes), roots.front());
}

Taxonomy load_taxonomy(const std::string& path) {
  return parse_taxonomy(read_file(path));
}

std::string serialize_taxonomy(const Taxonomy& t) {
  std::string out;
  for (const auto& node : t.nodes()) {
    if (node.parent) {
      out += t.node(*node.parent).name + " " + node.name + "\n";
    }
  }
  return out;
}

NodeId lca(const Taxonomy& t, NodeId a, NodeId b) {
  t.check_node(a);
  t.check_node(b);
  while (t.depth(a) > t.depth(b)) a = *t.node(a).parent;
  while (t.depth(b) > t.depth(a)) b = *t.node(b).parent;
  while (a != b) {
    a = *t.node(a).parent;
    b = *t.node(b).parent;
  }
  return a;
}

double semantic_distance(const Taxonomy& t, NodeId a, NodeId b) {
  t.check_node(a);
  t.check_node(b);
  if (!t.is_leaf(a)) throw Error(ErrorKind::kNotALeaf, t.node(a).name);
  if (!t.is_leaf(b)) throw Error(ErrorKind::kNotALeaf, t.node(b).name);
  if (a == b) return 0.0;
  return static_cast<double>(t.subtree_height(lca(t, a, b))) / t.height();
}

SemanticDistanceMatrix distance_matrix(const Taxonomy& t, std::span<const NodeId> labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  SemanticDistanceMatrix out{{labels.begin(), labels.end()}, Matrix::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double d = semantic_distance(t, labels[i], labels[j]);
      out.values(i, j) = d;
      out.values(j, i) = d;
    }
  }
  return out;
}

}  // namespace semhash
