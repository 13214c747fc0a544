/*
 * Copyright 2026 The csdet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Category tree with leaf selection and probability aggregation.
//
// Only leaves are scored by the classifier. The probability of an internal
// node is the sum of the probabilities of the leaves below it, so a single
// softmax over the leaves yields a consistent distribution over every node
// of the tree.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace csdet {

// (child, parent)
using TaxonomyEdge = std::pair<std::string, std::string>;

class Taxonomy {
 public:
  using NodeId = std::size_t;

  // Node ids index nodes() which is sorted lexicographically.
  const std::vector<std::string>& nodes() const { return nodes_; }
  std::size_t num_nodes() const { return nodes_.size(); }

  NodeId root() const { return root_; }
  const std::string& root_name() const { return nodes_[root_]; }

  std::optional<NodeId> find(const std::string& name) const;
  // Throws kUnknownCategory.
  NodeId node_id(const std::string& name) const;
  bool contains(const std::string& name) const { return find(name).has_value(); }

  std::optional<NodeId> parent(NodeId id) const { return parent_[id]; }
  const std::vector<NodeId>& children(NodeId id) const { return children_[id]; }
  bool is_leaf(NodeId id) const { return children_[id].empty(); }
  bool is_leaf(const std::string& name) const { return is_leaf(node_id(name)); }

  // V_leaf in canonical (lexicographic) order.
  const std::vector<std::string>& leaf_order() const { return leaf_order_; }
  std::size_t num_leaves() const { return leaf_order_.size(); }
  NodeId leaf_node(std::size_t leaf_index) const { return leaf_nodes_[leaf_index]; }

  // Sorted leaf indices below (or equal to) the node.
  const std::vector<std::size_t>& descendant_leaves(NodeId id) const {
    return descendant_leaves_[id];
  }

  // Edge count of the longest root-to-leaf path.
  std::size_t depth() const { return depth_; }

  // True if `ancestor` lies on the path from `node` to the root (inclusive).
  bool is_ancestor_or_self(NodeId ancestor, NodeId node) const;

  // Canonical edge list, sorted by child name.
  std::vector<TaxonomyEdge> edges() const;

 private:
  friend Taxonomy build_taxonomy(std::span<const TaxonomyEdge> edges);

  std::vector<std::string> nodes_;
  std::map<std::string, NodeId, std::less<>> index_;
  std::vector<std::optional<NodeId>> parent_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<std::string> leaf_order_;
  std::vector<NodeId> leaf_nodes_;
  std::vector<std::vector<std::size_t>> descendant_leaves_;
  NodeId root_ = 0;
  std::size_t depth_ = 0;
};

// Throws kEmptyInput, kInvalidName, kDuplicateEdge, kMultipleParents,
// kCycleDetected or kMultipleRoots.
Taxonomy build_taxonomy(std::span<const TaxonomyEdge> edges);

// Tab-separated `child<TAB>parent` lines; `#` starts a comment, blank lines
// are skipped. Malformed lines raise kFormatError with the line number.
std::vector<TaxonomyEdge> parse_taxonomy_edges(const std::string& text);
Taxonomy load_taxonomy(const std::filesystem::path& path);
void save_taxonomy(const Taxonomy& taxonomy, const std::filesystem::path& path);

// Numerically stable softmax (max-subtracted).
std::vector<double> leaf_softmax(std::span<const double> scores);

// Probability for every node, indexed by Taxonomy::NodeId.
struct CategoryProbabilities {
  std::vector<double> values;

  double at(const Taxonomy& taxonomy, const std::string& name) const {
    return values[taxonomy.node_id(name)];
  }
};

// Leaf entries are copied, internal nodes are the sums over their descendant
// leaves. Throws kLengthMismatch.
CategoryProbabilities aggregate(const Taxonomy& taxonomy,
                                std::span<const double> leaf_probs);

// Hierarchical baseline: an independent softmax over every sibling group and
// path products from the root. Throws kMissingScore.
CategoryProbabilities multisoftmax_baseline(
    const Taxonomy& taxonomy, const std::map<std::string, double>& node_scores);

struct AncestorFilterResult {
  std::vector<std::size_t> kept;
  std::size_t filtered_count = 0;
  std::set<std::string> filtered_categories;
};

// Keeps the samples labeled with a leaf. Throws kUnknownCategory.
AncestorFilterResult filter_ancestor_samples(std::span<const std::string> labels,
                                             const Taxonomy& taxonomy);

// Throws kUnknownCategory or kNotALeaf.
std::size_t leaf_index(const Taxonomy& taxonomy, const std::string& name);

// A two-level tree `root -> classes` in which every name is its own leaf.
// Used by the flat-classification comparison where ancestors are trained as
// extra softmax classes instead of being aggregated.
Taxonomy flat_taxonomy(std::span<const std::string> classes,
                       const std::string& root_name = "__root__");

}  // namespace csdet
