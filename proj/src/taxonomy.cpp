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

#include "csdet/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "csdet/error.hpp"

namespace csdet {

std::optional<Taxonomy::NodeId> Taxonomy::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Taxonomy::NodeId Taxonomy::node_id(const std::string& name) const {
  auto id = find(name);
  if (!id) throw Error(ErrorCode::kUnknownCategory, "'" + name + "'");
  return *id;
}

bool Taxonomy::is_ancestor_or_self(NodeId ancestor, NodeId node) const {
  std::optional<NodeId> cur = node;
  while (cur) {
    if (*cur == ancestor) return true;
    cur = parent_[*cur];
  }
  return false;
}

std::vector<TaxonomyEdge> Taxonomy::edges() const {
  std::vector<TaxonomyEdge> out;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (parent_[id]) out.emplace_back(nodes_[id], nodes_[*parent_[id]]);
  }
  return out;
}

Taxonomy build_taxonomy(std::span<const TaxonomyEdge> edges) {
  if (edges.empty()) throw Error(ErrorCode::kEmptyInput, "edge list is empty");

  std::map<std::string, std::string> parent_of;
  std::set<std::string> names;
  for (const auto& [child, parent] : edges) {
    if (child.empty() || parent.empty()) {
      throw Error(ErrorCode::kInvalidName, "category names must be nonempty");
    }
    if (child == parent) {
      throw Error(ErrorCode::kCycleDetected, "'" + child + "' is its own parent");
    }
    auto [it, inserted] = parent_of.emplace(child, parent);
    if (!inserted) {
      if (it->second == parent) {
        throw Error(ErrorCode::kDuplicateEdge, child + " -> " + parent);
      }
      throw Error(ErrorCode::kMultipleParents,
                  "'" + child + "' has parents '" + it->second + "' and '" +
                      parent + "'");
    }
    names.insert(child);
    names.insert(parent);
  }

  Taxonomy t;
  t.nodes_.assign(names.begin(), names.end());
  for (Taxonomy::NodeId i = 0; i < t.nodes_.size(); ++i) t.index_[t.nodes_[i]] = i;
  const std::size_t n = t.nodes_.size();
  t.parent_.assign(n, std::nullopt);
  t.children_.assign(n, {});
  for (const auto& [child, parent] : parent_of) {
    t.parent_[t.index_.at(child)] = t.index_.at(parent);
  }

  // Every node has at most one parent, so a cycle shows up as a parent walk
  // longer than the node count.
  for (Taxonomy::NodeId start = 0; start < n; ++start) {
    std::optional<Taxonomy::NodeId> cur = start;
    std::size_t steps = 0;
    while (cur) {
      if (++steps > n) {
        throw Error(ErrorCode::kCycleDetected,
                    "parent chain from '" + t.nodes_[start] + "' loops");
      }
      cur = t.parent_[*cur];
    }
  }

  std::vector<Taxonomy::NodeId> roots;
  for (Taxonomy::NodeId i = 0; i < n; ++i) {
    if (!t.parent_[i]) roots.push_back(i);
  }
  if (roots.size() != 1) {
    std::string list;
    for (auto r : roots) list += (list.empty() ? "" : ", ") + t.nodes_[r];
    throw Error(ErrorCode::kMultipleRoots, "roots: " + list);
  }
  t.root_ = roots.front();

  // Ids are in sorted name order, so children lists come out sorted too.
  for (Taxonomy::NodeId i = 0; i < n; ++i) {
    if (t.parent_[i]) t.children_[*t.parent_[i]].push_back(i);
  }
  for (Taxonomy::NodeId i = 0; i < n; ++i) {
    if (t.children_[i].empty()) {
      t.leaf_order_.push_back(t.nodes_[i]);
      t.leaf_nodes_.push_back(i);
    }
  }

  t.descendant_leaves_.assign(n, {});
  for (std::size_t leaf = 0; leaf < t.leaf_nodes_.size(); ++leaf) {
    std::optional<Taxonomy::NodeId> cur = t.leaf_nodes_[leaf];
    std::size_t depth = 0;
    while (cur) {
      t.descendant_leaves_[*cur].push_back(leaf);
      cur = t.parent_[*cur];
      if (cur) ++depth;
    }
    t.depth_ = std::max(t.depth_, depth);
  }
  return t;
}

namespace {

std::string trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<TaxonomyEdge> parse_taxonomy_edges(const std::string& text) {
  std::vector<TaxonomyEdge> edges;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorCode::kFormatError,
                  "line " + std::to_string(lineno) + ": expected child<TAB>parent");
    }
    std::string child = trim(std::string_view(line).substr(0, tab));
    std::string parent = trim(std::string_view(line).substr(tab + 1));
    if (child.empty() || parent.empty() || parent.find('\t') != std::string::npos) {
      throw Error(ErrorCode::kFormatError,
                  "line " + std::to_string(lineno) + ": malformed edge");
    }
    edges.emplace_back(std::move(child), std::move(parent));
  }
  return edges;
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto edges = parse_taxonomy_edges(buf.str());
  return build_taxonomy(edges);
}

void save_taxonomy(const Taxonomy& taxonomy, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "# child\tparent\n";
  for (const auto& [child, parent] : taxonomy.edges()) {
    out << child << '\t' << parent << '\n';
  }
}

std::vector<double> leaf_softmax(std::span<const double> scores) {
  std::vector<double> p(scores.size());
  if (scores.empty()) return p;
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

CategoryProbabilities aggregate(const Taxonomy& taxonomy,
                                std::span<const double> leaf_probs) {
  if (leaf_probs.size() != taxonomy.num_leaves()) {
    throw Error(ErrorCode::kLengthMismatch,
                "got " + std::to_string(leaf_probs.size()) + " leaf probabilities for " +
                    std::to_string(taxonomy.num_leaves()) + " leaves");
  }
  CategoryProbabilities out;
  out.values.resize(taxonomy.num_nodes());
  for (Taxonomy::NodeId id = 0; id < taxonomy.num_nodes(); ++id) {
    const auto& leaves = taxonomy.descendant_leaves(id);
    if (taxonomy.is_leaf(id)) {
      out.values[id] = leaf_probs[leaves.front()];
      continue;
    }
    double sum = 0.0;
    for (std::size_t leaf : leaves) sum += leaf_probs[leaf];
    out.values[id] = sum;
  }
  return out;
}

CategoryProbabilities multisoftmax_baseline(
    const Taxonomy& taxonomy, const std::map<std::string, double>& node_scores) {
  const std::size_t n = taxonomy.num_nodes();
  CategoryProbabilities out;
  out.values.assign(n, 0.0);

  // Conditional probability of each node given its parent.
  std::vector<double> conditional(n, 1.0);
  for (Taxonomy::NodeId id = 0; id < n; ++id) {
    const auto& kids = taxonomy.children(id);
    if (kids.empty()) continue;
    std::vector<double> scores;
    scores.reserve(kids.size());
    for (auto kid : kids) {
      auto it = node_scores.find(taxonomy.nodes()[kid]);
      if (it == node_scores.end()) {
        throw Error(ErrorCode::kMissingScore, "'" + taxonomy.nodes()[kid] + "'");
      }
      scores.push_back(it->second);
    }
    auto p = leaf_softmax(scores);
    for (std::size_t k = 0; k < kids.size(); ++k) conditional[kids[k]] = p[k];
  }

  for (Taxonomy::NodeId id = 0; id < n; ++id) {
    double prob = 1.0;
    std::optional<Taxonomy::NodeId> cur = id;
    while (cur && *cur != taxonomy.root()) {
      prob *= conditional[*cur];
      cur = taxonomy.parent(*cur);
    }
    out.values[id] = prob;
  }
  return out;
}

AncestorFilterResult filter_ancestor_samples(std::span<const std::string> labels,
                                             const Taxonomy& taxonomy) {
  AncestorFilterResult result;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (taxonomy.is_leaf(taxonomy.node_id(labels[i]))) {
      result.kept.push_back(i);
    } else {
      ++result.filtered_count;
      result.filtered_categories.insert(labels[i]);
    }
  }
  return result;
}

std::size_t leaf_index(const Taxonomy& taxonomy, const std::string& name) {
  const auto id = taxonomy.node_id(name);
  if (!taxonomy.is_leaf(id)) throw Error(ErrorCode::kNotALeaf, "'" + name + "'");
  return taxonomy.descendant_leaves(id).front();
}

Taxonomy flat_taxonomy(std::span<const std::string> classes,
                       const std::string& root_name) {
  std::vector<TaxonomyEdge> edges;
  edges.reserve(classes.size());
  for (const auto& c : classes) edges.emplace_back(c, root_name);
  return build_taxonomy(edges);
}

}  // namespace csdet
