#ifndef MULTIVIEW_NETCORE_HPP
#define MULTIVIEW_NETCORE_HPP

#include "multiview/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace multiview {

/// Ordered set of external node identifiers shared by the aligned views.
class NodeUniverse {
 public:
  NodeUniverse() = default;

  explicit NodeUniverse(std::vector<std::string> labels) : labels_(std::move(labels)) {
    index_.reserve(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (!index_.emplace(labels_[i], static_cast<int>(i)).second)
        throw InputError("duplicate node label '" + labels_[i] + "'");
    }
  }

  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(int i) const { return labels_.at(static_cast<std::size_t>(i)); }

  std::optional<int> find(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

using Edge = std::pair<int, int>;

/// Undirected, unweighted, loop-free graph on nodes 0..n-1. Edges are kept
/// as sorted unique pairs (i < j) plus a CSR neighbour index.
class AdjacencyView {
 public:
  AdjacencyView() = default;

  /// Accepts pairs in any orientation; duplicates collapse. Self-loops and
  /// out-of-range endpoints are rejected.
  AdjacencyView(int n, std::vector<Edge> edges) : n_(n) {
    if (n < 0) throw InputError("negative node count");
    for (auto& e : edges) {
      if (e.first == e.second) throw InputError("self-loop on node " + std::to_string(e.first));
      if (e.first < 0 || e.second < 0 || e.first >= n || e.second >= n)
        throw InputError("edge endpoint out of range");
      if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);

    offsets_.assign(static_cast<std::size_t>(n_) + 1, 0);
    for (const auto& [i, j] : edges_) {
      ++offsets_[static_cast<std::size_t>(i) + 1];
      ++offsets_[static_cast<std::size_t>(j) + 1];
    }
    for (std::size_t i = 0; i < static_cast<std::size_t>(n_); ++i) offsets_[i + 1] += offsets_[i];
    adj_.resize(offsets_.back());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (const auto& [i, j] : edges_) {
      adj_[fill[static_cast<std::size_t>(i)]++] = j;
      adj_[fill[static_cast<std::size_t>(j)]++] = i;
    }
    for (int i = 0; i < n_; ++i) {
      auto b = adj_.begin() + static_cast<std::ptrdiff_t>(offsets_[static_cast<std::size_t>(i)]);
      auto e = adj_.begin() + static_cast<std::ptrdiff_t>(offsets_[static_cast<std::size_t>(i) + 1]);
      std::sort(b, e);
    }
  }

  int n() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }

  std::span<const int> neighbors(int i) const {
    auto b = offsets_[static_cast<std::size_t>(i)];
    auto e = offsets_[static_cast<std::size_t>(i) + 1];
    return {adj_.data() + b, e - b};
  }

  bool has_edge(int i, int j) const {
    auto nb = neighbors(i);
    return std::binary_search(nb.begin(), nb.end(), j);
  }

  /// Graph with node i renamed perm[i] (P A P^T).
  AdjacencyView relabeled(const std::vector<int>& perm) const {
    std::vector<Edge> out;
    out.reserve(edges_.size());
    for (const auto& [i, j] : edges_)
      out.emplace_back(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    return AdjacencyView(n_, std::move(out));
  }

  friend bool operator==(const AdjacencyView& a, const AdjacencyView& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_;
  }

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<int> adj_;
};

using DegreeVector = std::vector<std::int64_t>;

inline DegreeVector degrees(const AdjacencyView& a) {
  DegreeVector d(static_cast<std::size_t>(a.n()));
  for (int i = 0; i < a.n(); ++i) d[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(a.neighbors(i).size());
  return d;
}

// ---------------------------------------------------------------------------
// Edge-list ingestion

struct EdgeListFormat {
  char delimiter = '\t';  // ' ' splits on runs of blanks and tabs
  char comment = '#';
  int col_a = 0;
  int col_b = 1;
  int num_columns = 2;  // exact column count; 0 accepts any count covering col_a/col_b
  int skip_lines = 0;   // header lines to drop before parsing
};

struct LabelPair {
  std::string a;
  std::string b;
  std::size_t line = 0;
};

namespace detail {

inline bool valid_utf8(const std::string& s) {
  std::size_t i = 0;
  const auto* p = reinterpret_cast<const unsigned char*>(s.data());
  while (i < s.size()) {
    unsigned char c = p[i];
    int extra = 0;
    if (c < 0x80) extra = 0;
    else if ((c >> 5) == 0x6) extra = 1;
    else if ((c >> 4) == 0xE) extra = 2;
    else if ((c >> 3) == 0x1E) extra = 3;
    else return false;
    if (i + static_cast<std::size_t>(extra) >= s.size()) return false;
    for (int k = 1; k <= extra; ++k)
      if ((p[i + static_cast<std::size_t>(k)] >> 6) != 0x2) return false;
    i += static_cast<std::size_t>(extra) + 1;
  }
  return true;
}

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  if (delim == ' ') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      out.push_back(line.substr(i, j - i));
      i = j;
    }
    return out;
  }
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Reads endpoint pairs in file order. Duplicates and self-pairs are kept;
/// cleaning happens in align_views.
inline std::vector<LabelPair> load_edge_list(std::istream& in, const EdgeListFormat& fmt = {}) {
  if (fmt.col_a < 0 || fmt.col_b < 0) throw InputError("negative column index");
  const int need = std::max(fmt.col_a, fmt.col_b) + 1;
  if (fmt.num_columns != 0 && fmt.num_columns < need)
    throw InputError("column index exceeds declared column count");

  std::vector<LabelPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (static_cast<int>(lineno) <= fmt.skip_lines) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!detail::valid_utf8(line))
      throw InputError("line " + std::to_string(lineno) + ": invalid UTF-8");
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == fmt.comment) continue;
    auto fields = detail::split_fields(line, fmt.delimiter);
    int cols = static_cast<int>(fields.size());
    if ((fmt.num_columns != 0 && cols != fmt.num_columns) || cols < need)
      throw InputError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(fmt.num_columns != 0 ? fmt.num_columns : need) +
                       " columns, found " + std::to_string(cols));
    auto& a = fields[static_cast<std::size_t>(fmt.col_a)];
    auto& b = fields[static_cast<std::size_t>(fmt.col_b)];
    if (a.empty() || b.empty())
      throw InputError("line " + std::to_string(lineno) + ": empty node label");
    pairs.push_back({std::move(a), std::move(b), lineno});
  }
  if (pairs.empty()) throw InputError("edge list is empty");
  return pairs;
}

inline std::vector<LabelPair> load_edge_list(const std::string& text, const EdgeListFormat& fmt = {}) {
  std::istringstream in(text);
  return load_edge_list(in, fmt);
}

struct IngestSummary {
  int n = 0;
  std::size_t edges_view1 = 0;
  std::optional<std::size_t> edges_view2;
  std::size_t dropped_self = 0;
  std::size_t dropped_outside = 0;
  std::size_t collapsed_duplicates = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["n"] = n;
    j["edges_view1"] = edges_view1;
    j["edges_view2"] = edges_view2 ? nlohmann::json(*edges_view2) : nlohmann::json(nullptr);
    j["dropped_self"] = dropped_self;
    j["dropped_outside"] = dropped_outside;
    j["collapsed_duplicates"] = collapsed_duplicates;
    return j;
  }
};

struct AlignedViews {
  AdjacencyView view1;
  AdjacencyView view2;
  NodeUniverse universe;
  IngestSummary summary;
};

struct SingleView {
  AdjacencyView view;
  NodeUniverse universe;
  IngestSummary summary;
};

namespace detail {

using LabelEdge = std::pair<std::string, std::string>;

// Drops self pairs, canonicalizes orientation, collapses duplicates.
inline std::vector<LabelEdge> clean_pairs(const std::vector<LabelPair>& pairs, IngestSummary& s) {
  std::vector<LabelEdge> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.a == p.b) {
      ++s.dropped_self;
      continue;
    }
    if (p.a < p.b) out.emplace_back(p.a, p.b);
    else out.emplace_back(p.b, p.a);
  }
  std::sort(out.begin(), out.end());
  auto last = std::unique(out.begin(), out.end());
  s.collapsed_duplicates += static_cast<std::size_t>(out.end() - last);
  out.erase(last, out.end());
  return out;
}

inline std::vector<std::string> touched_labels(const std::vector<LabelEdge>& edges) {
  std::vector<std::string> labels;
  labels.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    labels.push_back(a);
    labels.push_back(b);
  }
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

inline AdjacencyView index_edges(const std::vector<LabelEdge>& edges, const NodeUniverse& u,
                                 IngestSummary& s) {
  std::vector<Edge> idx;
  idx.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    auto ia = u.find(a);
    auto ib = u.find(b);
    if (!ia || !ib) {
      ++s.dropped_outside;
      continue;
    }
    idx.emplace_back(*ia, *ib);
  }
  return AdjacencyView(u.size(), std::move(idx));
}

}  // namespace detail

/// Cross-view preprocessing: remove self pairs, collapse duplicate and
/// reversed pairs, restrict both views to the nodes present in both (after
/// self-pair removal), and index them over one lexicographically sorted
/// universe.
inline AlignedViews align_views(const std::vector<LabelPair>& pairs1,
                                const std::vector<LabelPair>& pairs2) {
  if (pairs1.empty() || pairs2.empty()) throw InputError("edge list is empty");
  IngestSummary s;
  auto e1 = detail::clean_pairs(pairs1, s);
  auto e2 = detail::clean_pairs(pairs2, s);
  auto l1 = detail::touched_labels(e1);
  auto l2 = detail::touched_labels(e2);
  std::vector<std::string> shared;
  std::set_intersection(l1.begin(), l1.end(), l2.begin(), l2.end(), std::back_inserter(shared));
  if (shared.empty()) throw InputError("no shared nodes");

  NodeUniverse universe(std::move(shared));
  auto v1 = detail::index_edges(e1, universe, s);
  auto v2 = detail::index_edges(e2, universe, s);
  s.n = universe.size();
  s.edges_view1 = v1.num_edges();
  s.edges_view2 = v2.num_edges();
  return {std::move(v1), std::move(v2), std::move(universe), s};
}

/// Single-network variant. When `keep` is given, the universe is the
/// intersection of the network's nodes with `keep` (e.g. covariate rows).
inline SingleView align_single(const std::vector<LabelPair>& pairs,
                               const std::vector<std::string>* keep = nullptr) {
  if (pairs.empty()) throw InputError("edge list is empty");
  IngestSummary s;
  auto e = detail::clean_pairs(pairs, s);
  auto labels = detail::touched_labels(e);
  if (keep != nullptr) {
    std::vector<std::string> k(*keep);
    std::sort(k.begin(), k.end());
    k.erase(std::unique(k.begin(), k.end()), k.end());
    std::vector<std::string> shared;
    std::set_intersection(labels.begin(), labels.end(), k.begin(), k.end(),
                          std::back_inserter(shared));
    labels = std::move(shared);
  }
  if (labels.empty()) throw InputError("no shared nodes");
  NodeUniverse universe(std::move(labels));
  auto v = detail::index_edges(e, universe, s);
  s.n = universe.size();
  s.edges_view1 = v.num_edges();
  return {std::move(v), std::move(universe), s};
}

}  // namespace multiview

#endif  // MULTIVIEW_NETCORE_HPP
