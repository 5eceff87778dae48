/*
 * Copyright 2026 The crprobe Authors.
 *
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

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "crprobe/common.hpp"
#include "crprobe/ingest.hpp"

namespace crprobe {

/// Undirected, unweighted item co-occurrence graph in CSR form. Every stored
/// edge carries the number of training sequences in which both endpoints
/// appear. Immutable once built.
class GlobalGraph {
 public:
  GlobalGraph() : offsets_(1, 0) {}

  /// Adopts CSR arrays after checking symmetry, ordering and counts.
  static GlobalGraph from_csr(std::vector<std::uint64_t> offsets,
                              std::vector<ItemIndex> neighbors,
                              std::vector<std::uint32_t> cooc) {
    GlobalGraph g;
    g.offsets_ = std::move(offsets);
    g.neighbors_ = std::move(neighbors);
    g.cooc_ = std::move(cooc);
    g.validate();
    return g;
  }

  std::size_t size() const { return offsets_.size() - 1; }
  std::uint64_t edge_count() const { return neighbors_.size() / 2; }

  std::span<const ItemIndex> neighbors(ItemIndex i) const {
    return {neighbors_.data() + offsets_[i], neighbors_.data() + offsets_[i + 1]};
  }
  std::span<const std::uint32_t> cooc(ItemIndex i) const {
    return {cooc_.data() + offsets_[i], cooc_.data() + offsets_[i + 1]};
  }
  std::size_t degree(ItemIndex i) const { return offsets_[i + 1] - offsets_[i]; }

  /// Co-occurrence count of the pair, 0 when no edge.
  std::uint32_t cooc_between(ItemIndex a, ItemIndex b) const {
    auto nb = neighbors(a);
    auto it = std::lower_bound(nb.begin(), nb.end(), b);
    if (it == nb.end() || *it != b) return 0;
    return cooc(a)[static_cast<std::size_t>(it - nb.begin())];
  }
  bool has_edge(ItemIndex a, ItemIndex b) const { return cooc_between(a, b) > 0; }

  const std::vector<std::uint64_t>& offsets() const { return offsets_; }
  const std::vector<ItemIndex>& neighbor_array() const { return neighbors_; }
  const std::vector<std::uint32_t>& cooc_array() const { return cooc_; }

  bool operator==(const GlobalGraph&) const = default;

 private:
  void validate() const {
    if (offsets_.empty() || offsets_.front() != 0 ||
        offsets_.back() != neighbors_.size() || cooc_.size() != neighbors_.size()) {
      throw DataError("inconsistent CSR arrays");
    }
    const auto n = size();
    for (std::size_t i = 0; i < n; ++i) {
      if (offsets_[i] > offsets_[i + 1]) throw DataError("CSR offsets not monotone");
      auto nb = neighbors(static_cast<ItemIndex>(i));
      auto cc = cooc(static_cast<ItemIndex>(i));
      for (std::size_t k = 0; k < nb.size(); ++k) {
        if (nb[k] >= n) throw DataError("neighbor index out of range");
        if (nb[k] == i) throw DataError("self-loop in co-occurrence graph");
        if (k > 0 && nb[k - 1] >= nb[k]) throw DataError("neighbor list not strictly sorted");
        if (cc[k] == 0) throw DataError("edge with zero co-occurrence");
        if (cooc_between(nb[k], static_cast<ItemIndex>(i)) != cc[k]) {
          throw DataError("co-occurrence graph is not symmetric");
        }
      }
    }
  }

  std::vector<std::uint64_t> offsets_;
  std::vector<ItemIndex> neighbors_;
  std::vector<std::uint32_t> cooc_;
};

struct GraphBuildOptions {
  std::size_t clique_cap = 500;
  std::function<void(const std::string&)> warn;
};

/// Unions the per-sequence cliques of distinct items. Repeated items inside a
/// sequence count once, so an edge's co-occurrence is the number of
/// sequences containing both endpoints.
inline GlobalGraph build_global_graph(const SequenceSet& train,
                                      const GraphBuildOptions& options = {}) {
  const auto n = train.vocab.size();
  std::vector<std::uint64_t> pairs;
  std::vector<ItemIndex> distinct;
  for (const auto& s : train.sequences) {
    distinct.assign(s.items.begin(), s.items.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() > options.clique_cap && options.warn) {
      options.warn("sequence " + std::to_string(s.id) + " has " +
                   std::to_string(distinct.size()) +
                   " distinct items (clique cap " +
                   std::to_string(options.clique_cap) + "); building full clique");
    }
    for (std::size_t a = 0; a < distinct.size(); ++a) {
      if (distinct[a] >= n) throw DataError("item index out of vocabulary");
      for (std::size_t b = a + 1; b < distinct.size(); ++b) {
        pairs.push_back((std::uint64_t{distinct[a]} << 32) | distinct[b]);
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());

  std::vector<std::uint64_t> degree(n + 1, 0);
  for (std::size_t k = 0; k < pairs.size();) {
    std::size_t run = k;
    while (run < pairs.size() && pairs[run] == pairs[k]) ++run;
    ++degree[pairs[k] >> 32];
    ++degree[pairs[k] & 0xFFFFFFFFu];
    k = run;
  }
  std::vector<std::uint64_t> offsets(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] = offsets[i] + degree[i];
  std::vector<ItemIndex> neighbors(offsets[n]);
  std::vector<std::uint32_t> cooc(offsets[n]);
  std::vector<std::uint64_t> fill(offsets.begin(), offsets.end() - 1);
  // Pairs are sorted by (low, high); appending in that order leaves every
  // neighbor list sorted without a second pass.
  for (std::size_t k = 0; k < pairs.size();) {
    std::size_t run = k;
    while (run < pairs.size() && pairs[run] == pairs[k]) ++run;
    auto lo = static_cast<ItemIndex>(pairs[k] >> 32);
    auto hi = static_cast<ItemIndex>(pairs[k] & 0xFFFFFFFFu);
    auto count = static_cast<std::uint32_t>(run - k);
    neighbors[fill[lo]] = hi;
    cooc[fill[lo]++] = count;
    neighbors[fill[hi]] = lo;
    cooc[fill[hi]++] = count;
    k = run;
  }
  GlobalGraph g;
  g = GlobalGraph::from_csr(std::move(offsets), std::move(neighbors), std::move(cooc));
  return g;
}

// ---------------------------------------------------------------------------
// Collaborative relation classes
// ---------------------------------------------------------------------------

/// Hop-level collaborative relation between two distinct items:
/// Hop(h) when the shortest path has length h + 1 (h < max_hop), Others when
/// a longer path exists, None when the items are disconnected.
class CrClass {
 public:
  enum class Kind : std::uint8_t { kHop, kOthers, kNone };

  static constexpr CrClass Hop(unsigned h) { return CrClass(Kind::kHop, h); }
  static constexpr CrClass Others() { return CrClass(Kind::kOthers, 0); }
  static constexpr CrClass None() { return CrClass(Kind::kNone, 0); }

  /// Inverse of slot(): 0..H-1 are hops, H is Others, H+1 is None.
  static constexpr CrClass from_slot(std::size_t slot, unsigned max_hop) {
    if (slot < max_hop) return Hop(static_cast<unsigned>(slot));
    return slot == max_hop ? Others() : None();
  }

  constexpr Kind kind() const { return kind_; }
  constexpr bool is_hop() const { return kind_ == Kind::kHop; }
  constexpr unsigned hop() const { return hop_; }

  /// Dense index ordered by increasing complexity.
  constexpr std::size_t slot(unsigned max_hop) const {
    switch (kind_) {
      case Kind::kHop: return hop_;
      case Kind::kOthers: return max_hop;
      case Kind::kNone: return std::size_t{max_hop} + 1;
    }
    return std::size_t{max_hop} + 1;
  }

  std::string name() const {
    switch (kind_) {
      case Kind::kHop: return "hop" + std::to_string(hop_);
      case Kind::kOthers: return "others";
      case Kind::kNone: return "none";
    }
    return "none";
  }

  constexpr bool operator==(const CrClass&) const = default;

 private:
  constexpr CrClass(Kind k, unsigned h) : kind_(k), hop_(h) {}
  Kind kind_;
  unsigned hop_;
};

/// Names of all slots under a given max hop, in slot order.
inline std::vector<std::string> cr_slot_names(unsigned max_hop) {
  std::vector<std::string> names;
  for (std::size_t s = 0; s < std::size_t{max_hop} + 2; ++s) {
    names.push_back(CrClass::from_slot(s, max_hop).name());
  }
  return names;
}

// ---------------------------------------------------------------------------
// Breadth-first search
// ---------------------------------------------------------------------------

/// Reusable BFS scratch space. The visited array is stamped with a per-search
/// epoch so consecutive searches never clear it.
class BfsWorkspace {
 public:
  explicit BfsWorkspace(std::size_t n = 0) : stamp_(n, 0), depth_(n, 0) {}

  /// Depth-capped BFS from `source`. on_level(depth, frontier) is called for
  /// every non-empty level 1..max_depth. Returns when the frontier empties,
  /// max_depth is reached, or on_level returns false.
  template <typename OnLevel>
  void run(const GlobalGraph& g, ItemIndex source, std::size_t max_depth,
           OnLevel&& on_level) {
    begin(g.size());
    mark(source, 0);
    current_.assign(1, source);
    for (std::size_t depth = 1; depth <= max_depth && !current_.empty(); ++depth) {
      next_.clear();
      for (auto u : current_) {
        for (auto v : g.neighbors(u)) {
          if (stamp_[v] != epoch_) {
            mark(v, static_cast<std::uint32_t>(depth));
            next_.push_back(v);
          }
        }
      }
      current_.swap(next_);
      if (current_.empty()) break;
      if (!on_level(depth, std::span<const ItemIndex>(current_))) break;
    }
  }

  /// Depth recorded by the most recent run, or 0 when `v` was not reached
  /// (the source itself also reports 0).
  std::uint32_t depth_of(ItemIndex v) const {
    return stamp_[v] == epoch_ ? depth_[v] : 0;
  }
  bool reached(ItemIndex v) const { return stamp_[v] == epoch_; }

 private:
  void begin(std::size_t n) {
    if (stamp_.size() != n) {
      stamp_.assign(n, 0);
      depth_.assign(n, 0);
      epoch_ = 0;
    }
    if (++epoch_ == 0) {  // wrapped: reset stamps once every 2^32 searches
      std::fill(stamp_.begin(), stamp_.end(), 0);
      epoch_ = 1;
    }
  }
  void mark(ItemIndex v, std::uint32_t depth) {
    stamp_[v] = epoch_;
    depth_[v] = depth;
  }

  std::vector<std::uint32_t> stamp_;
  std::vector<std::uint32_t> depth_;
  std::uint32_t epoch_ = 0;
  std::vector<ItemIndex> current_;
  std::vector<ItemIndex> next_;
};

/// Items at exact shortest-path distance d from `source`, for d = 1..max_hop+1.
/// Entry d-1 holds depth d, each sorted ascending.
inline std::vector<std::vector<ItemIndex>> bfs_frontiers(const GlobalGraph& g,
                                                         ItemIndex source,
                                                         unsigned max_hop) {
  if (source >= g.size()) throw std::out_of_range("bfs source out of range");
  std::vector<std::vector<ItemIndex>> frontiers(std::size_t{max_hop} + 1);
  BfsWorkspace ws(g.size());
  ws.run(g, source, std::size_t{max_hop} + 1, [&](std::size_t depth, auto level) {
    frontiers[depth - 1].assign(level.begin(), level.end());
    std::sort(frontiers[depth - 1].begin(), frontiers[depth - 1].end());
    return true;
  });
  return frontiers;
}

/// Connected-component label per item, labels numbered by smallest member.
inline std::vector<std::uint32_t> component_labels(const GlobalGraph& g) {
  constexpr auto kUnset = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> label(g.size(), kUnset);
  std::vector<ItemIndex> stack;
  std::uint32_t next = 0;
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (label[s] != kUnset) continue;
    label[s] = next;
    stack.assign(1, static_cast<ItemIndex>(s));
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (auto v : g.neighbors(u)) {
        if (label[v] == kUnset) {
          label[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  return label;
}

/// Answers CR queries against one graph. Holds component labels (to tell
/// Others from None without an unbounded search) and BFS scratch space, so
/// one resolver per thread.
class CrResolver {
 public:
  CrResolver(const GlobalGraph& g, unsigned max_hop)
      : graph_(&g), max_hop_(max_hop), components_(component_labels(g)), ws_(g.size()) {
    if (max_hop < 1) throw ConfigError("max hop H must be >= 1");
  }
  CrResolver(const GlobalGraph& g, unsigned max_hop,
             std::vector<std::uint32_t> components)
      : graph_(&g), max_hop_(max_hop), components_(std::move(components)), ws_(g.size()) {
    if (max_hop < 1) throw ConfigError("max hop H must be >= 1");
  }

  unsigned max_hop() const { return max_hop_; }
  const GlobalGraph& graph() const { return *graph_; }

  CrClass between(ItemIndex a, ItemIndex b) {
    if (a == b) throw std::domain_error("collaborative relation needs distinct items");
    if (a >= graph_->size() || b >= graph_->size()) {
      throw std::out_of_range("item index out of range");
    }
    if (components_[a] != components_[b]) return CrClass::None();
    if (graph_->has_edge(a, b)) return CrClass::Hop(0);
    // Search from the lower-degree endpoint.
    if (graph_->degree(b) < graph_->degree(a)) std::swap(a, b);
    std::size_t found = 0;
    ws_.run(*graph_, a, max_hop_, [&](std::size_t depth, auto) {
      if (ws_.reached(b)) {
        found = depth;
        return false;
      }
      return true;
    });
    if (found) return CrClass::Hop(static_cast<unsigned>(found - 1));
    return CrClass::Others();
  }

  /// Bounded BFS from `anchor`; afterwards classify() answers CR(anchor, x)
  /// in O(1) for any x != anchor.
  void anchor(ItemIndex a) {
    if (a >= graph_->size()) throw std::out_of_range("item index out of range");
    anchor_ = a;
    ws_.run(*graph_, a, max_hop_, [](std::size_t, auto) { return true; });
  }
  CrClass classify(ItemIndex x) const {
    if (x == anchor_) throw std::domain_error("collaborative relation needs distinct items");
    if (ws_.reached(x)) return CrClass::Hop(ws_.depth_of(x) - 1);
    return components_[x] == components_[anchor_] ? CrClass::Others() : CrClass::None();
  }

 private:
  const GlobalGraph* graph_;
  unsigned max_hop_;
  std::vector<std::uint32_t> components_;
  BfsWorkspace ws_;
  ItemIndex anchor_ = 0;
};

/// CR of a single pair. For bulk queries keep a CrResolver instead.
inline CrClass cr_between(const GlobalGraph& g, ItemIndex a, ItemIndex b,
                          unsigned max_hop) {
  CrResolver resolver(g, max_hop);
  return resolver.between(a, b);
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

enum class PercentBase {
  kConnectedPairs,  // pairs with some CR (excludes None)
  kAllPairs,
};

struct CrHistogram {
  unsigned max_hop = 4;
  std::vector<std::uint64_t> counts;  // by slot: hop0..hop{H-1}, others, none
  std::uint64_t total_pairs = 0;

  std::uint64_t count(CrClass c) const { return counts.at(c.slot(max_hop)); }
  std::uint64_t connected_pairs() const { return total_pairs - count(CrClass::None()); }
  double proportion(CrClass c, PercentBase base) const {
    auto denom = base == PercentBase::kAllPairs ? total_pairs : connected_pairs();
    if (c.kind() == CrClass::Kind::kNone && base == PercentBase::kConnectedPairs) {
      return 0.0;
    }
    return denom ? static_cast<double>(count(c)) / static_cast<double>(denom) : 0.0;
  }
};

/// Distribution of CR classes over all unordered item pairs, from one
/// depth-capped BFS per source. Pairs beyond depth H are split into Others
/// and None via component sizes, so no pair list is ever materialized.
/// Per-worker integer tallies make the result independent of scheduling.
inline CrHistogram pair_class_histogram(const GlobalGraph& g, unsigned max_hop,
                                        unsigned workers = 1) {
  if (max_hop < 1) throw ConfigError("max hop H must be >= 1");
  const auto n = g.size();
  workers = std::max(1u, workers);
  std::vector<std::vector<std::uint64_t>> tallies(workers,
                                                  std::vector<std::uint64_t>(max_hop, 0));
  parallel_for(n, workers, [&](std::size_t begin, std::size_t end, unsigned w) {
    BfsWorkspace ws(n);
    auto& tally = tallies[w];
    for (std::size_t s = begin; s < end; ++s) {
      ws.run(g, static_cast<ItemIndex>(s), max_hop, [&](std::size_t depth, auto level) {
        tally[depth - 1] += level.size();
        return true;
      });
    }
  });

  CrHistogram h;
  h.max_hop = max_hop;
  h.counts.assign(std::size_t{max_hop} + 2, 0);
  h.total_pairs = static_cast<std::uint64_t>(n) * (n ? n - 1 : 0) / 2;
  std::uint64_t within = 0;
  for (unsigned d = 0; d < max_hop; ++d) {
    std::uint64_t ordered = 0;
    for (const auto& t : tallies) ordered += t[d];
    h.counts[d] = ordered / 2;
    within += h.counts[d];
  }
  auto labels = component_labels(g);
  std::vector<std::uint64_t> comp_size(n, 0);
  for (auto l : labels) ++comp_size[l];
  std::uint64_t connected = 0;
  for (auto s : comp_size) connected += s * (s ? s - 1 : 0) / 2;
  h.counts[max_hop] = connected - within;
  h.counts[std::size_t{max_hop} + 1] = h.total_pairs - connected;
  return h;
}

/// Number of edges per co-occurrence count, ascending by count.
using CoocHistogram = std::map<std::uint32_t, std::uint64_t>;

inline CoocHistogram cooc_frequency_histogram(const GlobalGraph& g) {
  CoocHistogram h;
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto nb = g.neighbors(static_cast<ItemIndex>(i));
    auto cc = g.cooc(static_cast<ItemIndex>(i));
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (nb[k] > i) ++h[cc[k]];
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Graph cache "CRG1":
//   magic[4] | u32 n | u64 edge_count |
//   u64 offsets[n+1] | u32 neighbors[2*edge_count] | u32 cooc[2*edge_count]
// ---------------------------------------------------------------------------

inline void write_graph(std::ostream& out, const GlobalGraph& g) {
  binio::put_magic(out, "CRG1");
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.size()));
  binio::put<std::uint64_t>(out, g.edge_count());
  for (auto o : g.offsets()) binio::put<std::uint64_t>(out, o);
  for (auto v : g.neighbor_array()) binio::put<std::uint32_t>(out, v);
  for (auto c : g.cooc_array()) binio::put<std::uint32_t>(out, c);
}

inline GlobalGraph read_graph(std::istream& in) {
  binio::expect_magic(in, "CRG1");
  auto n = binio::get<std::uint32_t>(in);
  auto edges = binio::get<std::uint64_t>(in);
  std::vector<std::uint64_t> offsets(std::size_t{n} + 1);
  for (auto& o : offsets) o = binio::get<std::uint64_t>(in);
  std::vector<ItemIndex> neighbors(edges * 2);
  for (auto& v : neighbors) v = binio::get<std::uint32_t>(in);
  std::vector<std::uint32_t> cooc(edges * 2);
  for (auto& c : cooc) c = binio::get<std::uint32_t>(in);
  return GlobalGraph::from_csr(std::move(offsets), std::move(neighbors), std::move(cooc));
}

}  // namespace crprobe
