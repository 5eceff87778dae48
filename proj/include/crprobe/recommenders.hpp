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
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "crprobe/analysis.hpp"
#include "crprobe/common.hpp"
#include "crprobe/crgraph.hpp"
#include "crprobe/ingest.hpp"

namespace crprobe {

/// Anything that scores the full catalog for a prefix.
template <typename M>
concept Scorer = requires(const M& m, std::span<const ItemIndex> prefix,
                          std::span<double> scores) {
  { m.item_count() } -> std::convertible_to<std::size_t>;
  m.score(prefix, scores);
};

struct ScoredItem {
  ItemIndex item = 0;
  double score = 0.0;
};

/// Ranked recommendation list, best first.
using RecommendationList = std::vector<ScoredItem>;

/// Higher score first; equal scores by ascending item index.
inline bool ranks_before(const ScoredItem& a, const ScoredItem& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item < b.item;
}

/// The k best items of a score vector over the whole catalog.
inline RecommendationList top_k(std::span<const double> scores, std::size_t k) {
  if (k > scores.size()) throw ConfigError("k exceeds the number of items");
  RecommendationList all(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    all[i] = {static_cast<ItemIndex>(i), scores[i]};
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    ranks_before);
  all.resize(k);
  return all;
}

template <Scorer Model>
RecommendationList recommend_topk(const Model& model, std::span<const ItemIndex> prefix,
                                  std::size_t k = 10) {
  std::vector<double> scores(model.item_count(), 0.0);
  model.score(prefix, scores);
  return top_k(scores, k);
}

/// Full-ranking top-k lists for every sample, parallel over samples. Each
/// sample's list depends only on the model and that sample.
template <Scorer Model>
PredictionSet predict_all(const Model& model, const SampleSet& samples, std::size_t k = 10,
                          unsigned workers = 1) {
  if (k == 0) throw ConfigError("k must be >= 1");
  if (k > model.item_count()) throw ConfigError("k exceeds the number of items");
  std::vector<std::vector<ItemIndex>> lists(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t begin, std::size_t end, unsigned) {
    std::vector<double> scores(model.item_count());
    for (std::size_t j = begin; j < end; ++j) {
      std::fill(scores.begin(), scores.end(), 0.0);
      model.score(samples[j].prefix, scores);
      for (double s : scores) {
        if (!std::isfinite(s)) throw ModelError("non-finite score");
      }
      auto ranked = top_k(scores, k);
      lists[j].reserve(k);
      for (const auto& r : ranked) lists[j].push_back(r.item);
    }
  });
  PredictionSet preds;
  preds.k = k;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    preds.lists.emplace(samples[j].id, std::move(lists[j]));
  }
  return preds;
}

namespace detail {

/// Number of training sequences containing each item.
inline std::vector<std::uint32_t> sequence_frequency(const SequenceSet& train) {
  std::vector<std::uint32_t> freq(train.vocab.size(), 0);
  std::vector<ItemIndex> distinct;
  for (const auto& s : train.sequences) {
    distinct.assign(s.items.begin(), s.items.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (auto i : distinct) ++freq[i];
  }
  return freq;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Item-KNN
// ---------------------------------------------------------------------------

struct ItemNeighbor {
  ItemIndex item = 0;
  double sim = 0.0;
};

/// Item-to-item cosine similarity over binary sequence membership, truncated
/// to the best `neighbor_cap` neighbors per item.
class ItemKnnModel {
 public:
  std::size_t item_count() const { return offsets_.size() - 1; }

  std::span<const ItemNeighbor> neighbors(ItemIndex i) const {
    return {neighbors_.data() + offsets_[i], neighbors_.data() + offsets_[i + 1]};
  }

  /// Stored similarity, 0 when absent.
  double similarity(ItemIndex a, ItemIndex b) const {
    for (const auto& n : neighbors(a)) {
      if (n.item == b) return n.sim;
    }
    return 0.0;
  }

  /// Similarity to the last prefix item.
  void score(std::span<const ItemIndex> prefix, std::span<double> scores) const {
    if (prefix.empty()) return;
    for (const auto& n : neighbors(prefix.back())) scores[n.item] = n.sim;
  }

  void save(std::ostream& out) const {
    binio::put_magic(out, "IKN1");
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(item_count()));
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(neighbor_cap_));
    for (auto o : offsets_) binio::put<std::uint64_t>(out, o);
    for (const auto& n : neighbors_) {
      binio::put<std::uint32_t>(out, n.item);
      binio::put_f64(out, n.sim);
    }
  }

  static ItemKnnModel load(std::istream& in) {
    binio::expect_magic(in, "IKN1");
    ItemKnnModel m;
    auto n = binio::get<std::uint32_t>(in);
    m.neighbor_cap_ = binio::get<std::uint32_t>(in);
    m.offsets_.resize(std::size_t{n} + 1);
    for (auto& o : m.offsets_) o = binio::get<std::uint64_t>(in);
    m.neighbors_.resize(m.offsets_.back());
    for (auto& nb : m.neighbors_) {
      nb.item = binio::get<std::uint32_t>(in);
      nb.sim = binio::get_f64(in);
    }
    return m;
  }

 private:
  friend ItemKnnModel train_item_knn(const SequenceSet&, std::size_t);
  std::vector<std::uint64_t> offsets_{0};
  std::vector<ItemNeighbor> neighbors_;
  std::size_t neighbor_cap_ = 100;
};

inline ItemKnnModel train_item_knn(const SequenceSet& train, std::size_t neighbor_cap = 100) {
  const auto freq = detail::sequence_frequency(train);
  const auto graph = build_global_graph(train);
  ItemKnnModel m;
  m.neighbor_cap_ = neighbor_cap;
  m.offsets_.assign(1, 0);
  std::vector<ItemNeighbor> row;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    auto nb = graph.neighbors(static_cast<ItemIndex>(i));
    auto cc = graph.cooc(static_cast<ItemIndex>(i));
    row.clear();
    for (std::size_t k = 0; k < nb.size(); ++k) {
      double denom = std::sqrt(static_cast<double>(freq[i]) * static_cast<double>(freq[nb[k]]));
      row.push_back({nb[k], static_cast<double>(cc[k]) / denom});
    }
    auto keep = std::min(row.size(), neighbor_cap);
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(keep), row.end(),
                      [](const ItemNeighbor& a, const ItemNeighbor& b) {
                        if (a.sim != b.sim) return a.sim > b.sim;
                        return a.item < b.item;
                      });
    m.neighbors_.insert(m.neighbors_.end(), row.begin(),
                        row.begin() + static_cast<std::ptrdiff_t>(keep));
    m.offsets_.push_back(m.neighbors_.size());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Session-KNN
// ---------------------------------------------------------------------------

struct SknnParams {
  std::size_t neighbors = 500;   // k_n
  std::size_t sample_size = 5000;  // m_recent
};

struct SessionNeighbor {
  std::uint32_t sequence = 0;
  double sim = 0.0;
};

/// Session-based kNN. Candidate sessions share at least one item with the
/// prefix; the `sample_size` most recent candidates are kept, the
/// `neighbors` most similar of those (cosine over item sets) vote for their
/// items with their similarity.
class SknnModel {
 public:
  std::size_t item_count() const { return n_items_; }
  std::size_t sequence_count() const { return set_offsets_.size() - 1; }
  const SknnParams& params() const { return params_; }

  std::span<const ItemIndex> items_of(std::uint32_t seq) const {
    return {set_items_.data() + set_offsets_[seq], set_items_.data() + set_offsets_[seq + 1]};
  }

  /// Neighbor sessions for a prefix, most similar first (ties: lower id).
  std::vector<SessionNeighbor> neighbor_sessions(std::span<const ItemIndex> prefix) const {
    std::vector<ItemIndex> query(prefix.begin(), prefix.end());
    std::sort(query.begin(), query.end());
    query.erase(std::unique(query.begin(), query.end()), query.end());

    std::vector<std::uint32_t> candidates;
    for (auto item : query) {
      if (item >= n_items_) continue;
      auto begin = postings_.begin() + static_cast<std::ptrdiff_t>(post_offsets_[item]);
      auto end = postings_.begin() + static_cast<std::ptrdiff_t>(post_offsets_[item + 1]);
      candidates.insert(candidates.end(), begin, end);
    }
    // Sequence ids are chronological, so larger id = more recent.
    std::sort(candidates.begin(), candidates.end(), std::greater<>());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    if (candidates.size() > params_.sample_size) candidates.resize(params_.sample_size);

    std::vector<SessionNeighbor> scored;
    scored.reserve(candidates.size());
    for (auto seq : candidates) {
      auto items = items_of(seq);
      std::size_t overlap = 0;
      auto a = query.begin();
      auto b = items.begin();
      while (a != query.end() && b != items.end()) {
        if (*a < *b) {
          ++a;
        } else if (*b < *a) {
          ++b;
        } else {
          ++overlap;
          ++a;
          ++b;
        }
      }
      double sim = static_cast<double>(overlap) /
                   std::sqrt(static_cast<double>(query.size()) * static_cast<double>(items.size()));
      scored.push_back({seq, sim});
    }
    auto keep = std::min(scored.size(), params_.neighbors);
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                      scored.end(), [](const SessionNeighbor& x, const SessionNeighbor& y) {
                        if (x.sim != y.sim) return x.sim > y.sim;
                        return x.sequence < y.sequence;
                      });
    scored.resize(keep);
    return scored;
  }

  void score(std::span<const ItemIndex> prefix, std::span<double> scores) const {
    for (const auto& nb : neighbor_sessions(prefix)) {
      for (auto item : items_of(nb.sequence)) scores[item] += nb.sim;
    }
  }

  void save(std::ostream& out) const {
    binio::put_magic(out, "SKN1");
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(n_items_));
    binio::put<std::uint64_t>(out, params_.neighbors);
    binio::put<std::uint64_t>(out, params_.sample_size);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(sequence_count()));
    for (std::uint32_t s = 0; s < sequence_count(); ++s) {
      auto items = items_of(s);
      binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(items.size()));
      for (auto i : items) binio::put<std::uint32_t>(out, i);
    }
  }

  static SknnModel load(std::istream& in) {
    binio::expect_magic(in, "SKN1");
    auto n_items = binio::get<std::uint32_t>(in);
    SknnParams params;
    params.neighbors = binio::get<std::uint64_t>(in);
    params.sample_size = binio::get<std::uint64_t>(in);
    auto count = binio::get<std::uint32_t>(in);
    std::vector<std::vector<ItemIndex>> sets(count);
    for (auto& set : sets) {
      set.resize(binio::get<std::uint32_t>(in));
      for (auto& i : set) i = binio::get<std::uint32_t>(in);
    }
    return SknnModel(n_items, std::move(sets), params);
  }

 private:
  friend SknnModel train_sknn(const SequenceSet&, SknnParams);

  SknnModel(std::size_t n_items, std::vector<std::vector<ItemIndex>> sets, SknnParams params)
      : n_items_(n_items), params_(params) {
    if (params_.neighbors < 1) throw ConfigError("SKNN neighborhood size must be >= 1");
    if (params_.sample_size < 1) throw ConfigError("SKNN sample size must be >= 1");
    set_offsets_.assign(1, 0);
    std::vector<std::uint64_t> df(n_items_ + 1, 0);
    for (auto& set : sets) {
      std::sort(set.begin(), set.end());
      set.erase(std::unique(set.begin(), set.end()), set.end());
      for (auto i : set) {
        if (i >= n_items_) throw DataError("SKNN item index out of range");
        ++df[i];
      }
      set_items_.insert(set_items_.end(), set.begin(), set.end());
      set_offsets_.push_back(set_items_.size());
    }
    post_offsets_.assign(n_items_ + 1, 0);
    for (std::size_t i = 0; i < n_items_; ++i) post_offsets_[i + 1] = post_offsets_[i] + df[i];
    postings_.resize(post_offsets_[n_items_]);
    auto fill = post_offsets_;
    for (std::uint32_t s = 0; s < sets.size(); ++s) {
      for (auto i : sets[s]) postings_[fill[i]++] = s;
    }
  }

  std::size_t n_items_ = 0;
  SknnParams params_;
  std::vector<std::uint64_t> set_offsets_;
  std::vector<ItemIndex> set_items_;
  std::vector<std::uint64_t> post_offsets_;
  std::vector<std::uint32_t> postings_;  // item -> sequences, ascending
};

/// Indexes the training sequences. Sequence ids must be chronological (as
/// produced by split_chronological) for the recency window to mean "most
/// recent".
inline SknnModel train_sknn(const SequenceSet& train, SknnParams params = {}) {
  std::vector<std::vector<ItemIndex>> sets;
  sets.reserve(train.sequences.size());
  for (const auto& s : train.sequences) sets.push_back(s.items);
  return SknnModel(train.vocab.size(), std::move(sets), params);
}

// ---------------------------------------------------------------------------
// BPR-MF
// ---------------------------------------------------------------------------

struct BprParams {
  std::size_t dim = 128;
  double learning_rate = 0.05;
  double l2 = 1e-5;
  std::size_t epochs = 30;
  std::size_t negatives = 1;
  double init_std = 0.1;
};

/// Matrix factorization with a shared item factor matrix. A sequence is
/// represented by the mean factor of its (context) items and scores an item
/// by dot product.
class BprMfModel {
 public:
  BprMfModel() = default;
  BprMfModel(std::size_t n_items, std::size_t dim)
      : n_items_(n_items), dim_(dim), factors_(n_items * dim, 0.0) {
    if (dim < 1) throw ConfigError("BPR dimension must be >= 1");
  }

  std::size_t item_count() const { return n_items_; }
  std::size_t dim() const { return dim_; }
  std::span<double> factor(ItemIndex i) { return {factors_.data() + std::size_t{i} * dim_, dim_}; }
  std::span<const double> factor(ItemIndex i) const {
    return {factors_.data() + std::size_t{i} * dim_, dim_};
  }
  const std::vector<double>& factors() const { return factors_; }

  /// Mean factor of the given items.
  std::vector<double> represent(std::span<const ItemIndex> items) const {
    std::vector<double> u(dim_, 0.0);
    if (items.empty()) return u;
    for (auto i : items) {
      auto f = factor(i);
      for (std::size_t d = 0; d < dim_; ++d) u[d] += f[d];
    }
    const double inv = 1.0 / static_cast<double>(items.size());
    for (auto& x : u) x *= inv;
    return u;
  }

  double score_item(std::span<const double> u, ItemIndex i) const {
    auto f = factor(i);
    double s = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) s += u[d] * f[d];
    return s;
  }

  void score(std::span<const ItemIndex> prefix, std::span<double> scores) const {
    auto u = represent(prefix);
    for (std::size_t i = 0; i < n_items_; ++i) scores[i] = score_item(u, static_cast<ItemIndex>(i));
  }

  void save(std::ostream& out) const {
    binio::put_magic(out, "BPR1");
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(n_items_));
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
    for (double x : factors_) binio::put_f64(out, x);
  }

  static BprMfModel load(std::istream& in) {
    binio::expect_magic(in, "BPR1");
    auto n = binio::get<std::uint32_t>(in);
    auto d = binio::get<std::uint32_t>(in);
    BprMfModel m(n, d);
    for (auto& x : m.factors_) x = binio::get_f64(in);
    return m;
  }

 private:
  std::size_t n_items_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> factors_;
};

struct BprTrainingResult {
  BprMfModel model;
  double initial_loss = 0.0;         // mean BPR loss of the epoch-1 draws before any update
  std::vector<double> epoch_losses;  // mean BPR loss over each epoch's updates
};

namespace detail {

inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

struct BprTriple {
  std::uint32_t sequence;
  std::uint32_t position;
};

}  // namespace detail

/// Trains with SGD on the pairwise ranking loss -ln sigmoid(s(pos) - s(neg))
/// plus L2. Each (sequence, position) is a positive whose context is the
/// rest of the sequence; negatives are drawn uniformly from items outside the
/// sequence. Single-threaded and seed-deterministic.
inline BprTrainingResult train_bpr_mf(const SequenceSet& train, const BprParams& hp,
                                      std::uint64_t seed,
                                      const std::function<void(std::size_t, double)>& log = {}) {
  if (hp.dim < 1) throw ConfigError("BPR dimension must be >= 1");
  if (!(hp.learning_rate > 0.0) || !std::isfinite(hp.learning_rate)) {
    throw ConfigError("BPR learning rate must be positive");
  }
  if (hp.l2 < 0.0) throw ConfigError("BPR L2 weight must be >= 0");
  const auto n = train.vocab.size();
  const auto dim = hp.dim;
  BprTrainingResult result{BprMfModel(n, dim), 0.0, {}};
  auto& model = result.model;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> init(0.0, hp.init_std);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : model.factor(static_cast<ItemIndex>(i))) x = init(rng);
  }

  std::vector<std::vector<ItemIndex>> members(train.sequences.size());
  std::vector<detail::BprTriple> triples;
  for (std::uint32_t s = 0; s < train.sequences.size(); ++s) {
    const auto& items = train.sequences[s].items;
    members[s] = items;
    std::sort(members[s].begin(), members[s].end());
    members[s].erase(std::unique(members[s].begin(), members[s].end()), members[s].end());
    if (items.size() < 2 || members[s].size() >= n) continue;  // no context or no negatives
    for (std::uint32_t p = 0; p < items.size(); ++p) triples.push_back({s, p});
  }

  std::vector<double> u(dim), diff(dim);
  auto draw_negative = [&](std::mt19937_64& gen, std::uint32_t s) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (true) {
      auto c = static_cast<ItemIndex>(pick(gen));
      if (!std::binary_search(members[s].begin(), members[s].end(), c)) return c;
    }
  };
  auto context_mean = [&](std::uint32_t s, std::uint32_t pos) {
    const auto& items = train.sequences[s].items;
    std::fill(u.begin(), u.end(), 0.0);
    for (std::uint32_t p = 0; p < items.size(); ++p) {
      if (p == pos) continue;
      auto f = model.factor(items[p]);
      for (std::size_t d = 0; d < dim; ++d) u[d] += f[d];
    }
    const double inv = 1.0 / static_cast<double>(items.size() - 1);
    for (auto& x : u) x *= inv;
  };

  // One pass over the epoch's draws; when `update` is false only the loss is
  // measured. Draw order and values depend only on the generator state.
  auto pass = [&](std::mt19937_64& gen, bool update) {
    std::vector<std::size_t> order(triples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), gen);
    double loss = 0.0;
    std::size_t terms = 0;
    const double lr = hp.learning_rate;
    for (auto t : order) {
      const auto [s, pos] = triples[t];
      const auto& items = train.sequences[s].items;
      const ItemIndex positive = items[pos];
      for (std::size_t r = 0; r < hp.negatives; ++r) {
        const ItemIndex negative = draw_negative(gen, s);
        context_mean(s, pos);
        auto fp = model.factor(positive);
        auto fn = model.factor(negative);
        double x = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          diff[d] = fp[d] - fn[d];
          x += u[d] * diff[d];
        }
        loss -= detail::log_sigmoid(x);
        ++terms;
        if (!update) continue;
        const double g = 1.0 / (1.0 + std::exp(x));  // sigmoid(-x)
        const double share = g / static_cast<double>(items.size() - 1);
        for (std::size_t d = 0; d < dim; ++d) {
          fp[d] += lr * (g * u[d] - hp.l2 * fp[d]);
          fn[d] += lr * (-g * u[d] - hp.l2 * fn[d]);
        }
        for (std::uint32_t p = 0; p < items.size(); ++p) {
          if (p == pos) continue;
          auto fc = model.factor(items[p]);
          for (std::size_t d = 0; d < dim; ++d) fc[d] += lr * (share * diff[d] - hp.l2 * fc[d]);
        }
      }
    }
    return terms ? loss / static_cast<double>(terms) : 0.0;
  };

  {
    auto probe = rng;
    result.initial_loss = pass(probe, false);
  }
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    double loss = pass(rng, true);
    if (!std::isfinite(loss) ||
        !std::all_of(model.factors().begin(), model.factors().end(),
                     [](double x) { return std::isfinite(x); })) {
      throw ModelError("BPR-MF diverged in epoch " + std::to_string(epoch + 1) +
                       " (loss " + std::to_string(loss) + "); lower the learning rate");
    }
    result.epoch_losses.push_back(loss);
    if (log) log(epoch + 1, loss);
  }
  return result;
}

}  // namespace crprobe
