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


#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "crprobe/crgraph.hpp"
#include "oracle.hpp"

namespace crprobe {
namespace {

GlobalGraph graph_of(std::size_t n, const oracle::Corpus& c) {
  return build_global_graph(oracle::to_sequence_set(n, c));
}

TEST(GlobalGraph, ToyEdgesAndCounts) {
  auto g = graph_of(6, oracle::toy_corpus());
  EXPECT_EQ(g.edge_count(), 6u);
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_TRUE(g.has_edge(3, 5));
  EXPECT_FALSE(g.has_edge(0, 3));
  EXPECT_EQ(g.degree(1), 3u);
}

TEST(GlobalGraph, CoocMatchesOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto c = oracle::random_corpus(rng, 15, 20, 5);
    auto g = graph_of(15, c);
    for (ItemIndex a = 0; a < 15; ++a) {
      for (ItemIndex b = 0; b < 15; ++b) {
        if (a == b) continue;
        EXPECT_EQ(g.cooc_between(a, b), oracle::cooc(c, a, b));
        EXPECT_EQ(g.has_edge(a, b), oracle::cooc(c, a, b) > 0);
      }
    }
  }
}

TEST(GlobalGraph, FromCsrRejectsAsymmetry) {
  EXPECT_THROW(GlobalGraph::from_csr({0, 1, 1}, {1}, {1}), DataError);
  EXPECT_THROW(GlobalGraph::from_csr({0, 1, 2}, {0, 1}, {1, 1}), DataError);
  EXPECT_NO_THROW(GlobalGraph::from_csr({0, 1, 2}, {1, 0}, {2, 2}));
}

TEST(CrClass, SlotRoundTripAndNames) {
  for (unsigned h = 1; h <= 6; ++h) {
    for (std::size_t s = 0; s < h + 2; ++s) EXPECT_EQ(CrClass::from_slot(s, h).slot(h), s);
  }
  EXPECT_EQ(CrClass::Hop(2).name(), "hop2");
  EXPECT_EQ(CrClass::Others().name(), "others");
  EXPECT_EQ(CrClass::None().name(), "none");
  EXPECT_EQ(cr_slot_names(2), (std::vector<std::string>{"hop0", "hop1", "others", "none"}));
}

TEST(CrBetween, ToyValues) {
  auto g = graph_of(6, oracle::toy_corpus());
  EXPECT_EQ(cr_between(g, 0, 1, 4), CrClass::Hop(0));
  EXPECT_EQ(cr_between(g, 0, 4, 4), CrClass::Hop(1));
  EXPECT_EQ(cr_between(g, 0, 5, 4), CrClass::Hop(2));
  EXPECT_EQ(cr_between(g, 4, 5, 4), CrClass::Hop(3));
  EXPECT_EQ(cr_between(g, 4, 5, 3), CrClass::Others());
  EXPECT_THROW(cr_between(g, 2, 2, 4), std::domain_error);
}

TEST(CrBetween, MatchesOracleSymmetricAndNested) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 5 + rng() % 30;
    auto c = oracle::random_corpus(rng, n, 1 + rng() % 20, 4);
    auto g = graph_of(n, c);
    auto d = oracle::all_pairs_distances(n, c);
    for (unsigned h = 1; h <= 5; ++h) {
      CrResolver r(g, h);
      for (ItemIndex a = 0; a < n; ++a) {
        for (ItemIndex b = 0; b < n; ++b) {
          if (a == b) continue;
          auto got = r.between(a, b);
          ASSERT_EQ(got, oracle::class_from_distance(d[a][b], h)) << a << "," << b << " H=" << h;
          EXPECT_EQ(got, r.between(b, a));
          // A hop class found at depth H stays the same class at H+1.
          if (got.is_hop()) {
            EXPECT_EQ(cr_between(g, a, b, h + 1), got);
          }
        }
      }
    }
  }
}

TEST(CrBetween, TriangleInequalityOnHops) {
  std::mt19937_64 rng(23);
  auto c = oracle::random_corpus(rng, 25, 18, 4);
  auto g = graph_of(25, c);
  const unsigned h = 6;
  auto dist = [&](ItemIndex a, ItemIndex b) -> int {
    auto x = cr_between(g, a, b, h);
    return x.is_hop() ? static_cast<int>(x.hop()) + 1 : 1000;
  };
  for (ItemIndex a = 0; a < 25; ++a) {
    for (ItemIndex b = 0; b < 25; ++b) {
      for (ItemIndex m = 0; m < 25; ++m) {
        if (a == b || a == m || b == m) continue;
        EXPECT_LE(dist(a, b), dist(a, m) + dist(m, b));
      }
    }
  }
}

TEST(PairHistogram, Toy) {
  auto g = graph_of(6, oracle::toy_corpus());
  auto h = pair_class_histogram(g, 4);
  EXPECT_EQ(h.counts, (std::vector<std::uint64_t>{6, 5, 3, 1, 0, 0}));
  EXPECT_EQ(h.total_pairs, 15u);
  auto h3 = pair_class_histogram(g, 3);
  EXPECT_EQ(h3.counts, (std::vector<std::uint64_t>{6, 5, 3, 1, 0}));
}

TEST(PairHistogram, IsolatedComponentGivesNone) {
  auto c = oracle::toy_corpus();
  c.push_back({6, 7});
  auto h = pair_class_histogram(graph_of(8, c), 4);
  EXPECT_EQ(h.counts, (std::vector<std::uint64_t>{7, 5, 3, 1, 0, 12}));
  EXPECT_EQ(h.total_pairs, 28u);
  EXPECT_EQ(h.connected_pairs(), 16u);
  EXPECT_DOUBLE_EQ(h.proportion(CrClass::Hop(0), PercentBase::kAllPairs), 7.0 / 28.0);
  EXPECT_DOUBLE_EQ(h.proportion(CrClass::Hop(0), PercentBase::kConnectedPairs), 7.0 / 16.0);
}

TEST(PairHistogram, MatchesOracleAndWorkerCount) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    auto c = oracle::random_corpus(rng, n, 1 + rng() % 25, 4);
    auto g = graph_of(n, c);
    auto d = oracle::all_pairs_distances(n, c);
    for (unsigned h = 1; h <= 6; ++h) {
      std::vector<std::uint64_t> want(h + 2, 0);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) ++want[oracle::class_from_distance(d[a][b], h).slot(h)];
      EXPECT_EQ(pair_class_histogram(g, h, 1).counts, want);
      EXPECT_EQ(pair_class_histogram(g, h, 4).counts, want);
    }
  }
}

TEST(CoocHistogram, Buckets) {
  EXPECT_EQ(cooc_frequency_histogram(graph_of(6, oracle::toy_corpus())), (CoocHistogram{{1, 6}}));
  auto g = graph_of(3, {{0, 1}, {0, 1}, {0, 2}});
  EXPECT_EQ(cooc_frequency_histogram(g), (CoocHistogram{{1, 1}, {2, 1}}));
}

TEST(GraphIo, RoundTrip) {
  std::mt19937_64 rng(31);
  auto g = graph_of(20, oracle::random_corpus(rng, 20, 15, 5));
  std::stringstream ss;
  write_graph(ss, g);
  auto back = read_graph(ss);
  ASSERT_EQ(back.size(), g.size());
  for (ItemIndex i = 0; i < 20; ++i) {
    EXPECT_TRUE(std::ranges::equal(back.neighbors(i), g.neighbors(i)));
    EXPECT_TRUE(std::ranges::equal(back.cooc(i), g.cooc(i)));
  }
}

}  // namespace
}  // namespace crprobe
