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

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "crprobe/analysis.hpp"
#include "oracle.hpp"

namespace crprobe {
namespace {

GlobalGraph toy_graph() {
  return build_global_graph(oracle::to_sequence_set(6, oracle::toy_corpus()));
}

SampleSet random_samples(std::mt19937_64& rng, std::size_t n, std::size_t count) {
  SampleSet out;
  for (std::uint32_t id = 0; id < count; ++id) {
    Sample s;
    s.id = id * 3 + 1;
    s.label = static_cast<ItemIndex>(rng() % n);
    auto len = 1 + rng() % 5;
    for (std::size_t p = 0; p < len; ++p) s.prefix.push_back(static_cast<ItemIndex>(rng() % n));
    out.push_back(s);
  }
  return out;
}

TEST(LabelCr, ToyRecordsAndAggregate) {
  auto a = label_cr_records(toy_graph(), oracle::toy_test_samples(), 4);
  ASSERT_EQ(a.records.size(), 3u);
  EXPECT_EQ(a.records[0].crs, (std::vector<CrClass>{CrClass::Hop(1), CrClass::Hop(0)}));
  EXPECT_EQ(a.records[1].crs, (std::vector<CrClass>{CrClass::Hop(3)}));
  EXPECT_EQ(a.records[2].crs, (std::vector<CrClass>{CrClass::Hop(1)}));
  EXPECT_EQ(a.distribution.counts, (std::vector<std::uint64_t>{1, 2, 0, 1, 0, 0}));
  EXPECT_EQ(a.distribution.observations(), 4u);
  EXPECT_EQ(a.distribution.samples, 3u);
}

TEST(LabelCr, RepeatedLabelIsHopZero) {
  SampleSet s{{0, {1, 0}, 1, 0}};
  auto a = label_cr_records(toy_graph(), s, 4);
  EXPECT_EQ(a.records[0].crs, (std::vector<CrClass>{CrClass::Hop(0), CrClass::Hop(0)}));
}

TEST(LabelCr, MatchesOracleAndWorkers) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + rng() % 20;
    auto c = oracle::random_corpus(rng, n, 12, 4);
    auto g = build_global_graph(oracle::to_sequence_set(n, c));
    auto d = oracle::all_pairs_distances(n, c);
    auto samples = random_samples(rng, n, 60);
    auto a1 = label_cr_records(g, samples, 3, true, 1);
    auto a4 = label_cr_records(g, samples, 3, true, 4);
    EXPECT_EQ(a1.distribution.counts, a4.distribution.counts);
    EXPECT_EQ(a1.samples_all_none, a4.samples_all_none);
    for (std::size_t j = 0; j < samples.size(); ++j) {
      const auto& s = samples[j];
      for (std::size_t p = 0; p < s.prefix.size(); ++p) {
        auto want = s.prefix[p] == s.label ? CrClass::Hop(0)
                                            : oracle::class_from_distance(d[s.label][s.prefix[p]], 3);
        EXPECT_EQ(a1.records[j].crs[p], want);
        EXPECT_EQ(a4.records[j].crs[p], want);
      }
    }
  }
}

TEST(Partitions, ToySlices) {
  auto recs = label_cr_records(toy_graph(), oracle::toy_test_samples(), 4).records;
  auto pure = pure_partition(recs);
  EXPECT_EQ(*pure.find("pure-0"), std::vector<std::uint32_t>{});
  EXPECT_EQ(*pure.find("pure-1"), std::vector<std::uint32_t>{2});
  EXPECT_EQ(*pure.find("pure-2"), std::vector<std::uint32_t>{});
  EXPECT_EQ(*pure.find("others"), std::vector<std::uint32_t>{1});
  auto di = direct_indirect_partition(recs);
  EXPECT_EQ(*di.find("direct"), std::vector<std::uint32_t>{0});
  EXPECT_EQ(*di.find("indirect"), (std::vector<std::uint32_t>{1, 2}));
}

TEST(Partitions, Identities) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 8 + rng() % 20;
    auto c = oracle::random_corpus(rng, n, 10, 4);
    auto g = build_global_graph(oracle::to_sequence_set(n, c));
    auto samples = random_samples(rng, n, 80);
    auto recs = label_cr_records(g, samples, 4).records;
    auto di = direct_indirect_partition(recs);
    auto& direct = *di.find("direct");
    auto& indirect = *di.find("indirect");
    EXPECT_EQ(direct.size() + indirect.size(), samples.size());
    std::set<std::uint32_t> all(direct.begin(), direct.end());
    all.insert(indirect.begin(), indirect.end());
    EXPECT_EQ(all.size(), samples.size());

    auto pure = pure_partition(recs);
    std::set<std::uint32_t> seen;
    std::size_t total = 0;
    for (const auto& [name, ids] : pure.slices) {
      total += ids.size();
      seen.insert(ids.begin(), ids.end());
    }
    EXPECT_EQ(seen.size(), total);
    std::size_t uniform = 0;
    for (const auto& r : recs) {
      bool same = std::all_of(r.crs.begin(), r.crs.end(), [&](CrClass x) { return x == r.crs[0]; });
      uniform += same;
    }
    EXPECT_EQ(total, uniform);
    // pure-0 samples are direct.
    std::set<std::uint32_t> dset(direct.begin(), direct.end());
    for (auto id : *pure.find("pure-0")) EXPECT_TRUE(dset.count(id));
  }
}

TEST(PredictionProportions, SelfPairsSkippedAndModes) {
  auto g = toy_graph();
  SampleSet s{{2, {0}, 3, 0}};
  PredictionSet p{2, {{2, {1, 5}}}};
  auto pp = prediction_cr_proportions(g, p, s, 4, CountingMode::kPerPair);
  EXPECT_DOUBLE_EQ(pp.distribution.proportion(CrClass::Hop(0)), 0.5);
  EXPECT_DOUBLE_EQ(pp.distribution.proportion(CrClass::Hop(2)), 0.5);

  SampleSet s2{{7, {0, 4, 0}, 3, 0}};
  PredictionSet p2{2, {{7, {0, 5}}, {99, {1, 2}}}};
  auto per = prediction_cr_proportions(g, p2, s2, 4, CountingMode::kPerPair);
  // x1 vs prefix: self (skipped), x5 hop1, self. x6 vs x1 hop2, x5 hop3, x1 hop2.
  EXPECT_EQ(per.distribution.counts, (std::vector<std::uint64_t>{0, 1, 2, 1, 0, 0}));
  EXPECT_EQ(per.skipped_records, 1u);
  auto near = prediction_cr_proportions(g, p2, s2, 4, CountingMode::kNearestPerItem);
  EXPECT_EQ(near.distribution.counts, (std::vector<std::uint64_t>{0, 1, 1, 0, 0, 0}));
}

TEST(PredictionProportions, SumToOne) {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 15;
    auto c = oracle::random_corpus(rng, n, 8, 4);
    auto g = build_global_graph(oracle::to_sequence_set(n, c));
    auto samples = random_samples(rng, n, 30);
    PredictionSet p{5, {}};
    for (const auto& s : samples) {
      std::vector<ItemIndex> all(n);
      std::iota(all.begin(), all.end(), 0);
      std::shuffle(all.begin(), all.end(), rng);
      all.resize(5);
      p.lists[s.id] = all;
    }
    for (auto mode : {CountingMode::kPerPair, CountingMode::kNearestPerItem}) {
      auto a1 = prediction_cr_proportions(g, p, samples, 4, mode, 1);
      auto a3 = prediction_cr_proportions(g, p, samples, 4, mode, 3);
      EXPECT_EQ(a1.distribution.counts, a3.distribution.counts);
      if (a1.distribution.observations() == 0) continue;
      double sum = 0;
      for (std::size_t sl = 0; sl < 6; ++sl) sum += a1.distribution.proportion(CrClass::from_slot(sl, 4));
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(PredictionFile, ParsesAndRejects) {
  ItemVocab v;
  for (auto id : {"x1", "x2", "x3"}) v.encode(id);
  std::istringstream in(
      "0\tx1,x2\n"
      "1\tx1\n"
      "2\tx1,zz\n"
      "3\tx2,x2\n"
      "0\tx3,x1\n"
      "bad\tx1,x2\n"
      "\n"
      "4\tx3,x1\n");
  auto r = read_prediction_file(in, v, 2);
  EXPECT_EQ(r.lines, 7u);
  EXPECT_EQ(r.bad_lines, 5u);
  EXPECT_EQ(r.predictions.lists.size(), 2u);
  EXPECT_EQ(r.predictions.lists.at(4), (std::vector<ItemIndex>{2, 0}));
  std::ostringstream out;
  write_prediction_file(out, r.predictions, v);
  EXPECT_EQ(out.str(), "0\tx1,x2\n4\tx3,x1\n");
}

}  // namespace
}  // namespace crprobe
