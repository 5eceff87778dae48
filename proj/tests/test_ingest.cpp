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
#include <random>
#include <sstream>

#include "crprobe/ingest.hpp"
#include "oracle.hpp"

namespace crprobe {
namespace {

SequenceSet from_lists(const std::vector<std::vector<std::string>>& lists) {
  std::vector<Event> events;
  std::int64_t t = 0;
  for (std::size_t s = 0; s < lists.size(); ++s) {
    for (const auto& item : lists[s]) events.push_back({"s" + std::to_string(s), item, ++t});
  }
  return build_sequences(events, Grouping::kSession);
}

TEST(ParseEvents, HeaderMappingAndErrors) {
  std::istringstream in(
      "ts\titem\tsess\n"
      "10\ta\tS1\n"
      "oops\tb\tS1\n"
      "11\t\tS1\n"
      "12\tc\n"
      "13\td\tS2\n");
  ColumnMapping m{"sess", "item", "ts", '\t', TimestampFormat::kEpochSeconds};
  auto parsed = parse_events(in, m);
  ASSERT_EQ(parsed.events.size(), 2u);
  EXPECT_EQ(parsed.events[0], (Event{"S1", "a", 10}));
  EXPECT_EQ(parsed.events[1], (Event{"S2", "d", 13}));
  EXPECT_EQ(parsed.error_count, 3u);
  EXPECT_EQ(parsed.errors[0].line, 3u);
}

TEST(ParseEvents, NumericColumnsAndIsoDates) {
  std::istringstream in("a,b,c\nX,i1,2020-01-02\nX,i2,2020-01-02T00:00:10Z\n");
  ColumnMapping m{"0", "1", "2", ',', TimestampFormat::kIsoDate};
  auto parsed = parse_events(in, m);
  ASSERT_EQ(parsed.events.size(), 1u);
  EXPECT_EQ(parsed.events[0].timestamp, 1577923200);
  std::istringstream in2("a,b,c\nX,i2,2020-01-02T00:00:10Z\nX,i3,2020-01-02 01:00:00\n");
  m.format = TimestampFormat::kIsoDateTime;
  auto p2 = parse_events(in2, m);
  ASSERT_EQ(p2.events.size(), 2u);
  EXPECT_EQ(p2.events[0].timestamp, 1577923210);
  EXPECT_EQ(p2.events[1].timestamp, 1577926800);
}

TEST(ParseEvents, UnknownColumnIsConfigError) {
  std::istringstream in("a\tb\n1\t2\n");
  EXPECT_THROW(parse_events(in, ColumnMapping{}), ConfigError);
}

TEST(BuildSequences, OrdersByTimestampWithStableTies) {
  std::vector<Event> ev{{"u", "b", 5}, {"v", "z", 1}, {"u", "a", 3}, {"u", "c", 5}};
  auto s = build_sequences(ev, Grouping::kSession);
  ASSERT_EQ(s.sequences.size(), 2u);
  std::vector<std::string> ids;
  for (auto i : s.sequences[0].items) ids.push_back(s.vocab.decode(i));
  EXPECT_EQ(ids, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(s.sequences[0].end_time, 5);
}

TEST(BuildSequences, SessionPerDaySplitsOnUtcMidnight) {
  std::vector<Event> ev{{"u", "a", 86399}, {"u", "b", 86400}, {"u", "c", 86401}};
  EXPECT_EQ(build_sequences(ev, Grouping::kSessionPerDay).sequences.size(), 2u);
  EXPECT_EQ(build_sequences(ev, Grouping::kSession).sequences.size(), 1u);
}

TEST(Preprocess, FrequencyThenLength) {
  // "rare" appears once; removing it leaves a one-item sequence.
  auto raw = from_lists({{"a", "b"}, {"a", "rare"}, {"a", "b"}});
  auto p = preprocess(raw, 2, 2);
  ASSERT_EQ(p.sequences.size(), 2u);
  EXPECT_EQ(p.vocab.size(), 2u);
  EXPECT_FALSE(p.vocab.find("rare"));
  EXPECT_EQ(p.counts, (std::vector<std::uint64_t>{2, 2}));
}

TEST(Preprocess, ExhaustedIsDataError) {
  EXPECT_THROW(preprocess(from_lists({{"a"}, {"b"}}), 5, 2), DataError);
}

TEST(Stats, CountsAndRounding) {
  auto s = from_lists({{"a", "b", "c"}, {"a", "b"}, {"c", "d", "d"}});
  auto r = dataset_stats(s);
  EXPECT_EQ(r.n_items, 4u);
  EXPECT_EQ(r.n_interactions, 8u);
  EXPECT_EQ(r.n_sequences, 3u);
  EXPECT_EQ(r.avg_length_2dp(), "2.67");
  StatsReport half{1, 1005, 1000};
  EXPECT_EQ(half.avg_length_2dp(), "1.01");
}

TEST(Stats, PermutationInvariant) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto corpus = oracle::random_corpus(rng, 20, 15, 6);
    auto a = dataset_stats(oracle::to_sequence_set(20, corpus));
    std::shuffle(corpus.begin(), corpus.end(), rng);
    for (auto& s : corpus) std::shuffle(s.begin(), s.end(), rng);
    EXPECT_EQ(a, dataset_stats(oracle::to_sequence_set(20, corpus)));
  }
}

TEST(Vocab, Bijection) {
  ItemVocab v;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) v.encode("id" + std::to_string(rng() % 200));
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto idx = static_cast<ItemIndex>(i);
    EXPECT_EQ(v.find(v.decode(idx)), idx);
  }
  EXPECT_EQ(v.encode(v.decode(0)), 0u);
}

TEST(Split, ChronologicalWithLeaveLastOut) {
  // end times 1..10, cut 7:2:1 -> train 7, valid 2, test 1.
  std::vector<std::vector<std::string>> lists;
  for (int i = 0; i < 10; ++i) lists.push_back({"a", "b", "c"});
  lists[8] = {"a", "new", "b"};  // unseen item dropped from a valid prefix
  lists[9] = {"a", "new"};       // unseen label: sample dropped
  auto split = split_chronological(from_lists(lists));
  EXPECT_EQ(split.train.sequences.size(), 7u);
  EXPECT_EQ(split.train.vocab.size(), 3u);
  EXPECT_EQ(split.valid_sequences, 2u);
  EXPECT_EQ(split.test_sequences, 1u);
  ASSERT_EQ(split.valid.size(), 2u);
  EXPECT_EQ(split.valid[1].prefix, (std::vector<ItemIndex>{0}));
  EXPECT_EQ(split.valid[1].label, 1u);
  EXPECT_TRUE(split.test.empty());
  for (std::uint32_t k = 0; k < split.train.sequences.size(); ++k) {
    EXPECT_EQ(split.train.sequences[k].id, k);
  }
}

TEST(Split, TrainPrecedesEvaluationInTime) {
  std::mt19937_64 rng(11);
  auto corpus = oracle::random_corpus(rng, 10, 40, 5);
  for (auto& s : corpus) s.push_back(0), s.push_back(1);
  auto set = oracle::to_sequence_set(10, corpus);
  std::shuffle(set.sequences.begin(), set.sequences.end(), rng);
  auto split = split_chronological(set);
  std::int64_t last_train = 0;
  for (const auto& s : split.train.sequences) {
    EXPECT_GE(s.end_time, last_train);
    last_train = s.end_time;
  }
  for (const auto& s : split.valid) EXPECT_GT(s.origin_end_time, last_train);
  for (const auto& s : split.test) EXPECT_GT(s.origin_end_time, last_train);
}

TEST(BinaryIo, RoundTrips) {
  auto s = from_lists({{"a", "b"}, {"c", "a", "b"}});
  std::stringstream seq, voc;
  write_sequences(seq, s);
  write_vocab(voc, s.vocab);
  auto back = read_sequences(seq, read_vocab(voc));
  ASSERT_EQ(back.sequences.size(), 2u);
  EXPECT_EQ(back.sequences[1].items, s.sequences[1].items);
  EXPECT_EQ(back.counts, s.counts);

  SampleSet samples{{0, {1, 2}, 0, 9}, {1, {0}, 2, 12}};
  std::stringstream sm;
  write_samples(sm, samples, 3);
  auto sb = read_samples(sm, 3);
  ASSERT_EQ(sb.size(), 2u);
  EXPECT_EQ(sb[1].id, 1u);
  EXPECT_EQ(sb[1].origin_end_time, 12);
  EXPECT_EQ(sb[0].prefix, samples[0].prefix);
  std::stringstream bad("XXXX");
  EXPECT_THROW(read_sequences(bad, ItemVocab{}), DataError);
}

}  // namespace
}  // namespace crprobe
