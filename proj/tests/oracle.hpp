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

// Test-only reference computations. Nothing here touches GlobalGraph or the
// BFS code: distances come from Floyd-Warshall over a dense adjacency matrix
// built straight from the raw sequences.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "crprobe/crgraph.hpp"
#include "crprobe/ingest.hpp"

namespace crprobe {

inline void PrintTo(const CrClass& c, std::ostream* os) { *os << c.name(); }

}  // namespace crprobe

namespace crprobe::oracle {

using Corpus = std::vector<std::vector<std::uint32_t>>;

inline constexpr int kInf = std::numeric_limits<int>::max() / 4;

/// All-pairs shortest path lengths, kInf when disconnected, 0 on the diagonal.
inline std::vector<std::vector<int>> all_pairs_distances(std::size_t n, const Corpus& corpus) {
  std::vector<std::vector<int>> d(n, std::vector<int>(n, kInf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& seq : corpus) {
    for (auto a : seq) {
      for (auto b : seq) {
        if (a != b) d[a][b] = 1;
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (d[i][k] == kInf) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (d[k][j] != kInf && d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
      }
    }
  }
  return d;
}

inline CrClass class_from_distance(int dist, unsigned max_hop) {
  if (dist >= kInf) return CrClass::None();
  if (dist <= static_cast<int>(max_hop)) return CrClass::Hop(static_cast<unsigned>(dist - 1));
  return CrClass::Others();
}

/// Number of sequences containing both a and b.
inline std::uint32_t cooc(const Corpus& corpus, std::uint32_t a, std::uint32_t b) {
  std::uint32_t c = 0;
  for (const auto& seq : corpus) {
    bool has_a = std::find(seq.begin(), seq.end(), a) != seq.end();
    bool has_b = std::find(seq.begin(), seq.end(), b) != seq.end();
    if (has_a && has_b) ++c;
  }
  return c;
}

/// Random corpus over items 0..n-1; sequence lengths 1..max_len.
inline Corpus random_corpus(std::mt19937_64& rng, std::size_t n, std::size_t sequences,
                            std::size_t max_len) {
  std::uniform_int_distribution<std::uint32_t> item(0, static_cast<std::uint32_t>(n - 1));
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  Corpus c(sequences);
  for (auto& s : c) {
    s.resize(len(rng));
    for (auto& x : s) x = item(rng);
  }
  return c;
}

/// SequenceSet whose vocabulary is exactly items 0..n-1 ("i0", "i1", ...),
/// sequence ids in corpus order and end times 1, 2, ...
inline SequenceSet to_sequence_set(std::size_t n, const Corpus& corpus) {
  SequenceSet s;
  for (std::size_t i = 0; i < n; ++i) s.vocab.encode("i" + std::to_string(i));
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    Sequence seq;
    seq.id = static_cast<std::uint32_t>(k);
    seq.items = corpus[k];
    seq.end_time = static_cast<std::int64_t>(k + 1);
    s.sequences.push_back(std::move(seq));
  }
  s.recount();
  return s;
}

/// The four-sequence toy corpus; items x1..x6 are indices 0..5.
inline Corpus toy_corpus() { return {{0, 1, 2}, {2, 4}, {1, 3}, {3, 5}}; }

/// Test samples of the toy split, over the same indices.
inline SampleSet toy_test_samples() { return {{0, {4, 2}, 1, 802}, {1, {4}, 5, 900}, {2, {0}, 3, 1000}}; }

}  // namespace crprobe::oracle
