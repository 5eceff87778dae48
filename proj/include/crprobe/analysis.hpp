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
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crprobe/common.hpp"
#include "crprobe/crgraph.hpp"
#include "crprobe/ingest.hpp"

namespace crprobe {

/// CR between a sample's label and each prefix position, in prefix order.
/// A prefix item equal to the label (repeat consumption) is recorded as
/// Hop(0).
struct LabelCrRecord {
  std::uint32_t sample_id = 0;
  std::vector<CrClass> crs;
};

enum class CountingMode {
  kPerPair,        // one observation per (item, prefix item) pair
  kNearestPerItem, // one observation per item: its closest CR to the prefix
};

inline std::string to_string(CountingMode m) {
  return m == CountingMode::kPerPair ? "per-pair" : "nearest-per-item";
}

/// Observation counts by CR slot.
struct CrDistribution {
  unsigned max_hop = 4;
  CountingMode mode = CountingMode::kPerPair;
  std::vector<std::uint64_t> counts;  // by CrClass::slot
  std::uint64_t samples = 0;

  explicit CrDistribution(unsigned h = 4, CountingMode m = CountingMode::kPerPair)
      : max_hop(h), mode(m), counts(std::size_t{h} + 2, 0) {}

  std::uint64_t observations() const {
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
  std::uint64_t count(CrClass c) const { return counts.at(c.slot(max_hop)); }
  double proportion(CrClass c) const {
    auto total = observations();
    return total ? static_cast<double>(count(c)) / static_cast<double>(total) : 0.0;
  }
  void merge(const CrDistribution& other) {
    for (std::size_t s = 0; s < counts.size(); ++s) counts[s] += other.counts[s];
    samples += other.samples;
  }
};

struct LabelCrAnalysis {
  std::vector<LabelCrRecord> records;  // empty unless requested
  CrDistribution distribution;
  std::uint64_t samples_all_none = 0;  // label disconnected from every prefix item
};

namespace detail {

inline LabelCrRecord label_record(CrResolver& resolver, const Sample& s) {
  LabelCrRecord rec;
  rec.sample_id = s.id;
  rec.crs.reserve(s.prefix.size());
  resolver.anchor(s.label);
  for (auto item : s.prefix) {
    rec.crs.push_back(item == s.label ? CrClass::Hop(0) : resolver.classify(item));
  }
  return rec;
}

}  // namespace detail

/// Label CR sequence for every sample plus the per-pair aggregate over all
/// (label, prefix item) observations. Records are returned in sample order
/// when `keep_records` is set; the aggregate is computed either way.
inline LabelCrAnalysis label_cr_records(const GlobalGraph& g, const SampleSet& samples,
                                        unsigned max_hop, bool keep_records = true,
                                        unsigned workers = 1) {
  auto components = component_labels(g);
  workers = std::max(1u, workers);
  std::vector<CrDistribution> partial(workers, CrDistribution(max_hop));
  std::vector<std::uint64_t> all_none(workers, 0);
  std::vector<LabelCrRecord> records(keep_records ? samples.size() : 0);
  parallel_for(samples.size(), workers, [&](std::size_t begin, std::size_t end, unsigned w) {
    CrResolver resolver(g, max_hop, components);
    for (std::size_t k = begin; k < end; ++k) {
      const auto& s = samples[k];
      if (s.label >= g.size()) throw DataError("sample label outside graph vocabulary");
      auto rec = detail::label_record(resolver, s);
      bool none_only = !rec.crs.empty();
      for (auto c : rec.crs) {
        ++partial[w].counts[c.slot(max_hop)];
        none_only = none_only && c == CrClass::None();
      }
      ++partial[w].samples;
      if (none_only) ++all_none[w];
      if (keep_records) records[k] = std::move(rec);
    }
  });
  LabelCrAnalysis out;
  out.distribution = CrDistribution(max_hop);
  for (unsigned w = 0; w < workers; ++w) {
    out.distribution.merge(partial[w]);
    out.samples_all_none += all_none[w];
  }
  out.records = std::move(records);
  return out;
}

/// Named slices of sample ids, in a fixed slice order; ids within a slice
/// ascending.
struct SlicePartition {
  std::vector<std::pair<std::string, std::vector<std::uint32_t>>> slices;

  const std::vector<std::uint32_t>* find(const std::string& name) const {
    for (const auto& [n, ids] : slices) {
      if (n == name) return &ids;
    }
    return nullptr;
  }
};

inline constexpr const char* kPureSliceNames[] = {"pure-0", "pure-1", "pure-2", "others"};

/// Samples whose label CR sequence holds a single class. Uniform Hop(0),
/// Hop(1), Hop(2) records get their own slice; uniform records in any more
/// complex class (Hop(3)+, Others, None) land in "others"; mixed records in
/// no slice.
inline SlicePartition pure_partition(const std::vector<LabelCrRecord>& records) {
  SlicePartition p;
  for (auto name : kPureSliceNames) p.slices.emplace_back(name, std::vector<std::uint32_t>{});
  for (const auto& r : records) {
    if (r.crs.empty()) continue;
    const auto first = r.crs.front();
    if (!std::all_of(r.crs.begin(), r.crs.end(), [&](CrClass c) { return c == first; })) {
      continue;
    }
    std::size_t slot = first.is_hop() && first.hop() <= 2 ? first.hop() : 3;
    p.slices[slot].second.push_back(r.sample_id);
  }
  for (auto& [name, ids] : p.slices) std::sort(ids.begin(), ids.end());
  return p;
}

/// "direct": the label has Hop(0) with at least one prefix item;
/// "indirect": every other sample.
inline SlicePartition direct_indirect_partition(const std::vector<LabelCrRecord>& records) {
  SlicePartition p;
  p.slices.emplace_back("direct", std::vector<std::uint32_t>{});
  p.slices.emplace_back("indirect", std::vector<std::uint32_t>{});
  for (const auto& r : records) {
    bool direct = std::any_of(r.crs.begin(), r.crs.end(),
                              [](CrClass c) { return c == CrClass::Hop(0); });
    p.slices[direct ? 0 : 1].second.push_back(r.sample_id);
  }
  for (auto& [name, ids] : p.slices) std::sort(ids.begin(), ids.end());
  return p;
}

// ---------------------------------------------------------------------------
// Predictions
// ---------------------------------------------------------------------------

/// Top-k recommendation lists keyed by sample id.
struct PredictionSet {
  std::size_t k = 10;
  std::map<std::uint32_t, std::vector<ItemIndex>> lists;
};

struct PredictionCrAudit {
  CrDistribution distribution;
  std::uint64_t skipped_records = 0;  // sample id not in the sample set
};

/// CR classes between predicted items and the prefix they were predicted
/// from. Self-pairs (a predicted item equal to a prefix item) are not
/// counted. In per-pair mode every (predicted, prefix position) pair is one
/// observation; in nearest-per-item mode each predicted item contributes its
/// lowest-slot class over the prefix.
inline PredictionCrAudit prediction_cr_proportions(const GlobalGraph& g,
                                                   const PredictionSet& preds,
                                                   const SampleSet& samples,
                                                   unsigned max_hop,
                                                   CountingMode mode = CountingMode::kPerPair,
                                                   unsigned workers = 1) {
  std::unordered_map<std::uint32_t, const Sample*> by_id;
  for (const auto& s : samples) by_id.emplace(s.id, &s);
  std::vector<std::pair<const Sample*, const std::vector<ItemIndex>*>> jobs;
  PredictionCrAudit out;
  out.distribution = CrDistribution(max_hop, mode);
  for (const auto& [id, list] : preds.lists) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      ++out.skipped_records;
      continue;
    }
    jobs.emplace_back(it->second, &list);
  }

  auto components = component_labels(g);
  workers = std::max(1u, workers);
  std::vector<CrDistribution> partial(workers, CrDistribution(max_hop, mode));
  const std::size_t none_slot = std::size_t{max_hop} + 1;
  parallel_for(jobs.size(), workers, [&](std::size_t begin, std::size_t end, unsigned w) {
    CrResolver resolver(g, max_hop, components);
    std::vector<std::pair<ItemIndex, std::uint32_t>> prefix_counts;
    std::vector<std::size_t> nearest;
    for (std::size_t j = begin; j < end; ++j) {
      const auto& sample = *jobs[j].first;
      const auto& list = *jobs[j].second;
      prefix_counts.clear();
      for (auto x : sample.prefix) prefix_counts.emplace_back(x, 1);
      std::sort(prefix_counts.begin(), prefix_counts.end());
      std::size_t out_i = 0;
      for (std::size_t i = 0; i < prefix_counts.size(); ++i) {
        if (out_i > 0 && prefix_counts[out_i - 1].first == prefix_counts[i].first) {
          ++prefix_counts[out_i - 1].second;
        } else {
          prefix_counts[out_i++] = prefix_counts[i];
        }
      }
      prefix_counts.resize(out_i);
      nearest.assign(list.size(), none_slot + 1);  // sentinel: no partner yet

      for (const auto& [x, mult] : prefix_counts) {
        if (x >= g.size()) throw DataError("prefix item outside graph vocabulary");
        resolver.anchor(x);
        for (std::size_t p = 0; p < list.size(); ++p) {
          auto y = list[p];
          if (y == x) continue;
          if (y >= g.size()) throw DataError("predicted item outside graph vocabulary");
          auto slot = resolver.classify(y).slot(max_hop);
          if (mode == CountingMode::kPerPair) {
            partial[w].counts[slot] += mult;
          } else {
            nearest[p] = std::min(nearest[p], slot);
          }
        }
      }
      if (mode == CountingMode::kNearestPerItem) {
        for (auto slot : nearest) {
          if (slot <= none_slot) ++partial[w].counts[slot];
        }
      }
      ++partial[w].samples;
    }
  });
  for (const auto& p : partial) out.distribution.merge(p);
  return out;
}

// ---------------------------------------------------------------------------
// Prediction files: "sample_id<TAB>item,item,...,item", opaque item ids.
// ---------------------------------------------------------------------------

struct PredictionFileReport {
  PredictionSet predictions;
  std::size_t lines = 0;
  std::size_t bad_lines = 0;
  std::vector<RowError> errors;  // first ParsedEvents::kMaxRecordedErrors
};

inline void write_prediction_file(std::ostream& out, const PredictionSet& preds,
                                  const ItemVocab& vocab) {
  for (const auto& [id, list] : preds.lists) {
    out << id << '\t';
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i) out << ',';
      out << vocab.decode(list[i]);
    }
    out << '\n';
  }
}

/// Parses a prediction file. Lines with a bad sample id, a list that is not
/// exactly k distinct items, an unknown item id, or a repeated sample id are
/// skipped and counted.
inline PredictionFileReport read_prediction_file(std::istream& in, const ItemVocab& vocab,
                                                 std::size_t k) {
  PredictionFileReport report;
  report.predictions.k = k;
  std::string line;
  std::size_t line_no = 0;
  auto bad = [&](std::string reason) {
    ++report.bad_lines;
    if (report.errors.size() < ParsedEvents::kMaxRecordedErrors) {
      report.errors.push_back({line_no, std::move(reason)});
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++report.lines;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      bad("missing tab separator");
      continue;
    }
    auto id = detail::parse_int(std::string_view(line).substr(0, tab));
    if (!id || *id < 0 || *id > UINT32_MAX) {
      bad("bad sample id");
      continue;
    }
    auto fields = detail::split_fields(std::string_view(line).substr(tab + 1), ',');
    if (fields.size() != k) {
      bad("expected " + std::to_string(k) + " items, got " + std::to_string(fields.size()));
      continue;
    }
    std::vector<ItemIndex> list;
    list.reserve(k);
    bool ok = true;
    for (auto f : fields) {
      auto idx = vocab.find(f);
      if (!idx) {
        bad("unknown item id '" + std::string(f) + "'");
        ok = false;
        break;
      }
      list.push_back(*idx);
    }
    if (!ok) continue;
    auto sorted = list;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      bad("duplicate item in recommendation list");
      continue;
    }
    auto [it, inserted] =
        report.predictions.lists.emplace(static_cast<std::uint32_t>(*id), std::move(list));
    if (!inserted) bad("duplicate sample id");
  }
  return report;
}

// Label-record audit file: "sample_id<TAB>class,class,..." in sample order.
inline void write_label_records(std::ostream& out, const std::vector<LabelCrRecord>& records) {
  for (const auto& r : records) {
    out << r.sample_id << '\t';
    for (std::size_t i = 0; i < r.crs.size(); ++i) {
      if (i) out << ',';
      out << r.crs[i].name();
    }
    out << '\n';
  }
}

}  // namespace crprobe
