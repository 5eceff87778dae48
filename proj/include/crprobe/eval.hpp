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
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "crprobe/analysis.hpp"
#include "crprobe/ingest.hpp"

namespace crprobe {

/// Integer tallies behind Prec@k and MRR@k for one group of samples:
/// hits_at_rank[r-1] counts samples whose label sits at rank r <= k.
struct RankTally {
  std::size_t k = 10;
  std::uint64_t samples = 0;
  std::uint64_t missing = 0;  // samples without a prediction (scored as misses)
  std::vector<std::uint64_t> hits_at_rank;

  explicit RankTally(std::size_t k_ = 10) : k(k_), hits_at_rank(k_, 0) {}

  std::uint64_t hits() const {
    std::uint64_t h = 0;
    for (auto c : hits_at_rank) h += c;
    return h;
  }
  std::optional<double> precision() const {
    if (samples == 0) return std::nullopt;
    return static_cast<double>(hits()) / static_cast<double>(samples);
  }
  std::optional<double> mrr() const {
    if (samples == 0) return std::nullopt;
    double rr = 0.0;
    for (std::size_t r = 0; r < hits_at_rank.size(); ++r) {
      rr += static_cast<double>(hits_at_rank[r]) / static_cast<double>(r + 1);
    }
    return rr / static_cast<double>(samples);
  }
  void add(const RankTally& o) {
    samples += o.samples;
    missing += o.missing;
    for (std::size_t r = 0; r < hits_at_rank.size(); ++r) hits_at_rank[r] += o.hits_at_rank[r];
  }
};

/// 1-based rank of `label` within the first k entries, 0 when absent.
inline std::size_t rank_of(std::span<const ItemIndex> list, ItemIndex label, std::size_t k) {
  auto limit = std::min(k, list.size());
  for (std::size_t r = 0; r < limit; ++r) {
    if (list[r] == label) return r + 1;
  }
  return 0;
}

/// Tally over `samples` restricted to `ids` (all samples when ids is null).
inline RankTally tally_ranks(const PredictionSet& preds, const SampleSet& samples, std::size_t k,
                             const std::vector<std::uint32_t>* ids = nullptr) {
  if (k == 0) throw ConfigError("k must be >= 1");
  RankTally t(k);
  auto visit = [&](const Sample& s) {
    ++t.samples;
    auto it = preds.lists.find(s.id);
    if (it == preds.lists.end()) {
      ++t.missing;
      return;
    }
    if (auto r = rank_of(it->second, s.label, k)) ++t.hits_at_rank[r - 1];
  };
  if (!ids) {
    for (const auto& s : samples) visit(s);
    return t;
  }
  std::unordered_map<std::uint32_t, const Sample*> by_id;
  for (const auto& s : samples) by_id.emplace(s.id, &s);
  for (auto id : *ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("slice references unknown sample " + std::to_string(id));
    visit(*it->second);
  }
  return t;
}

/// Fraction of samples whose label is in the top k; nullopt for no samples.
inline std::optional<double> precision_at_k(const PredictionSet& preds, const SampleSet& samples,
                                            std::size_t k = 10) {
  return tally_ranks(preds, samples, k).precision();
}

/// Mean reciprocal rank truncated at k; nullopt for no samples.
inline std::optional<double> mrr_at_k(const PredictionSet& preds, const SampleSet& samples,
                                      std::size_t k = 10) {
  return tally_ranks(preds, samples, k).mrr();
}

struct SliceMetrics {
  std::string name;
  RankTally tally;
  bool low_confidence = false;
};

struct MetricsReport {
  std::string model;
  std::string dataset;
  std::size_t k = 10;
  std::size_t min_slice_samples = 30;
  std::vector<SliceMetrics> slices;  // "overall" first

  const SliceMetrics* find(const std::string& name) const {
    for (const auto& s : slices) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }
};

/// Overall metrics followed by one entry per slice of each partition, in
/// partition order. Slices with fewer than `min_slice_samples` samples are
/// flagged low-confidence.
inline MetricsReport evaluate_slices(const PredictionSet& preds, const SampleSet& samples,
                                     std::span<const SlicePartition> partitions, std::size_t k = 10,
                                     std::size_t min_slice_samples = 30) {
  MetricsReport report;
  report.k = k;
  report.min_slice_samples = min_slice_samples;
  auto overall = tally_ranks(preds, samples, k);
  report.slices.push_back({"overall", overall, overall.samples < min_slice_samples});
  for (const auto& partition : partitions) {
    for (const auto& [name, ids] : partition.slices) {
      auto t = tally_ranks(preds, samples, k, &ids);
      report.slices.push_back({name, t, t.samples < min_slice_samples});
    }
  }
  return report;
}

inline MetricsReport evaluate_slices(const PredictionSet& preds, const SampleSet& samples,
                                     const SlicePartition& partition, std::size_t k = 10,
                                     std::size_t min_slice_samples = 30) {
  return evaluate_slices(preds, samples, std::span<const SlicePartition>(&partition, 1), k,
                         min_slice_samples);
}

/// Percentage with two decimals, "-" for undefined.
inline std::string format_pct(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v * 100.0);
  return buf;
}

/// Aligned plain-text rendering of a report.
inline std::string format_metrics_table(const MetricsReport& r) {
  std::vector<std::array<std::string, 5>> rows;
  const std::string k = std::to_string(r.k);
  rows.push_back({"slice", "samples", "Prec@" + k, "MRR@" + k, "note"});
  for (const auto& s : r.slices) {
    rows.push_back({s.name, std::to_string(s.tally.samples), format_pct(s.tally.precision()),
                    format_pct(s.tally.mrr()), s.low_confidence ? "low-confidence" : ""});
  }
  std::array<std::size_t, 5> width{};
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out = "model: " + r.model + "  dataset: " + r.dataset + "\n";
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::string cell = row[c];
      bool right = c >= 1 && c <= 3;
      std::string pad(width[c] - cell.size(), ' ');
      line += right ? pad + cell : cell + pad;
      if (c + 1 < row.size()) line += "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparison across reports
// ---------------------------------------------------------------------------

/// One cell of the comparison matrix: value and its rank within the column
/// (1 = best, equal values share a rank).
struct ComparisonCell {
  std::optional<double> value;
  std::size_t rank = 0;
};

struct ComparisonTable {
  std::size_t k = 10;
  std::vector<std::string> models;    // rows, first-seen order
  std::vector<std::string> datasets;  // column groups, first-seen order
  // cells[row][2*dataset + metric], metric 0 = Prec, 1 = MRR
  std::vector<std::vector<ComparisonCell>> cells;
};

/// Builds a model x (dataset, metric) matrix from overall slices and ranks
/// each column in descending order.
inline ComparisonTable compare_reports(std::span<const MetricsReport> reports) {
  ComparisonTable t;
  if (reports.empty()) return t;
  t.k = reports.front().k;
  auto index_of = [](std::vector<std::string>& v, const std::string& s) {
    auto it = std::find(v.begin(), v.end(), s);
    if (it != v.end()) return static_cast<std::size_t>(it - v.begin());
    v.push_back(s);
    return v.size() - 1;
  };
  struct Entry {
    std::size_t row, dataset;
    std::optional<double> prec, mrr;
  };
  std::vector<Entry> entries;
  for (const auto& r : reports) {
    if (r.k != t.k) throw DataError("cannot compare reports with different k");
    const auto* overall = r.find("overall");
    if (!overall) throw DataError("report without an overall slice");
    entries.push_back({index_of(t.models, r.model), index_of(t.datasets, r.dataset),
                       overall->tally.precision(), overall->tally.mrr()});
  }
  t.cells.assign(t.models.size(), std::vector<ComparisonCell>(t.datasets.size() * 2));
  for (const auto& e : entries) {
    t.cells[e.row][2 * e.dataset] = {e.prec, 0};
    t.cells[e.row][2 * e.dataset + 1] = {e.mrr, 0};
  }
  for (std::size_t col = 0; col < t.datasets.size() * 2; ++col) {
    for (auto& row : t.cells) {
      if (!row[col].value) continue;
      std::size_t better = 0;
      for (const auto& other : t.cells) {
        if (other[col].value && *other[col].value > *row[col].value) ++better;
      }
      row[col].rank = better + 1;
    }
  }
  return t;
}

/// Table with the column rank appended as "^r".
inline std::string format_comparison(const ComparisonTable& t) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"method"};
  const std::string k = std::to_string(t.k);
  for (const auto& d : t.datasets) {
    header.push_back(d + " Prec@" + k);
    header.push_back(d + " MRR@" + k);
  }
  rows.push_back(header);
  for (std::size_t r = 0; r < t.models.size(); ++r) {
    std::vector<std::string> row{t.models[r]};
    for (const auto& cell : t.cells[r]) {
      row.push_back(cell.value ? format_pct(cell.value) + "^" + std::to_string(cell.rank) : "-");
    }
    rows.push_back(row);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::string pad(width[c] - row[c].size(), ' ');
      line += c == 0 ? row[c] + pad : pad + row[c];
      if (c + 1 < row.size()) line += "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace crprobe
