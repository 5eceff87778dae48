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

// JSON forms of every artifact the pipeline emits. Each document carries
// "schema_version" and "kind"; the matching JSON Schemas live in schemas/.

#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "json.hpp"

#include "crprobe/analysis.hpp"
#include "crprobe/crgraph.hpp"
#include "crprobe/eval.hpp"
#include "crprobe/ingest.hpp"

namespace crprobe::json_out {

using nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline ordered_json header(const char* kind) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  return j;
}

inline ordered_json optional_number(std::optional<double> v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

inline ordered_json stats(const StatsReport& s, const std::string& dataset) {
  auto j = header("dataset_stats");
  j["dataset"] = dataset;
  j["items"] = s.n_items;
  j["interactions"] = s.n_interactions;
  j["sequences"] = s.n_sequences;
  j["avg_length"] = std::stod(s.avg_length_2dp());
  j["avg_length_exact"] = {{"numerator", s.n_interactions}, {"denominator", s.n_sequences}};
  return j;
}

inline ordered_json class_map(const std::vector<std::uint64_t>& counts, unsigned max_hop) {
  ordered_json m = ordered_json::object();
  for (std::size_t s = 0; s < counts.size(); ++s) {
    m[CrClass::from_slot(s, max_hop).name()] = counts[s];
  }
  return m;
}

inline ordered_json pair_histogram(const CrHistogram& h, PercentBase base) {
  auto j = header("pair_class_histogram");
  j["max_hop"] = h.max_hop;
  j["classes"] = class_map(h.counts, h.max_hop);
  j["total_pairs"] = h.total_pairs;
  j["connected_pairs"] = h.connected_pairs();
  j["percent_base"] = base == PercentBase::kAllPairs ? "all-pairs" : "connected-pairs";
  auto props = [&](PercentBase b) {
    ordered_json m = ordered_json::object();
    for (std::size_t s = 0; s < h.counts.size(); ++s) {
      auto c = CrClass::from_slot(s, h.max_hop);
      m[c.name()] = h.proportion(c, b);
    }
    return m;
  };
  j["proportions"] = props(base);
  j["proportions_all_pairs"] = props(PercentBase::kAllPairs);
  j["proportions_connected_pairs"] = props(PercentBase::kConnectedPairs);
  return j;
}

inline ordered_json distribution_body(ordered_json j, const CrDistribution& d) {
  j["max_hop"] = d.max_hop;
  j["mode"] = to_string(d.mode);
  j["samples"] = d.samples;
  j["observations"] = d.observations();
  j["counts"] = class_map(d.counts, d.max_hop);
  ordered_json p = ordered_json::object();
  for (std::size_t s = 0; s < d.counts.size(); ++s) {
    auto c = CrClass::from_slot(s, d.max_hop);
    p[c.name()] = d.proportion(c);
  }
  j["proportions"] = p;
  return j;
}

inline ordered_json label_distribution(const LabelCrAnalysis& a, const std::string& split) {
  auto j = header("label_cr_distribution");
  j["split"] = split;
  j = distribution_body(std::move(j), a.distribution);
  j["samples_all_none"] = a.samples_all_none;
  return j;
}

inline ordered_json cooc_histogram(const CoocHistogram& h) {
  auto j = header("cooc_histogram");
  std::uint64_t edges = 0;
  ordered_json buckets = ordered_json::array();
  for (const auto& [f, c] : h) {
    buckets.push_back({{"frequency", f}, {"pairs", c}});
    edges += c;
  }
  j["edges"] = edges;
  j["buckets"] = buckets;
  return j;
}

inline ordered_json partition_counts(const SlicePartition& p, const char* kind,
                                     std::size_t total_samples) {
  auto j = header(kind);
  j["samples"] = total_samples;
  ordered_json m = ordered_json::object();
  for (const auto& [name, ids] : p.slices) m[name] = ids.size();
  j["slices"] = m;
  return j;
}

inline ordered_json prediction_proportions(const PredictionCrAudit& a, const std::string& model,
                                           std::size_t k, std::size_t bad_lines) {
  auto j = header("prediction_cr_proportions");
  j["model"] = model;
  j["k"] = k;
  j = distribution_body(std::move(j), a.distribution);
  j["skipped_records"] = a.skipped_records;
  j["bad_lines"] = bad_lines;
  return j;
}

inline ordered_json metrics(const MetricsReport& r) {
  auto j = header("metrics_report");
  j["model"] = r.model;
  j["dataset"] = r.dataset;
  j["k"] = r.k;
  j["min_slice_samples"] = r.min_slice_samples;
  ordered_json slices = ordered_json::array();
  for (const auto& s : r.slices) {
    ordered_json e;
    e["name"] = s.name;
    e["samples"] = s.tally.samples;
    e["missing"] = s.tally.missing;
    e["hits"] = s.tally.hits();
    e["prec_at_k"] = optional_number(s.tally.precision());
    e["mrr_at_k"] = optional_number(s.tally.mrr());
    e["hits_at_rank"] = s.tally.hits_at_rank;
    e["low_confidence"] = s.low_confidence;
    slices.push_back(std::move(e));
  }
  j["slices"] = slices;
  return j;
}

inline MetricsReport parse_metrics(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "metrics_report") {
      throw DataError("not a metrics report");
    }
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw DataError("unsupported metrics schema version");
    }
    MetricsReport r;
    r.model = j.at("model").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.k = j.at("k").get<std::size_t>();
    r.min_slice_samples = j.at("min_slice_samples").get<std::size_t>();
    for (const auto& e : j.at("slices")) {
      SliceMetrics s{e.at("name").get<std::string>(), RankTally(r.k), false};
      s.tally.samples = e.at("samples").get<std::uint64_t>();
      s.tally.missing = e.at("missing").get<std::uint64_t>();
      s.tally.hits_at_rank = e.at("hits_at_rank").get<std::vector<std::uint64_t>>();
      if (s.tally.hits_at_rank.size() != r.k) throw DataError("hits_at_rank length != k");
      s.low_confidence = e.at("low_confidence").get<bool>();
      r.slices.push_back(std::move(s));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed metrics report: ") + e.what());
  }
}

inline ordered_json comparison(const ComparisonTable& t) {
  auto j = header("comparison");
  j["k"] = t.k;
  j["datasets"] = t.datasets;
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < t.models.size(); ++r) {
    ordered_json cells = ordered_json::array();
    for (std::size_t c = 0; c < t.cells[r].size(); ++c) {
      const auto& cell = t.cells[r][c];
      cells.push_back({{"dataset", t.datasets[c / 2]},
                       {"metric", c % 2 == 0 ? "prec_at_k" : "mrr_at_k"},
                       {"value", optional_number(cell.value)},
                       {"rank", cell.value ? ordered_json(cell.rank) : ordered_json(nullptr)}});
    }
    rows.push_back({{"model", t.models[r]}, {"cells", cells}});
  }
  j["rows"] = rows;
  return j;
}

}  // namespace crprobe::json_out
