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

// Run configuration.
//
// Grammar of the config file (UTF-8 text):
//
//   file    := { line '\n' }
//   line    := blank | comment | entry
//   comment := ws '#' any*
//   entry   := ws key ws '=' ws value ws [ '#' any* ]
//   key     := [a-z0-9_.]+
//
// Values are taken verbatim after trimming; later entries override earlier
// ones, and `preset` is applied before every explicit key regardless of its
// position. Relative paths in a file resolve against the file's directory.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "crprobe/analysis.hpp"
#include "crprobe/common.hpp"
#include "crprobe/crgraph.hpp"
#include "crprobe/ingest.hpp"
#include "crprobe/recommenders.hpp"

namespace crprobe {

struct RunConfig {
  std::string dataset = "dataset";
  std::filesystem::path input;
  ColumnMapping mapping;
  Grouping grouping = Grouping::kSession;
  std::uint64_t min_item_freq = 5;
  std::size_t min_len = 2;
  SplitRatios ratios;
  unsigned max_hop = 4;
  std::size_t k = 10;
  std::vector<std::string> models{"item-knn", "sknn", "bpr-mf"};
  std::size_t itemknn_neighbors = 100;
  SknnParams sknn;
  BprParams bpr;
  std::filesystem::path output_dir = "crprobe-out";
  std::uint64_t seed = 42;
  unsigned workers = 0;  // 0 = all hardware threads, capped by CRPROBE_WORKERS
  std::size_t clique_cap = 500;
  std::string eval_split = "test";
  std::size_t min_slice_samples = 30;
  PercentBase percent_base = PercentBase::kConnectedPairs;
  bool persist_records = false;

  /// Keys and values that determine the ingest cache, in a fixed order.
  std::string ingest_signature() const {
    std::ostringstream s;
    s << "session=" << mapping.session << "\nitem=" << mapping.item
      << "\ntimestamp=" << mapping.timestamp << "\ndelimiter=" << int(mapping.delimiter)
      << "\ntimestamp_format=" << int(mapping.format) << "\ngrouping=" << int(grouping)
      << "\nmin_item_freq=" << min_item_freq << "\nmin_len=" << min_len
      << "\nsplit=" << ratios.train << ":" << ratios.valid << ":" << ratios.test << "\n";
    return s.str();
  }
};

/// Per-benchmark column mappings for the canonical event TSV.
struct DatasetPreset {
  const char* name;
  const char* session;
  const char* item;
  const char* timestamp;
  Grouping grouping;
};

inline constexpr DatasetPreset kPresets[] = {
    {"grocery", "user_id", "item_id", "timestamp", Grouping::kSessionPerDay},
    {"cellphones", "user_id", "item_id", "timestamp", Grouping::kSessionPerDay},
    {"cosmetics", "user_session", "product_id", "timestamp", Grouping::kSession},
    {"diginetica", "session_id", "item_id", "timestamp", Grouping::kSession},
    {"yoochoose", "session_id", "item_id", "timestamp", Grouping::kSession},
    {"tmall", "user_id", "item_id", "timestamp", Grouping::kSessionPerDay},
};

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  auto parsed = parse_int(v);
  if (!parsed || *parsed < 0) throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  return static_cast<std::uint64_t>(*parsed);
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' expects true/false, got '" + v + "'");
}

}  // namespace detail

/// Ordered key/value entries plus the directory relative paths resolve to.
struct ConfigEntry {
  std::string key;
  std::string value;
  std::filesystem::path base_dir;
};

inline std::vector<ConfigEntry> parse_config_text(std::string_view text,
                                                  const std::filesystem::path& base_dir = {}) {
  std::vector<ConfigEntry> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    auto hash = raw.find('#');
    auto line = detail::trim(raw.substr(0, hash));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    auto key = detail::trim(std::string_view(line).substr(0, eq));
    auto value = detail::trim(std::string_view(line).substr(eq + 1));
    if (key.empty() || key.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789_.") !=
                           std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": bad key '" + key + "'");
    }
    entries.push_back({key, value, base_dir});
  }
  return entries;
}

inline std::vector<ConfigEntry> load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.parent_path());
}

/// "key=value" from the command line; relative paths resolve against the
/// working directory.
inline ConfigEntry parse_override(const std::string& kv) {
  auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
  return {detail::trim(std::string_view(kv).substr(0, eq)),
          detail::trim(std::string_view(kv).substr(eq + 1)), {}};
}

inline void apply_preset(RunConfig& cfg, const std::string& name) {
  for (const auto& p : kPresets) {
    if (name == p.name) {
      cfg.dataset = p.name;
      cfg.mapping.session = p.session;
      cfg.mapping.item = p.item;
      cfg.mapping.timestamp = p.timestamp;
      cfg.grouping = p.grouping;
      return;
    }
  }
  throw ConfigError("unknown dataset preset '" + name + "'");
}

inline void apply_entry(RunConfig& cfg, const ConfigEntry& e) {
  const auto& k = e.key;
  const auto& v = e.value;
  auto path = [&] {
    std::filesystem::path p(v);
    return p.is_relative() && !e.base_dir.empty() ? e.base_dir / p : p;
  };
  if (k == "preset") {
    apply_preset(cfg, v);
  } else if (k == "dataset") {
    cfg.dataset = v;
  } else if (k == "input") {
    cfg.input = path();
  } else if (k == "output_dir") {
    cfg.output_dir = path();
  } else if (k == "session_column") {
    cfg.mapping.session = v;
  } else if (k == "item_column") {
    cfg.mapping.item = v;
  } else if (k == "time_column") {
    cfg.mapping.timestamp = v;
  } else if (k == "delimiter") {
    if (v == "tab" || v == "\\t") {
      cfg.mapping.delimiter = '\t';
    } else if (v == "comma") {
      cfg.mapping.delimiter = ',';
    } else if (v.size() == 1) {
      cfg.mapping.delimiter = v[0];
    } else {
      throw ConfigError("delimiter must be a single character, 'tab' or 'comma'");
    }
  } else if (k == "timestamp_format") {
    if (v == "epoch") {
      cfg.mapping.format = TimestampFormat::kEpochSeconds;
    } else if (v == "iso-date") {
      cfg.mapping.format = TimestampFormat::kIsoDate;
    } else if (v == "iso-datetime") {
      cfg.mapping.format = TimestampFormat::kIsoDateTime;
    } else {
      throw ConfigError("timestamp_format must be epoch, iso-date or iso-datetime");
    }
  } else if (k == "grouping") {
    if (v == "session") {
      cfg.grouping = Grouping::kSession;
    } else if (v == "session-per-day") {
      cfg.grouping = Grouping::kSessionPerDay;
    } else {
      throw ConfigError("grouping must be session or session-per-day");
    }
  } else if (k == "min_item_freq") {
    cfg.min_item_freq = detail::to_uint(k, v);
  } else if (k == "min_len") {
    cfg.min_len = detail::to_uint(k, v);
  } else if (k == "split") {
    auto parts = detail::split_fields(v, ':');
    if (parts.size() != 3) throw ConfigError("split expects train:valid:test, got '" + v + "'");
    cfg.ratios = {detail::to_double(k, std::string(parts[0])),
                  detail::to_double(k, std::string(parts[1])),
                  detail::to_double(k, std::string(parts[2]))};
  } else if (k == "max_hop") {
    cfg.max_hop = static_cast<unsigned>(detail::to_uint(k, v));
  } else if (k == "k") {
    cfg.k = detail::to_uint(k, v);
  } else if (k == "models") {
    cfg.models.clear();
    for (auto m : detail::split_fields(v, ',')) {
      auto name = detail::trim(m);
      if (!name.empty()) cfg.models.push_back(name);
    }
  } else if (k == "itemknn.neighbors") {
    cfg.itemknn_neighbors = detail::to_uint(k, v);
  } else if (k == "sknn.neighbors") {
    cfg.sknn.neighbors = detail::to_uint(k, v);
  } else if (k == "sknn.sample_size") {
    cfg.sknn.sample_size = detail::to_uint(k, v);
  } else if (k == "bpr.dim") {
    cfg.bpr.dim = detail::to_uint(k, v);
  } else if (k == "bpr.learning_rate") {
    cfg.bpr.learning_rate = detail::to_double(k, v);
  } else if (k == "bpr.l2") {
    cfg.bpr.l2 = detail::to_double(k, v);
  } else if (k == "bpr.epochs") {
    cfg.bpr.epochs = detail::to_uint(k, v);
  } else if (k == "bpr.negatives") {
    cfg.bpr.negatives = detail::to_uint(k, v);
  } else if (k == "bpr.init_std") {
    cfg.bpr.init_std = detail::to_double(k, v);
  } else if (k == "seed") {
    cfg.seed = detail::to_uint(k, v);
  } else if (k == "workers") {
    cfg.workers = static_cast<unsigned>(detail::to_uint(k, v));
  } else if (k == "clique_cap") {
    cfg.clique_cap = detail::to_uint(k, v);
  } else if (k == "eval_split") {
    if (v != "test" && v != "valid") throw ConfigError("eval_split must be test or valid");
    cfg.eval_split = v;
  } else if (k == "min_slice_samples") {
    cfg.min_slice_samples = detail::to_uint(k, v);
  } else if (k == "percent_base") {
    if (v == "connected-pairs") {
      cfg.percent_base = PercentBase::kConnectedPairs;
    } else if (v == "all-pairs") {
      cfg.percent_base = PercentBase::kAllPairs;
    } else {
      throw ConfigError("percent_base must be connected-pairs or all-pairs");
    }
  } else if (k == "persist_records") {
    cfg.persist_records = detail::to_bool(k, v);
  } else {
    throw ConfigError("unknown config key '" + k + "'");
  }
}

inline void validate(const RunConfig& cfg) {
  if (cfg.max_hop < 1) throw ConfigError("max_hop (H) must be >= 1");
  if (cfg.k < 1) throw ConfigError("k must be >= 1");
  if (cfg.min_item_freq < 1) throw ConfigError("min_item_freq must be >= 1");
  if (cfg.min_len < 2) throw ConfigError("min_len must be >= 2");
  for (double r : {cfg.ratios.train, cfg.ratios.valid, cfg.ratios.test}) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("split ratios must be positive and finite");
  }
  if (cfg.bpr.dim < 1) throw ConfigError("bpr.dim must be >= 1");
  if (cfg.sknn.neighbors < 1) throw ConfigError("sknn.neighbors must be >= 1");
  if (cfg.sknn.sample_size < 1) throw ConfigError("sknn.sample_size must be >= 1");
  for (const auto& m : cfg.models) {
    if (m != "item-knn" && m != "sknn" && m != "bpr-mf") {
      throw ConfigError("unknown model '" + m + "' (expected item-knn, sknn or bpr-mf)");
    }
  }
}

/// Builds a config: preset first, then every entry in order.
inline RunConfig make_config(const std::vector<ConfigEntry>& entries) {
  RunConfig cfg;
  for (const auto& e : entries) {
    if (e.key == "preset") apply_preset(cfg, e.value);
  }
  for (const auto& e : entries) {
    if (e.key != "preset") apply_entry(cfg, e);
  }
  validate(cfg);
  return cfg;
}

}  // namespace crprobe
