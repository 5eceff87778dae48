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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crprobe/common.hpp"

namespace crprobe {

// ---------------------------------------------------------------------------
// Raw events
// ---------------------------------------------------------------------------

struct Event {
  std::string session_id;
  std::string item_id;
  std::int64_t timestamp = 0;

  bool operator==(const Event&) const = default;
};

enum class TimestampFormat {
  kEpochSeconds,  // integer seconds since 1970-01-01 UTC
  kIsoDate,       // YYYY-MM-DD, midnight UTC
  kIsoDateTime,   // YYYY-MM-DD[T ]HH:MM:SS, trailing fraction/zone ignored
};

/// Which columns of a delimited file hold the session, item and timestamp.
/// A column is named by its header label; a purely numeric reference that
/// matches no header label is taken as a 0-based column position.
struct ColumnMapping {
  std::string session = "session_id";
  std::string item = "item_id";
  std::string timestamp = "timestamp";
  char delimiter = '\t';
  TimestampFormat format = TimestampFormat::kEpochSeconds;
};

struct RowError {
  std::size_t line = 0;  // 1-based line number in the input
  std::string reason;
};

struct ParsedEvents {
  std::vector<Event> events;
  std::size_t error_count = 0;
  std::vector<RowError> errors;  // first kMaxRecordedErrors only
  static constexpr std::size_t kMaxRecordedErrors = 100;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line,
                                                  char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return c >= '0' && c <= '9';
  });
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool neg = false;
  std::size_t i = 0;
  if (s[0] == '-' || s[0] == '+') {
    neg = s[0] == '-';
    i = 1;
  }
  if (i == s.size()) return std::nullopt;
  std::int64_t v = 0;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (c < '0' || c > '9') return std::nullopt;
    if (v > (INT64_MAX - (c - '0')) / 10) return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return neg ? -v : v;
}

inline std::optional<std::int64_t> parse_timestamp(std::string_view s,
                                                   TimestampFormat format) {
  using namespace std::chrono;
  if (format == TimestampFormat::kEpochSeconds) return parse_int(s);
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto y = parse_int(s.substr(0, 4));
  auto m = parse_int(s.substr(5, 2));
  auto d = parse_int(s.substr(8, 2));
  if (!y || !m || !d) return std::nullopt;
  year_month_day ymd{year{static_cast<int>(*y)},
                     month{static_cast<unsigned>(*m)},
                     day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t secs = duration_cast<seconds>(sys_days{ymd}.time_since_epoch()).count();
  if (format == TimestampFormat::kIsoDate) {
    return s.size() == 10 ? std::optional(secs) : std::nullopt;
  }
  if (s.size() < 19 || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':') {
    return std::nullopt;
  }
  auto hh = parse_int(s.substr(11, 2));
  auto mm = parse_int(s.substr(14, 2));
  auto ss = parse_int(s.substr(17, 2));
  if (!hh || !mm || !ss || *hh > 23 || *mm > 59 || *ss > 60) return std::nullopt;
  return secs + *hh * 3600 + *mm * 60 + *ss;
}

inline std::size_t resolve_column(const std::vector<std::string_view>& header,
                                  const std::string& ref,
                                  std::string_view role) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == ref) return i;
  }
  if (all_digits(ref)) {
    auto idx = static_cast<std::size_t>(std::stoull(ref));
    if (idx < header.size()) return idx;
  }
  throw ConfigError("mapped " + std::string(role) + " column '" + ref +
                    "' not present in input header");
}

}  // namespace detail

/// Reads delimiter-separated events with a header row. Rows that cannot be
/// turned into an Event are skipped and counted; a mapping that names a
/// column absent from the header is a ConfigError.
inline ParsedEvents parse_events(std::istream& input,
                                 const ColumnMapping& mapping) {
  ParsedEvents result;
  std::string line;
  std::size_t line_no = 0;
  auto record_error = [&](std::string reason) {
    ++result.error_count;
    if (result.errors.size() < ParsedEvents::kMaxRecordedErrors) {
      result.errors.push_back({line_no, std::move(reason)});
    }
  };

  if (!std::getline(input, line)) return result;  // no header, no data
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  auto header = detail::split_fields(line, mapping.delimiter);
  const std::size_t session_col =
      detail::resolve_column(header, mapping.session, "session");
  const std::size_t item_col = detail::resolve_column(header, mapping.item, "item");
  const std::size_t time_col =
      detail::resolve_column(header, mapping.timestamp, "timestamp");
  const std::size_t needed = std::max({session_col, item_col, time_col}) + 1;

  while (std::getline(input, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_fields(line, mapping.delimiter);
    if (fields.size() < needed) {
      record_error("expected at least " + std::to_string(needed) +
                   " fields, got " + std::to_string(fields.size()));
      continue;
    }
    auto session = fields[session_col];
    auto item = fields[item_col];
    if (session.empty() || item.empty()) {
      record_error("empty session or item id");
      continue;
    }
    auto ts = detail::parse_timestamp(fields[time_col], mapping.format);
    if (!ts) {
      record_error("unparsable timestamp '" + std::string(fields[time_col]) + "'");
      continue;
    }
    if (*ts < 0) {
      record_error("negative timestamp");
      continue;
    }
    result.events.push_back({std::string(session), std::string(item), *ts});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Sequences
// ---------------------------------------------------------------------------

/// Bidirectional map between opaque item IDs and dense indices.
class ItemVocab {
 public:
  ItemIndex encode(std::string_view id) {
    auto it = index_.find(std::string(id));
    if (it != index_.end()) return it->second;
    auto idx = static_cast<ItemIndex>(ids_.size());
    ids_.emplace_back(id);
    index_.emplace(ids_.back(), idx);
    return idx;
  }
  std::optional<ItemIndex> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& decode(ItemIndex idx) const { return ids_.at(idx); }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, ItemIndex> index_;
};

struct Sequence {
  std::uint32_t id = 0;
  std::vector<ItemIndex> items;
  std::int64_t end_time = 0;
};

struct SequenceSet {
  std::vector<Sequence> sequences;
  ItemVocab vocab;
  std::vector<std::uint64_t> counts;  // per item, total occurrences

  std::size_t item_count() const { return vocab.size(); }
  std::uint64_t interaction_count() const {
    std::uint64_t n = 0;
    for (const auto& s : sequences) n += s.items.size();
    return n;
  }
  void recount() {
    counts.assign(vocab.size(), 0);
    for (const auto& s : sequences) {
      for (auto i : s.items) ++counts.at(i);
    }
  }
};

enum class Grouping {
  kSession,        // one sequence per session field value
  kSessionPerDay,  // one sequence per (session field, UTC day)
};

/// Groups events into sequences. Group order, sequence ids and the item
/// vocabulary follow first appearance in the event list; items inside a
/// sequence are ordered by timestamp with ties kept in input order.
inline SequenceSet build_sequences(std::span<const Event> events,
                                   Grouping grouping) {
  if (events.empty()) throw DataError("no events to group into sequences");
  SequenceSet out;
  std::unordered_map<std::string, std::size_t> group_of;
  std::vector<std::vector<std::pair<std::int64_t, ItemIndex>>> groups;
  std::string key;
  for (const auto& e : events) {
    key = e.session_id;
    if (grouping == Grouping::kSessionPerDay) {
      key.push_back('\x1f');
      key += std::to_string(e.timestamp / 86400);
    }
    auto [it, inserted] = group_of.try_emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].emplace_back(e.timestamp, out.vocab.encode(e.item_id));
  }
  out.sequences.reserve(groups.size());
  for (auto& g : groups) {
    std::stable_sort(g.begin(), g.end(), [](const auto& a, const auto& b) {
      return a.first < b.first;
    });
    Sequence s;
    s.id = static_cast<std::uint32_t>(out.sequences.size());
    s.items.reserve(g.size());
    for (const auto& [ts, item] : g) s.items.push_back(item);
    s.end_time = g.back().first;
    out.sequences.push_back(std::move(s));
  }
  out.recount();
  return out;
}

/// Drops items with fewer than `min_item_freq` interactions, then sequences
/// shorter than `min_len`. One pass each, no iteration to a fixpoint. The
/// surviving vocabulary keeps its relative order; sequence ids are
/// re-densified in their existing order.
inline SequenceSet preprocess(const SequenceSet& raw, std::uint64_t min_item_freq = 5,
                              std::size_t min_len = 2) {
  if (min_item_freq < 1) throw ConfigError("min_item_freq must be >= 1");
  if (min_len < 2) throw ConfigError("min_len must be >= 2");
  std::vector<std::uint64_t> counts(raw.vocab.size(), 0);
  for (const auto& s : raw.sequences) {
    for (auto i : s.items) ++counts[i];
  }
  std::vector<bool> keep_item(raw.vocab.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    keep_item[i] = counts[i] >= min_item_freq;
  }

  std::vector<std::vector<ItemIndex>> filtered;
  std::vector<std::int64_t> end_times;
  for (const auto& s : raw.sequences) {
    std::vector<ItemIndex> items;
    for (auto i : s.items) {
      if (keep_item[i]) items.push_back(i);
    }
    if (items.size() >= min_len) {
      filtered.push_back(std::move(items));
      end_times.push_back(s.end_time);
    }
  }
  if (filtered.empty()) throw DataError("dataset exhausted by filters");

  std::vector<bool> used(raw.vocab.size(), false);
  for (const auto& items : filtered) {
    for (auto i : items) used[i] = true;
  }
  SequenceSet out;
  std::vector<ItemIndex> remap(raw.vocab.size(), 0);
  for (std::size_t i = 0; i < raw.vocab.size(); ++i) {
    if (used[i]) remap[i] = out.vocab.encode(raw.vocab.decode(static_cast<ItemIndex>(i)));
  }
  out.sequences.reserve(filtered.size());
  for (std::size_t k = 0; k < filtered.size(); ++k) {
    Sequence s;
    s.id = static_cast<std::uint32_t>(k);
    s.end_time = end_times[k];
    s.items.reserve(filtered[k].size());
    for (auto i : filtered[k]) s.items.push_back(remap[i]);
    out.sequences.push_back(std::move(s));
  }
  out.recount();
  return out;
}

// ---------------------------------------------------------------------------
// Splits and samples
// ---------------------------------------------------------------------------

/// A (prefix, label) evaluation sample produced by leave-last-out.
struct Sample {
  std::uint32_t id = 0;
  std::vector<ItemIndex> prefix;
  ItemIndex label = 0;
  std::int64_t origin_end_time = 0;
};

using SampleSet = std::vector<Sample>;

struct StatsReport {
  std::uint64_t n_items = 0;
  std::uint64_t n_interactions = 0;
  std::uint64_t n_sequences = 0;

  /// n_interactions / n_sequences, rounded half-up to two decimals.
  std::string avg_length_2dp() const {
    if (n_sequences == 0) return "0.00";
    // Exact integer rounding avoids binary floating point at the boundary.
    std::uint64_t scaled = (n_interactions * 200 + n_sequences) / (2 * n_sequences);
    std::string frac = std::to_string(scaled % 100);
    if (frac.size() < 2) frac.insert(0, "0");
    return std::to_string(scaled / 100) + "." + frac;
  }
  double avg_length() const {
    return n_sequences ? static_cast<double>(n_interactions) /
                             static_cast<double>(n_sequences)
                       : 0.0;
  }
  bool operator==(const StatsReport&) const = default;
};

inline StatsReport dataset_stats(const SequenceSet& data) {
  if (data.sequences.empty()) throw DataError("cannot report stats of an empty dataset");
  StatsReport r;
  std::vector<bool> seen(data.vocab.size(), false);
  for (const auto& s : data.sequences) {
    for (auto i : s.items) {
      if (!seen[i]) {
        seen[i] = true;
        ++r.n_items;
      }
    }
    r.n_interactions += s.items.size();
  }
  r.n_sequences = data.sequences.size();
  return r;
}

struct SplitRatios {
  double train = 7.0;
  double valid = 2.0;
  double test = 1.0;
};

struct DatasetSplit {
  SequenceSet train;     // training sequences, vocabulary restricted to train
  SampleSet valid;       // indices refer to train.vocab
  SampleSet test;        // indices refer to train.vocab
  StatsReport corpus_stats;  // over the full preprocessed corpus
  std::size_t valid_sequences = 0;  // before sample filtering
  std::size_t test_sequences = 0;
};

inline StatsReport dataset_stats(const DatasetSplit& split) { return split.corpus_stats; }

/// Chronological train/valid/test split over sequences ordered by end time
/// (ties by sequence id). The training set gets its own dense vocabulary in
/// corpus order and chronologically ordered sequence ids; validation and
/// test sequences become leave-last-out samples over that vocabulary, with
/// items unseen in training removed from prefixes. Samples whose label is
/// unseen or whose prefix becomes empty are dropped.
inline DatasetSplit split_chronological(const SequenceSet& data,
                                        SplitRatios ratios = {}) {
  for (double r : {ratios.train, ratios.valid, ratios.test}) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw ConfigError("split ratios must be positive and finite");
    }
  }
  std::vector<std::size_t> order(data.sequences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = data.sequences[a];
    const auto& sb = data.sequences[b];
    if (sa.end_time != sb.end_time) return sa.end_time < sb.end_time;
    return sa.id < sb.id;
  });
  const double total = ratios.train + ratios.valid + ratios.test;
  const auto n = order.size();
  auto cut = [&](double frac) {
    return std::min(n, static_cast<std::size_t>(
                           std::floor(static_cast<double>(n) * frac + 1e-9)));
  };
  const std::size_t cut_train = cut(ratios.train / total);
  const std::size_t cut_valid =
      std::max(cut_train, cut((ratios.train + ratios.valid) / total));
  if (cut_train == 0) throw DataError("training split is empty");

  DatasetSplit split;
  split.corpus_stats = dataset_stats(data);

  std::vector<bool> in_train(data.vocab.size(), false);
  for (std::size_t k = 0; k < cut_train; ++k) {
    for (auto i : data.sequences[order[k]].items) in_train[i] = true;
  }
  constexpr ItemIndex kAbsent = static_cast<ItemIndex>(-1);
  std::vector<ItemIndex> remap(data.vocab.size(), kAbsent);
  for (std::size_t i = 0; i < data.vocab.size(); ++i) {
    if (in_train[i]) {
      remap[i] = split.train.vocab.encode(data.vocab.decode(static_cast<ItemIndex>(i)));
    }
  }
  for (std::size_t k = 0; k < cut_train; ++k) {
    const auto& src = data.sequences[order[k]];
    Sequence s;
    s.id = static_cast<std::uint32_t>(k);
    s.end_time = src.end_time;
    s.items.reserve(src.items.size());
    for (auto i : src.items) s.items.push_back(remap[i]);
    split.train.sequences.push_back(std::move(s));
  }
  split.train.recount();

  auto make_samples = [&](std::size_t begin, std::size_t end) {
    SampleSet samples;
    for (std::size_t k = begin; k < end; ++k) {
      const auto& src = data.sequences[order[k]];
      if (src.items.empty()) continue;
      ItemIndex label = remap[src.items.back()];
      if (label == kAbsent) continue;
      Sample sample;
      for (std::size_t p = 0; p + 1 < src.items.size(); ++p) {
        if (auto m = remap[src.items[p]]; m != kAbsent) sample.prefix.push_back(m);
      }
      if (sample.prefix.empty()) continue;
      sample.id = static_cast<std::uint32_t>(samples.size());
      sample.label = label;
      sample.origin_end_time = src.end_time;
      samples.push_back(std::move(sample));
    }
    return samples;
  };
  split.valid = make_samples(cut_train, cut_valid);
  split.test = make_samples(cut_valid, n);
  split.valid_sequences = cut_valid - cut_train;
  split.test_sequences = n - cut_valid;
  return split;
}

// ---------------------------------------------------------------------------
// Binary caches
// ---------------------------------------------------------------------------

// Sequence cache "CRP1":
//   magic[4] | u32 vocab_size | u32 sequence_count |
//   per sequence: i64 end_time | u32 length | u32 item[length]
// The vocabulary itself is stored next to it as text (index<TAB>id).
inline void write_sequences(std::ostream& out, const SequenceSet& data) {
  binio::put_magic(out, "CRP1");
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(data.vocab.size()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(data.sequences.size()));
  for (const auto& s : data.sequences) {
    binio::put<std::int64_t>(out, s.end_time);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.items.size()));
    for (auto i : s.items) binio::put<std::uint32_t>(out, i);
  }
}

inline void write_vocab(std::ostream& out, const ItemVocab& vocab) {
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << i << '\t' << vocab.decode(static_cast<ItemIndex>(i)) << '\n';
  }
}

inline ItemVocab read_vocab(std::istream& in) {
  ItemVocab vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("malformed vocabulary line");
    auto idx = std::stoull(line.substr(0, tab));
    if (idx != vocab.size()) throw DataError("vocabulary indices not dense");
    vocab.encode(std::string_view(line).substr(tab + 1));
  }
  return vocab;
}

inline SequenceSet read_sequences(std::istream& in, ItemVocab vocab) {
  binio::expect_magic(in, "CRP1");
  auto vocab_size = binio::get<std::uint32_t>(in);
  if (vocab_size != vocab.size()) throw DataError("vocabulary size mismatch in CRP1 cache");
  auto count = binio::get<std::uint32_t>(in);
  SequenceSet out;
  out.vocab = std::move(vocab);
  out.sequences.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    Sequence s;
    s.id = k;
    s.end_time = binio::get<std::int64_t>(in);
    auto len = binio::get<std::uint32_t>(in);
    s.items.resize(len);
    for (auto& i : s.items) {
      i = binio::get<std::uint32_t>(in);
      if (i >= vocab_size) throw DataError("item index out of range in CRP1 cache");
    }
    out.sequences.push_back(std::move(s));
  }
  out.recount();
  return out;
}

// Sample cache "CRS1":
//   magic[4] | u32 item_count | u32 sample_count |
//   per sample: i64 origin_end_time | u32 label | u32 prefix_len | u32 item[prefix_len]
inline void write_samples(std::ostream& out, const SampleSet& samples,
                          std::size_t item_count) {
  binio::put_magic(out, "CRS1");
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(item_count));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(samples.size()));
  for (const auto& s : samples) {
    binio::put<std::int64_t>(out, s.origin_end_time);
    binio::put<std::uint32_t>(out, s.label);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.prefix.size()));
    for (auto i : s.prefix) binio::put<std::uint32_t>(out, i);
  }
}

inline SampleSet read_samples(std::istream& in, std::size_t item_count) {
  binio::expect_magic(in, "CRS1");
  if (binio::get<std::uint32_t>(in) != item_count) {
    throw DataError("item count mismatch in CRS1 cache");
  }
  auto count = binio::get<std::uint32_t>(in);
  SampleSet out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    Sample s;
    s.id = k;
    s.origin_end_time = binio::get<std::int64_t>(in);
    s.label = binio::get<std::uint32_t>(in);
    auto len = binio::get<std::uint32_t>(in);
    s.prefix.resize(len);
    for (auto& i : s.prefix) i = binio::get<std::uint32_t>(in);
    if (s.label >= item_count ||
        std::any_of(s.prefix.begin(), s.prefix.end(),
                    [&](ItemIndex i) { return i >= item_count; })) {
      throw DataError("item index out of range in CRS1 cache");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace crprobe
