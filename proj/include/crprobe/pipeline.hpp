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

// End-to-end commands behind the CLI. Every artifact is written in full to
// a string first and then to disk, so reruns with the same config, input
// and seed produce byte-identical files regardless of the worker count.
//
// Output layout under <output_dir>:
//   cache/<key>/        ingest cache, <key> = hash of ingest config + input bytes
//   analysis/           graph cache and distribution JSONs
//   models/<model>/     predictions, model cache, metrics
//   audit/<name>/       CR proportions and metrics for a prediction file

#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "crprobe/analysis.hpp"
#include "crprobe/config.hpp"
#include "crprobe/crgraph.hpp"
#include "crprobe/eval.hpp"
#include "crprobe/ingest.hpp"
#include "crprobe/recommenders.hpp"
#include "crprobe/reports.hpp"

namespace crprobe {

namespace fs = std::filesystem;

namespace detail {

inline void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename Writer>
void write_binary(const fs::path& path, Writer&& writer) {
  std::ostringstream buf(std::ios::binary);
  writer(buf);
  write_text(path, buf.str());
}

inline std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

/// Content hash of the input file.
inline std::string input_digest(const fs::path& input) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw ConfigError("input file not found: " + input.string());
  Fnv1a h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return h.hex();
}

struct CacheLayout {
  std::string key;
  fs::path dir;

  fs::path corpus() const { return dir / "corpus.crp"; }
  fs::path corpus_vocab() const { return dir / "corpus_vocab.tsv"; }
  fs::path train() const { return dir / "train.crp"; }
  fs::path train_vocab() const { return dir / "train_vocab.tsv"; }
  fs::path valid() const { return dir / "valid.crs"; }
  fs::path test() const { return dir / "test.crs"; }
  fs::path stats() const { return dir / "stats.json"; }
  fs::path manifest() const { return dir / "manifest.json"; }
};

inline CacheLayout cache_layout(const RunConfig& cfg) {
  if (cfg.input.empty()) throw ConfigError("no input file configured");
  Fnv1a h;
  h.update(cfg.ingest_signature());
  h.update(input_digest(cfg.input));
  return {h.hex(), cfg.output_dir / "cache" / h.hex()};
}

struct IngestResult {
  CacheLayout cache;
  StatsReport stats;
  std::size_t parse_errors = 0;
  std::size_t train_sequences = 0;
  std::size_t valid_samples = 0;
  std::size_t test_samples = 0;
};

inline IngestResult cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  IngestResult r;
  r.cache = cache_layout(cfg);
  std::ifstream in(cfg.input, std::ios::binary);
  if (!in) throw ConfigError("input file not found: " + cfg.input.string());
  auto parsed = parse_events(in, cfg.mapping);
  r.parse_errors = parsed.error_count;
  for (const auto& e : parsed.errors) {
    log << "warning: " << cfg.input.string() << ":" << e.line << ": " << e.reason << "\n";
  }
  if (parsed.error_count > parsed.errors.size()) {
    log << "warning: " << parsed.error_count - parsed.errors.size()
        << " further malformed rows not shown\n";
  }
  if (parsed.events.empty()) throw DataError("no valid events in " + cfg.input.string());
  auto raw = build_sequences(parsed.events, cfg.grouping);
  auto corpus = preprocess(raw, cfg.min_item_freq, cfg.min_len);
  auto split = split_chronological(corpus, cfg.ratios);
  r.stats = split.corpus_stats;
  r.train_sequences = split.train.sequences.size();
  r.valid_samples = split.valid.size();
  r.test_samples = split.test.size();

  const auto& c = r.cache;
  detail::write_binary(c.corpus(), [&](std::ostream& o) { write_sequences(o, corpus); });
  detail::write_binary(c.corpus_vocab(), [&](std::ostream& o) { write_vocab(o, corpus.vocab); });
  detail::write_binary(c.train(), [&](std::ostream& o) { write_sequences(o, split.train); });
  detail::write_binary(c.train_vocab(),
                       [&](std::ostream& o) { write_vocab(o, split.train.vocab); });
  detail::write_binary(c.valid(), [&](std::ostream& o) {
    write_samples(o, split.valid, split.train.vocab.size());
  });
  detail::write_binary(c.test(), [&](std::ostream& o) {
    write_samples(o, split.test, split.train.vocab.size());
  });

  auto stats = json_out::stats(r.stats, cfg.dataset);
  stats["parse_errors"] = r.parse_errors;
  stats["split"] = {{"train_sequences", r.train_sequences},
                    {"valid_sequences", split.valid_sequences},
                    {"test_sequences", split.test_sequences},
                    {"train_items", split.train.vocab.size()},
                    {"valid_samples", r.valid_samples},
                    {"test_samples", r.test_samples}};
  detail::write_text(c.stats(), detail::dump(stats));

  auto manifest = json_out::header("ingest_manifest");
  manifest["key"] = c.key;
  manifest["dataset"] = cfg.dataset;
  manifest["input_digest"] = input_digest(cfg.input);
  manifest["signature"] = cfg.ingest_signature();
  detail::write_text(c.manifest(), detail::dump(manifest));

  log << "ingest: " << r.stats.n_items << " items, " << r.stats.n_interactions
      << " interactions, " << r.stats.n_sequences << " sequences (avg "
      << r.stats.avg_length_2dp() << "); train " << r.train_sequences << ", valid "
      << r.valid_samples << " samples, test " << r.test_samples << " samples -> "
      << c.dir.string() << "\n";
  return r;
}

/// Cached train/eval data for a config.
struct LoadedData {
  CacheLayout cache;
  SequenceSet train;
  SampleSet valid;
  SampleSet test;

  const SampleSet& eval(const RunConfig& cfg) const {
    return cfg.eval_split == "valid" ? valid : test;
  }
};

/// Loads the ingest cache for the config. A missing cache, or one written
/// for different settings or input bytes, is refused.
inline LoadedData load_cache(const RunConfig& cfg) {
  LoadedData d;
  d.cache = cache_layout(cfg);
  const auto& c = d.cache;
  if (!fs::exists(c.manifest())) {
    throw ConfigError("no ingest cache matches the current config and input (" +
                      c.dir.string() + "); run `crprobe ingest` with this config first");
  }
  auto manifest = nlohmann::json::parse(detail::read_text(c.manifest()), nullptr, false);
  if (manifest.is_discarded() || manifest.value("key", "") != c.key ||
      manifest.value("signature", "") != cfg.ingest_signature()) {
    throw ConfigError("ingest cache at " + c.dir.string() +
                      " is stale; rerun `crprobe ingest` with this config");
  }
  std::ifstream vin(c.train_vocab(), std::ios::binary);
  std::ifstream tin(c.train(), std::ios::binary);
  std::ifstream vsin(c.valid(), std::ios::binary);
  std::ifstream tsin(c.test(), std::ios::binary);
  if (!vin || !tin || !vsin || !tsin) throw DataError("incomplete ingest cache at " + c.dir.string());
  d.train = read_sequences(tin, read_vocab(vin));
  d.valid = read_samples(vsin, d.train.vocab.size());
  d.test = read_samples(tsin, d.train.vocab.size());
  return d;
}

struct AnalyzeResult {
  fs::path dir;
  CrHistogram pair_histogram;
  LabelCrAnalysis label_crs;
  CoocHistogram cooc;
  SlicePartition pure;
  SlicePartition direct_indirect;
};

inline GlobalGraph build_graph_logged(const RunConfig& cfg, const SequenceSet& train,
                                      std::ostream& log) {
  GraphBuildOptions opts;
  opts.clique_cap = cfg.clique_cap;
  opts.warn = [&log](const std::string& msg) { log << "warning: " << msg << "\n"; };
  return build_global_graph(train, opts);
}

inline AnalyzeResult cmd_analyze(const RunConfig& cfg, std::ostream& log) {
  auto data = load_cache(cfg);
  const unsigned workers = resolve_workers(cfg.workers);
  AnalyzeResult r;
  r.dir = cfg.output_dir / "analysis";
  auto graph = build_graph_logged(cfg, data.train, log);
  detail::write_binary(r.dir / "graph.crg", [&](std::ostream& o) { write_graph(o, graph); });

  r.pair_histogram = pair_class_histogram(graph, cfg.max_hop, workers);
  const auto& samples = data.eval(cfg);
  r.label_crs = label_cr_records(graph, samples, cfg.max_hop, true, workers);
  r.cooc = cooc_frequency_histogram(graph);
  r.pure = pure_partition(r.label_crs.records);
  r.direct_indirect = direct_indirect_partition(r.label_crs.records);

  auto pair = json_out::pair_histogram(r.pair_histogram, cfg.percent_base);
  pair["dataset"] = cfg.dataset;
  detail::write_text(r.dir / "pair_histogram.json", detail::dump(pair));
  auto label = json_out::label_distribution(r.label_crs, cfg.eval_split);
  label["dataset"] = cfg.dataset;
  detail::write_text(r.dir / "label_cr.json", detail::dump(label));
  auto cooc = json_out::cooc_histogram(r.cooc);
  cooc["dataset"] = cfg.dataset;
  detail::write_text(r.dir / "cooc_histogram.json", detail::dump(cooc));
  auto pure = json_out::partition_counts(r.pure, "pure_partition", samples.size());
  pure["dataset"] = cfg.dataset;
  pure["max_hop"] = cfg.max_hop;
  detail::write_text(r.dir / "pure_partition.json", detail::dump(pure));
  auto di = json_out::partition_counts(r.direct_indirect, "direct_indirect_partition",
                                       samples.size());
  di["dataset"] = cfg.dataset;
  detail::write_text(r.dir / "direct_indirect.json", detail::dump(di));
  if (cfg.persist_records) {
    std::ostringstream rec;
    write_label_records(rec, r.label_crs.records);
    detail::write_text(r.dir / "label_cr_records.tsv", rec.str());
  }
  log << "analyze: " << graph.size() << " items, " << graph.edge_count() << " edges; "
      << samples.size() << " " << cfg.eval_split << " samples -> " << r.dir.string() << "\n";
  return r;
}

/// Pure and direct/indirect partitions of the evaluation samples.
inline std::vector<SlicePartition> cr_partitions(const GlobalGraph& graph, const SampleSet& samples,
                                                 unsigned max_hop, unsigned workers) {
  auto records = label_cr_records(graph, samples, max_hop, true, workers).records;
  return {pure_partition(records), direct_indirect_partition(records)};
}

struct RunModelResult {
  fs::path dir;
  PredictionSet predictions;
  MetricsReport metrics;
};

inline RunModelResult cmd_run_model(const RunConfig& cfg, const std::string& model,
                                    std::ostream& log) {
  auto data = load_cache(cfg);
  const unsigned workers = resolve_workers(cfg.workers);
  const auto& samples = data.eval(cfg);
  if (cfg.k > data.train.vocab.size()) {
    throw ConfigError("k = " + std::to_string(cfg.k) + " exceeds the " +
                      std::to_string(data.train.vocab.size()) + " training items");
  }
  RunModelResult r;
  r.dir = cfg.output_dir / "models" / model;
  if (model == "item-knn") {
    auto m = train_item_knn(data.train, cfg.itemknn_neighbors);
    detail::write_binary(r.dir / "model.bin", [&](std::ostream& o) { m.save(o); });
    r.predictions = predict_all(m, samples, cfg.k, workers);
  } else if (model == "sknn") {
    auto m = train_sknn(data.train, cfg.sknn);
    detail::write_binary(r.dir / "model.bin", [&](std::ostream& o) { m.save(o); });
    r.predictions = predict_all(m, samples, cfg.k, workers);
  } else if (model == "bpr-mf") {
    std::ostringstream training_log;
    training_log << "epoch\tloss\n";
    auto trained = train_bpr_mf(data.train, cfg.bpr, cfg.seed, [&](std::size_t epoch, double loss) {
      log << "bpr-mf: epoch " << epoch << " loss " << loss << "\n";
    });
    char buf[64];
    std::snprintf(buf, sizeof(buf), "0\t%.17g\n", trained.initial_loss);
    training_log << buf;
    for (std::size_t e = 0; e < trained.epoch_losses.size(); ++e) {
      std::snprintf(buf, sizeof(buf), "%zu\t%.17g\n", e + 1, trained.epoch_losses[e]);
      training_log << buf;
    }
    detail::write_text(r.dir / "training_log.tsv", training_log.str());
    detail::write_binary(r.dir / "model.bin", [&](std::ostream& o) { trained.model.save(o); });
    r.predictions = predict_all(trained.model, samples, cfg.k, workers);
  } else {
    throw ConfigError("unknown model '" + model + "' (expected item-knn, sknn or bpr-mf)");
  }

  std::ostringstream preds;
  write_prediction_file(preds, r.predictions, data.train.vocab);
  detail::write_text(r.dir / "predictions.tsv", preds.str());

  auto graph = build_global_graph(data.train);
  auto partitions = cr_partitions(graph, samples, cfg.max_hop, workers);
  r.metrics = evaluate_slices(r.predictions, samples, partitions, cfg.k, cfg.min_slice_samples);
  r.metrics.model = model;
  r.metrics.dataset = cfg.dataset;
  detail::write_text(r.dir / "metrics.json", detail::dump(json_out::metrics(r.metrics)));
  detail::write_text(r.dir / "metrics.txt", format_metrics_table(r.metrics));
  log << format_metrics_table(r.metrics);
  return r;
}

inline constexpr double kMaxBadLineFraction = 0.10;

struct AuditResult {
  fs::path dir;
  PredictionFileReport file;
  PredictionCrAudit per_pair;
  PredictionCrAudit nearest;
  MetricsReport metrics;
};

/// Audits an external (or built-in) prediction file: CR proportions of the
/// predicted items in both counting modes and sliced metrics. More than 10%
/// unparsable lines is a data error.
inline AuditResult cmd_audit_predictions(const RunConfig& cfg, const fs::path& prediction_file,
                                         const std::string& name, std::ostream& log) {
  auto data = load_cache(cfg);
  const unsigned workers = resolve_workers(cfg.workers);
  const auto& samples = data.eval(cfg);
  std::ifstream in(prediction_file, std::ios::binary);
  if (!in) throw ConfigError("prediction file not found: " + prediction_file.string());
  AuditResult r;
  r.dir = cfg.output_dir / "audit" / name;
  r.file = read_prediction_file(in, data.train.vocab, cfg.k);
  for (const auto& e : r.file.errors) {
    log << "warning: " << prediction_file.string() << ":" << e.line << ": " << e.reason << "\n";
  }
  if (r.file.lines == 0) throw DataError("prediction file has no lines");
  if (static_cast<double>(r.file.bad_lines) >
      kMaxBadLineFraction * static_cast<double>(r.file.lines)) {
    throw DataError(std::to_string(r.file.bad_lines) + " of " + std::to_string(r.file.lines) +
                    " prediction lines are malformed (limit 10%)");
  }

  auto graph = build_global_graph(data.train);
  r.per_pair = prediction_cr_proportions(graph, r.file.predictions, samples, cfg.max_hop,
                                         CountingMode::kPerPair, workers);
  r.nearest = prediction_cr_proportions(graph, r.file.predictions, samples, cfg.max_hop,
                                        CountingMode::kNearestPerItem, workers);
  if (r.per_pair.skipped_records) {
    log << "warning: " << r.per_pair.skipped_records
        << " prediction records reference unknown sample ids and were skipped\n";
  }
  auto partitions = cr_partitions(graph, samples, cfg.max_hop, workers);
  r.metrics = evaluate_slices(r.file.predictions, samples, partitions, cfg.k, cfg.min_slice_samples);
  r.metrics.model = name;
  r.metrics.dataset = cfg.dataset;

  auto pp = json_out::prediction_proportions(r.per_pair, name, cfg.k, r.file.bad_lines);
  pp["dataset"] = cfg.dataset;
  detail::write_text(r.dir / "proportions.json", detail::dump(pp));
  auto np = json_out::prediction_proportions(r.nearest, name, cfg.k, r.file.bad_lines);
  np["dataset"] = cfg.dataset;
  detail::write_text(r.dir / "proportions_nearest.json", detail::dump(np));
  detail::write_text(r.dir / "metrics.json", detail::dump(json_out::metrics(r.metrics)));
  detail::write_text(r.dir / "metrics.txt", format_metrics_table(r.metrics));
  log << "audit: " << r.file.lines << " lines, " << r.file.bad_lines << " malformed -> "
      << r.dir.string() << "\n";
  return r;
}

inline ComparisonTable cmd_compare_reports(const std::vector<fs::path>& reports) {
  std::vector<MetricsReport> parsed;
  for (const auto& p : reports) {
    auto j = nlohmann::json::parse(detail::read_text(p), nullptr, false);
    if (j.is_discarded()) throw DataError("not valid JSON: " + p.string());
    parsed.push_back(json_out::parse_metrics(j));
  }
  return compare_reports(parsed);
}

}  // namespace crprobe
