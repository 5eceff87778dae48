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

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "crprobe/crprobe.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  unsigned workers = 0;
  bool workers_set = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config, "Run config file (key = value lines)");
  cmd->add_option("-s,--set", o.overrides, "Override a config entry, key=value (repeatable)");
  cmd->add_option("-w,--workers", o.workers, "Worker threads (0 = all cores)")
      ->each([&o](const std::string&) { o.workers_set = true; });
}

crprobe::RunConfig load(const CommonOptions& o) {
  std::vector<crprobe::ConfigEntry> entries;
  if (!o.config.empty()) entries = crprobe::load_config_file(o.config);
  for (const auto& kv : o.overrides) entries.push_back(crprobe::parse_override(kv));
  auto cfg = crprobe::make_config(entries);
  if (o.workers_set) cfg.workers = o.workers;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crprobe: collaborative-relation analysis of interaction logs"};
  app.require_subcommand(1);

  CommonOptions common;
  auto* ingest = app.add_subcommand("ingest", "Parse, preprocess and split the input log");
  add_common(ingest, common);

  auto* analyze = app.add_subcommand("analyze", "Emit CR distributions and sample partitions");
  add_common(analyze, common);

  std::vector<std::string> models;
  auto* run = app.add_subcommand("run-model", "Train built-in baselines and evaluate them");
  add_common(run, common);
  run->add_option("-m,--model", models, "item-knn, sknn or bpr-mf (default: config 'models')");

  std::string predictions;
  std::string audit_name;
  auto* audit = app.add_subcommand("audit-predictions",
                                   "CR proportions and sliced metrics for a prediction file");
  add_common(audit, common);
  audit->add_option("-p,--predictions", predictions, "sample_id<TAB>item,...,item file")
      ->required();
  audit->add_option("-n,--name", audit_name, "Model name for the reports (default: file stem)");

  std::vector<std::string> reports;
  std::string json_out_path;
  auto* compare = app.add_subcommand("compare-reports", "Rank models across metrics reports");
  compare->add_option("reports", reports, "metrics.json files")->required();
  compare->add_option("--json", json_out_path, "Also write the comparison as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (compare->parsed()) {
      std::vector<std::filesystem::path> paths(reports.begin(), reports.end());
      auto table = crprobe::cmd_compare_reports(paths);
      std::cout << crprobe::format_comparison(table);
      if (!json_out_path.empty()) {
        crprobe::detail::write_text(json_out_path,
                                    crprobe::detail::dump(crprobe::json_out::comparison(table)));
      }
      return crprobe::kExitOk;
    }
    auto cfg = load(common);
    if (ingest->parsed()) {
      crprobe::cmd_ingest(cfg, std::cerr);
    } else if (analyze->parsed()) {
      crprobe::cmd_analyze(cfg, std::cerr);
    } else if (run->parsed()) {
      if (models.empty()) models = cfg.models;
      for (const auto& m : models) crprobe::cmd_run_model(cfg, m, std::cerr);
    } else if (audit->parsed()) {
      if (audit_name.empty()) audit_name = std::filesystem::path(predictions).stem().string();
      crprobe::cmd_audit_predictions(cfg, predictions, audit_name, std::cerr);
    }
  } catch (const crprobe::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return crprobe::kExitConfig;
  } catch (const crprobe::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return crprobe::kExitData;
  } catch (const crprobe::ModelError& e) {
    std::cerr << "model failure: " << e.what() << "\n";
    return crprobe::kExitModel;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return crprobe::kExitData;
  }
  return crprobe::kExitOk;
}
