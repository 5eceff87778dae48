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


// Library walkthrough on the toy log: ingest, CR lookups, one baseline and
// its sliced metrics, without the CLI pipeline or any files written.

#include <fstream>
#include <iostream>

#include "crprobe/crprobe.hpp"

int main(int argc, char** argv) {
  using namespace crprobe;
  const char* path = argc > 1 ? argv[1] : "data/toy/toy.tsv";
  std::ifstream in(path);
  if (!in) {
    std::cerr << "usage: crprobe_walkthrough [toy.tsv]\n";
    return kExitConfig;
  }
  auto events = parse_events(in, ColumnMapping{});
  auto corpus = preprocess(build_sequences(events.events, Grouping::kSession), 1, 2);
  auto split = split_chronological(corpus, {4, 3, 3});
  const auto& vocab = split.train.vocab;

  auto graph = build_global_graph(split.train);
  auto x1 = *vocab.find("x1");
  for (const auto* id : {"x2", "x4", "x6"}) {
    std::cout << "x1 -> " << id << ": " << cr_between(graph, x1, *vocab.find(id), 4).name() << "\n";
  }
  auto hist = pair_class_histogram(graph, 4);
  for (std::size_t s = 0; s < hist.counts.size(); ++s) {
    std::cout << CrClass::from_slot(s, 4).name() << " " << hist.counts[s] << "\n";
  }

  auto model = train_item_knn(split.train);
  auto preds = predict_all(model, split.test, 3);
  auto records = label_cr_records(graph, split.test, 4).records;
  SlicePartition partitions[] = {pure_partition(records), direct_indirect_partition(records)};
  auto report = evaluate_slices(preds, split.test, partitions, 3, 1);
  report.model = "item-knn";
  report.dataset = "toy";
  std::cout << format_metrics_table(report);
  return kExitOk;
}
