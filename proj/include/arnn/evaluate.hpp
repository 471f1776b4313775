/*
 * Copyright 2026 The ARNN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

#include "arnn/data.hpp"
#include "arnn/metrics.hpp"
#include "arnn/minibatch.hpp"
#include "arnn/ops.hpp"
#include "arnn/tape.hpp"

namespace arnn {

struct EvalReport {
  std::string system;
  std::size_t k = 20;
  double recall = 0.0;
  double mrr = 0.0;
  std::size_t n_recs = 0;
  std::size_t n_hits = 0;
};

/// Adapts a network with logits(tape, input, mode) to the scorer interface
/// used by evaluate_system.
template <typename Real, typename Model>
class ModelScorer {
 public:
  explicit ModelScorer(Model& model) : model_(&model) {}

  void reset_state(std::size_t lanes) { model_->reset_state(lanes); }

  Tensor<Real> predict(const StepInput& in) {
    Tape<Real> tape;
    return model_->logits(tape, in, Mode::kInference).value();
  }

 private:
  Model* model_;
};

/// Walks every test session left to right, scoring each next item from the
/// prefix seen so far. The first step of a session yields no prediction.
/// Scorers only receive StepInput, which carries no targets.
template <typename Scorer>
EvalReport evaluate_system(Scorer& scorer, const SessionDataset& test, std::size_t k,
                           std::string name, std::size_t lanes = 32) {
  if (test.sessions.empty()) throw DataError("evaluation on an empty test set");
  SessionParallelIterator it(test, lanes, 0, /*shuffle=*/false);
  scorer.reset_state(lanes);
  MetricAccumulator acc;
  acc.k = k;
  while (auto batch = it.next()) {
    const StepInput in = batch->inputs();
    const auto scores = scorer.predict(in);
    for (std::size_t r = 0; r < in.size(); ++r) {
      acc.add_rank(rank_of(scores.row(r), batch->target_items[in.lanes[r]]));
    }
  }
  return EvalReport{std::move(name), k, acc.recall(), acc.mrr(), acc.n_recs, acc.n_hits};
}

inline std::string format_report_tsv(const std::vector<EvalReport>& reports) {
  std::string out = "system\tk\trecall\tmrr\tn_recs\tn_hits\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%s\t%zu\t%.6f\t%.6f\t%zu\t%zu\n", r.system.c_str(), r.k,
                  r.recall, r.mrr, r.n_recs, r.n_hits);
    out += buf;
  }
  return out;
}

inline std::string format_report_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return {};
  char buf[256];
  const std::size_t k = reports.front().k;
  std::snprintf(buf, sizeof buf, "%-10s %10s %10s %10s\n", "system",
                ("Recall@" + std::to_string(k)).c_str(), ("MRR@" + std::to_string(k)).c_str(),
                "n_recs");
  std::string out = buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-10s %10.4f %10.4f %10zu\n", r.system.c_str(), r.recall,
                  r.mrr, r.n_recs);
    out += buf;
  }
  return out;
}

}  // namespace arnn
