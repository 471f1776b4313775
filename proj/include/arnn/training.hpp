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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "arnn/checkpoint.hpp"
#include "arnn/data.hpp"
#include "arnn/error.hpp"
#include "arnn/evaluate.hpp"
#include "arnn/loss.hpp"
#include "arnn/minibatch.hpp"
#include "arnn/models.hpp"
#include "arnn/optim.hpp"
#include "arnn/random.hpp"

namespace arnn {

enum class Stage { kGruPretrain, kPnnPretrain, kMerge };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kGruPretrain: return "gru";
    case Stage::kPnnPretrain: return "pnn";
    case Stage::kMerge: return "merge";
  }
  return "?";
}

inline Stage parse_stage(const std::string& s) {
  if (s == "gru") return Stage::kGruPretrain;
  if (s == "pnn") return Stage::kPnnPretrain;
  if (s == "merge") return Stage::kMerge;
  throw ConfigError("unknown stage '" + s + "' (expected gru, pnn or merge)");
}

/// Named layer-size presets. "xing" and "tmall" are the job-board and
/// marketplace settings; "synth" is sized for the bundled synthetic data, where the PNN
/// must learn an item-by-category interaction and needs wider layers.
struct Profile {
  std::string name;
  std::size_t hidden_size;
  std::size_t embedding_dim;
  std::size_t context_size;
  std::size_t merge_size;
  double gru_dropout;
  double pretrain_learning_rate = 0.05;
  double merge_learning_rate = 0.01;
  /// Epochs per stage: GRU, PNN, merge.
  std::size_t epochs[3] = {10, 10, 10};
  std::size_t patience = 3;
  std::size_t batch_lanes = 50;
};

inline Profile profile_named(const std::string& name) {
  if (name == "xing") return {"xing", 100, 10, 100, 100, 0.2};
  if (name == "tmall") return {"tmall", 1000, 10, 300, 1000, 0.0};
  if (name == "synth") return {"synth", 64, 32, 192, 128, 0.0, 0.2, 0.05, {10, 40, 20}, 40, 32};
  throw ConfigError("unknown profile '" + name + "' (expected xing, tmall or synth)");
}

struct TrainPlan {
  Stage stage = Stage::kGruPretrain;
  std::size_t epochs = 10;
  std::size_t batch_lanes = 50;
  std::uint64_t seed = 1;
  AdagradConfig optimizer{};
  /// Epochs without a validation Recall@k improvement before stopping.
  std::size_t patience = 3;
  std::size_t eval_k = 20;
};

inline AdagradConfig default_optimizer(Stage stage) {
  return AdagradConfig{stage == Stage::kMerge ? 0.01 : 0.05, 1e-6, 1e-10};
}

inline AdagradConfig default_optimizer(Stage stage, const Profile& profile) {
  return AdagradConfig{
      stage == Stage::kMerge ? profile.merge_learning_rate : profile.pretrain_learning_rate, 1e-6,
      1e-10};
}

/// The plan a profile implies for `stage`, before config overrides.
inline TrainPlan default_plan(Stage stage, const Profile& profile, std::uint64_t seed) {
  TrainPlan plan;
  plan.stage = stage;
  plan.epochs = profile.epochs[static_cast<int>(stage)];
  plan.seed = seed;
  plan.patience = profile.patience;
  plan.batch_lanes = profile.batch_lanes;
  plan.optimizer = default_optimizer(stage, profile);
  return plan;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_recall = 0.0;
  double val_mrr = 0.0;
};

struct StageResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool diverged = false;
  std::string divergence;
};

inline std::string format_history(const std::vector<EpochRecord>& history, std::size_t k = 20) {
  std::string out = "epoch\ttrain_loss\tval_recall@" + std::to_string(k) + "\tval_mrr@" +
                    std::to_string(k) + "\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu\t%.8f\t%.6f\t%.6f\n", r.epoch, r.train_loss, r.val_recall,
                  r.val_mrr);
    out += buf;
  }
  return out;
}

namespace detail {

/// One pass of TOP1 training over the session-parallel stream. Returns the
/// mean batch loss. With `update` false the model is only run forward.
template <typename Real, typename Model>
double train_epoch(Model& model, const SessionDataset& data, std::size_t lanes,
                   std::uint64_t seed, std::size_t epoch, const Adagrad& optimizer, bool update) {
  SessionParallelIterator it(data, lanes, seed);
  it.begin_epoch(epoch);
  model.reset_state(lanes);
  auto params = model.parameters();
  for (auto* p : params) p->zero_grad();
  double total = 0.0;
  std::size_t batches = 0;
  while (auto batch = it.next()) {
    const StepInput in = batch->inputs();
    Tape<Real> tape;
    if (in.size() < 2) {
      // A lone lane has no negatives; only the recurrent state advances.
      model.logits(tape, in, Mode::kInference);
      continue;
    }
    Var<Real> logits = model.logits(tape, in, Mode::kTrain);
    std::vector<std::uint32_t> targets;
    std::vector<std::vector<std::uint32_t>> negatives;
    for (std::size_t lane : in.lanes) {
      targets.push_back(batch->target_items[lane]);
      negatives.push_back(negatives_for(*batch, lane));
    }
    auto loss = top1_batch(logits, targets, negatives);
    if (!loss) continue;
    const double value = static_cast<double>(loss->value().item());
    if (!std::isfinite(value)) throw NumericError("training loss became non-finite");
    total += value;
    ++batches;
    if (update) {
      tape.backward(*loss);
      optimizer.step(params);
    }
  }
  return batches ? total / static_cast<double>(batches) : 0.0;
}

}  // namespace detail

/// Trains `model` for plan.epochs passes of session-parallel TOP1 with
/// Adagrad, validating Recall@k/MRR@k after each epoch. Epoch 0 records the
/// untrained model (its loss from a forward-only pass on a copy). The best
/// validation state is restored into `model` at the end, including after a
/// divergence, which is reported rather than thrown.
template <typename Real, typename Model>
StageResult run_stage(Model& model, const TrainPlan& plan, const SessionDataset& train,
                      const SessionDataset& validation) {
  if (train.sessions.empty()) throw DataError("training set is empty");
  const Adagrad optimizer(plan.optimizer);
  const std::uint64_t batch_seed = derive_seed(plan.seed, 100 + static_cast<int>(plan.stage));

  auto validate = [&](Model& m) -> std::pair<double, double> {
    if (validation.sessions.empty()) return {0.0, 0.0};
    ModelScorer<Real, Model> scorer(m);
    const auto r = evaluate_system(scorer, validation, plan.eval_k, "validation");
    return {r.recall, r.mrr};
  };

  StageResult result;
  {
    Model probe = model;
    const double initial = detail::train_epoch<Real>(probe, train, plan.batch_lanes, batch_seed, 0,
                                                     optimizer, false);
    const auto [recall, mrr] = validate(model);
    result.history.push_back(EpochRecord{0, initial, recall, mrr});
  }
  Model best = model;
  // Improvement is lexicographic on (recall, mrr) so a saturated Recall@k
  // still lets ranking quality drive model selection.
  double best_recall = result.history.back().val_recall;
  double best_mrr = result.history.back().val_mrr;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= plan.epochs; ++epoch) {
    double loss = 0.0;
    try {
      loss = detail::train_epoch<Real>(model, train, plan.batch_lanes, batch_seed, epoch, optimizer,
                                       true);
    } catch (const NumericError& e) {
      result.diverged = true;
      result.divergence = e.what();
      break;
    }
    const auto [recall, mrr] = validate(model);
    result.history.push_back(EpochRecord{epoch, loss, recall, mrr});
    if (validation.sessions.empty() || recall > best_recall ||
        (recall == best_recall && mrr > best_mrr)) {
      best_recall = recall;
      best_mrr = mrr;
      best = model;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= plan.patience) {
      break;
    }
  }
  model = std::move(best);
  model.reset_state(plan.batch_lanes);
  return result;
}

// ---------------------------------------------------------------------------
// Stage drivers producing checkpoints
// ---------------------------------------------------------------------------

struct StageOutput {
  Checkpoint checkpoint;
  StageResult result;
};

inline nlohmann::json hyperparameters_json(const Profile& profile, const TrainPlan& plan) {
  return {{"profile", profile.name},
          {"hidden_size", profile.hidden_size},
          {"embedding_dim", profile.embedding_dim},
          {"context_size", profile.context_size},
          {"merge_size", profile.merge_size},
          {"gru_dropout", profile.gru_dropout},
          {"stage", stage_name(plan.stage)},
          {"epochs", plan.epochs},
          {"batch_lanes", plan.batch_lanes},
          {"seed", plan.seed},
          {"learning_rate", plan.optimizer.learning_rate},
          {"weight_decay", plan.optimizer.weight_decay},
          {"patience", plan.patience}};
}

inline std::vector<std::size_t> field_sizes_of(const FieldSchema& schema) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < schema.field_count(); ++f) out.push_back(schema.field_size(f));
  return out;
}

template <typename Real>
GruSessionModel<Real> make_gru(const FieldSchema& schema, const Profile& profile,
                               std::uint64_t seed) {
  Rng rng(derive_seed(seed, 1));
  return GruSessionModel<Real>(schema.item_count(), profile.hidden_size, profile.gru_dropout, rng);
}

template <typename Real>
PnnEncoder<Real> make_pnn(const FieldSchema& schema, const Profile& profile, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 2));
  return PnnEncoder<Real>(field_sizes_of(schema), schema.item_count(), profile.embedding_dim,
                          profile.context_size, rng);
}

template <typename Real>
StageOutput train_gru_stage(const Profile& profile, const TrainPlan& plan,
                            const SessionDataset& train, const SessionDataset& validation) {
  auto model = make_gru<Real>(train.schema, profile, plan.seed);
  StageOutput out;
  out.result = run_stage<Real>(model, plan, train, validation);
  out.checkpoint.stage = "gru";
  out.checkpoint.schema_hash = train.schema.hash();
  out.checkpoint.hyperparameters = hyperparameters_json(profile, plan);
  out.checkpoint.schema = schema_to_json(train.schema);
  out.checkpoint.gru = gru_block(model);
  return out;
}

template <typename Real>
StageOutput train_pnn_stage(const Profile& profile, const TrainPlan& plan,
                            const SessionDataset& train, const SessionDataset& validation) {
  auto model = make_pnn<Real>(train.schema, profile, plan.seed);
  StageOutput out;
  out.result = run_stage<Real>(model, plan, train, validation);
  out.checkpoint.stage = "pnn";
  out.checkpoint.schema_hash = train.schema.hash();
  out.checkpoint.hyperparameters = hyperparameters_json(profile, plan);
  out.checkpoint.schema = schema_to_json(train.schema);
  out.checkpoint.pnn = pnn_block(model);
  return out;
}

/// Builds the ARNN from both pretraining checkpoints and trains the merge
/// layer. Every block is re-serialized from the trained model.
template <typename Real>
StageOutput train_merge_stage(const Profile& profile, const TrainPlan& plan,
                              const Checkpoint& gru_ckpt, const Checkpoint& pnn_ckpt,
                              const SessionDataset& train, const SessionDataset& validation) {
  if (!gru_ckpt.gru) throw ConfigError("merge stage: GRU checkpoint has no gru block");
  if (!pnn_ckpt.pnn) throw ConfigError("merge stage: PNN checkpoint has no pnn block");
  gru_ckpt.require_schema(train.schema);
  pnn_ckpt.require_schema(train.schema);
  Rng rng(derive_seed(plan.seed, 3));
  ArnnModel<Real> model(pnn_from_block<Real>(*pnn_ckpt.pnn), gru_from_block<Real>(*gru_ckpt.gru),
                        profile.merge_size, rng);
  StageOutput out;
  out.result = run_stage<Real>(model, plan, train, validation);
  out.checkpoint.stage = "merge";
  out.checkpoint.schema_hash = train.schema.hash();
  out.checkpoint.hyperparameters = hyperparameters_json(profile, plan);
  out.checkpoint.schema = schema_to_json(train.schema);
  out.checkpoint.gru = gru_block(model.body);
  out.checkpoint.pnn = pnn_block(model.pnn);
  out.checkpoint.merge = merge_block(model);
  return out;
}

}  // namespace arnn
