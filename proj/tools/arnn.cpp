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

// arnn: synth, preprocess, train, evaluate and recommend.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "arnn/checkpoint.hpp"
#include "arnn/config.hpp"
#include "arnn/error.hpp"
#include "arnn/evaluate.hpp"
#include "arnn/io.hpp"
#include "arnn/itemknn.hpp"
#include "arnn/metrics.hpp"
#include "arnn/pipeline.hpp"
#include "arnn/synthetic.hpp"
#include "arnn/training.hpp"

namespace fs = std::filesystem;
using namespace arnn;

namespace {

/// Flags shared by every subcommand. Flag values override config-file keys.
struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string stage;
  std::string profile;
  std::optional<std::size_t> k;
  std::string out;
  std::vector<std::string> sets;
  std::vector<std::string> positional;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key=value config file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--profile", f.profile, "layer sizes: xing, tmall or synth");
  cmd->add_option("--k", f.k, "list length for Recall@k/MRR@k and recommendations");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--set", f.sets, "extra key=value override (repeatable)");
}

RunConfig resolve(const Flags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : RunConfig::from_file(f.config);
  for (const auto& s : f.sets) cfg.set_assignment(s);
  if (f.seed) cfg.set("seed", std::to_string(*f.seed));
  if (!f.stage.empty()) cfg.set("stage", f.stage);
  if (!f.profile.empty()) cfg.set("profile", f.profile);
  if (f.k) cfg.set("k", std::to_string(*f.k));
  if (!f.out.empty()) cfg.set("out", f.out);
  return cfg;
}

std::string out_dir(const RunConfig& cfg) { return cfg.get_string("out", "."); }

std::string path_in(const RunConfig& cfg, const std::string& key, const std::string& dir,
                    const std::string& file) {
  return cfg.get_string(key, (fs::path(dir) / file).string());
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

int precision_of(const RunConfig& cfg) {
  const auto p = cfg.get_int("precision", 64);
  if (p != 32 && p != 64) throw ConfigError("precision must be 32 or 64");
  return static_cast<int>(p);
}

Profile resolve_profile(const RunConfig& cfg) {
  Profile p = profile_named(cfg.get_string("profile", "xing"));
  p.hidden_size = cfg.get_size("hidden_size", p.hidden_size);
  p.embedding_dim = cfg.get_size("embedding_dim", p.embedding_dim);
  p.context_size = cfg.get_size("context_size", p.context_size);
  p.merge_size = cfg.get_size("merge_size", p.merge_size);
  p.gru_dropout = cfg.get_double("gru_dropout", p.gru_dropout);
  if (p.hidden_size == 0 || p.embedding_dim == 0 || p.context_size == 0 || p.merge_size == 0) {
    throw ConfigError("layer sizes must be positive");
  }
  if (p.gru_dropout < 0.0 || p.gru_dropout >= 1.0) throw ConfigError("gru_dropout must be in [0, 1)");
  return p;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig& cfg) {
  SyntheticConfig sc;
  sc.sessions = cfg.get_size("sessions", sc.sessions);
  sc.items = cfg.get_size("items", sc.items);
  sc.fields = cfg.get_size("fields", sc.fields);
  sc.context_dependent = cfg.get_bool("context_dependent", sc.context_dependent);
  sc.min_length = cfg.get_size("min_length", sc.min_length);
  sc.max_length = cfg.get_size("max_length", sc.max_length);
  sc.days = cfg.get_int("days", sc.days);
  sc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  const std::string dir = out_dir(cfg);

  const SyntheticData data = generate_synthetic(sc);
  ensure_dir(dir);
  const std::string events = (fs::path(dir) / "events.tsv").string();
  {
    std::ofstream out(events);
    if (!out) throw DataError("cannot write " + events);
    write_event_log(out, data.log);
  }

  // Keep everything: the generator already controls the vocabulary.
  std::string conf = "raw_path=" + fs::absolute(events).string() + "\n";
  conf += "gap_threshold_seconds=3600\nitem_coverage=1.0\ncategory_coverage=1.0\ntest_window_days=3\n";
  write_text((fs::path(dir) / "preprocess.conf").string(), conf);

  std::string truth = "item\tfield\teven_next\todd_next\n";
  for (std::size_t i = 0; i < data.successors.size(); ++i) {
    truth += synthetic_item_name(i) + "\t" + synthetic_field_name(synthetic_field_of(i, sc.fields)) +
             "\t" + synthetic_item_name(data.successors[i][0]) + "\t" +
             synthetic_item_name(data.successors[i][1]) + "\n";
  }
  write_text((fs::path(dir) / "ground_truth.tsv").string(), truth);

  std::printf("users\t%zu\nitems\t%zu\nsessions\t%zu\ntransactions\t%zu\ncontext_fields\t%zu\n",
              data.users, data.distinct_items, data.sessions, data.transactions, sc.fields);
  return 0;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

int cmd_preprocess(const RunConfig& cfg) {
  const std::string raw = cfg.require("raw_path");
  const char delim = cfg.get_delimiter("delimiter", '\t');
  const char multi = cfg.get_delimiter("multi_delimiter", '|');
  PreprocessConfig pc;
  pc.gap_threshold_seconds = cfg.get_int("gap_threshold_seconds", pc.gap_threshold_seconds);
  pc.item_coverage = cfg.get_double("item_coverage", pc.item_coverage);
  pc.category_coverage = cfg.get_double("category_coverage", pc.category_coverage);
  pc.test_window_seconds =
      static_cast<std::int64_t>(cfg.get_double("test_window_days", 3.0) * 86400.0);
  const std::string scope = cfg.get_string("item_coverage_scope", "full");
  if (scope == "full") {
    pc.item_coverage_scope = CoverageScope::kFullLog;
  } else if (scope == "train") {
    pc.item_coverage_scope = CoverageScope::kTrainOnly;
  } else {
    throw ConfigError("item_coverage_scope must be 'full' or 'train'");
  }
  detail::check_coverage(pc.item_coverage, "item_coverage");
  detail::check_coverage(pc.category_coverage, "category_coverage");
  const std::string dir = out_dir(cfg);
  const std::string train_path = path_in(cfg, "train_data", dir, "train.json");
  const std::string test_path = path_in(cfg, "test_data", dir, "test.json");

  const EventLog log = read_event_log_file(raw, delim, multi);
  const PreprocessResult r = preprocess(log, pc);
  ensure_dir(dir);
  save_dataset(r.train, train_path);
  save_dataset(r.test, test_path);

  char buf[512];
  std::snprintf(buf, sizeof buf,
                "users\t%zu\nitems\t%zu\nsessions\t%zu\ntransactions\t%zu\ncontext_fields\t%zu\n"
                "input_fields\t%zu\ntrain_sessions\t%zu\ntest_sessions\t%zu\n",
                r.stats.users, r.stats.items, r.stats.sessions, r.stats.transactions,
                r.stats.context_fields, r.stats.input_fields, r.train.sessions.size(),
                r.test.sessions.size());
  write_text((fs::path(dir) / "stats.tsv").string(), buf);
  std::fputs(buf, stdout);
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainSettings {
  Stage stage;
  Profile profile;
  TrainPlan plan;
  double validation_fraction;
  int precision;
  std::string train_path;
  std::string ckpt_dir;
  std::string gru_path;
  std::string pnn_path;
};

TrainSettings train_settings(const RunConfig& cfg) {
  TrainSettings s{};
  if (!cfg.has("stage")) throw ConfigError("train needs --stage gru|pnn|merge");
  s.stage = parse_stage(cfg.require("stage"));
  s.profile = resolve_profile(cfg);
  s.plan = default_plan(s.stage, s.profile, static_cast<std::uint64_t>(cfg.get_int("seed", 1)));
  s.plan.epochs = cfg.get_size("epochs", s.plan.epochs);
  s.plan.batch_lanes = cfg.get_size("batch_lanes", s.plan.batch_lanes);
  s.plan.optimizer.learning_rate = cfg.get_double("learning_rate", s.plan.optimizer.learning_rate);
  s.plan.optimizer.weight_decay = cfg.get_double("weight_decay", s.plan.optimizer.weight_decay);
  s.plan.patience = cfg.get_size("patience", s.plan.patience);
  s.plan.eval_k = cfg.get_size("k", s.plan.eval_k);
  Adagrad check(s.plan.optimizer);
  (void)check;
  if (s.plan.batch_lanes < 2) throw ConfigError("batch_lanes must be at least 2");
  if (s.plan.eval_k == 0) throw ConfigError("k must be positive");
  s.validation_fraction = cfg.get_double("validation_fraction", 0.1);
  if (s.validation_fraction < 0.0 || s.validation_fraction >= 1.0) {
    throw ConfigError("validation_fraction must be in [0, 1)");
  }
  s.precision = precision_of(cfg);
  const std::string dir = out_dir(cfg);
  s.train_path = path_in(cfg, "train_data", dir, "train.json");
  s.ckpt_dir = cfg.get_string("checkpoint_dir", dir);
  s.gru_path = path_in(cfg, "gru_checkpoint", s.ckpt_dir, "gru.ckpt");
  s.pnn_path = path_in(cfg, "pnn_checkpoint", s.ckpt_dir, "pnn.ckpt");
  if (s.stage == Stage::kMerge) {
    for (const auto& p : {s.gru_path, s.pnn_path}) {
      if (!fs::exists(p)) {
        throw ConfigError("merge stage needs pretrained checkpoint " + p +
                          " (run train --stage gru and --stage pnn first)");
      }
    }
  }
  return s;
}

template <typename Real>
StageOutput run_training(const TrainSettings& s, const SessionDataset& fit,
                         const SessionDataset& val) {
  switch (s.stage) {
    case Stage::kGruPretrain: return train_gru_stage<Real>(s.profile, s.plan, fit, val);
    case Stage::kPnnPretrain: return train_pnn_stage<Real>(s.profile, s.plan, fit, val);
    case Stage::kMerge: {
      const Checkpoint gru = load_checkpoint(s.gru_path);
      const Checkpoint pnn = load_checkpoint(s.pnn_path);
      auto out = train_merge_stage<Real>(s.profile, s.plan, gru, pnn, fit, val);
      out.checkpoint.references = {{"gru", s.gru_path}, {"pnn", s.pnn_path}};
      return out;
    }
  }
  throw ConfigError("unknown stage");
}

int cmd_train(const RunConfig& cfg) {
  const TrainSettings s = train_settings(cfg);
  const SessionDataset train = load_dataset(s.train_path);
  auto [fit, val] = split_validation(train, s.validation_fraction);
  if (fit.sessions.empty()) throw DataError("no training sessions left after the validation split");

  StageOutput out = s.precision == 32 ? run_training<float>(s, fit, val)
                                      : run_training<double>(s, fit, val);
  out.checkpoint.hyperparameters["precision"] = s.precision;
  ensure_dir(s.ckpt_dir);
  const std::string name = stage_name(s.stage);
  const std::string ckpt = (fs::path(s.ckpt_dir) / (name + ".ckpt")).string();
  save_checkpoint(out.checkpoint, ckpt);
  const std::string history = format_history(out.result.history, s.plan.eval_k);
  write_text((fs::path(s.ckpt_dir) / (name + "_history.tsv")).string(), history);
  std::fputs(history.c_str(), stdout);
  std::printf("best_epoch\t%zu\ncheckpoint\t%s\n", out.result.best_epoch, ckpt.c_str());
  if (out.result.diverged) {
    std::fprintf(stderr, "arnn: training diverged: %s (best checkpoint kept)\n",
                 out.result.divergence.c_str());
    return static_cast<int>(ExitCode::kNumericDivergence);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& part : split_string(s, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

template <typename Real>
EvalReport evaluate_checkpoint(const std::string& system, const Checkpoint& c,
                               const SessionDataset& test, std::size_t k, std::size_t lanes) {
  c.require_schema(test.schema);
  if (system == "gru") {
    if (!c.gru) throw DataError("checkpoint has no GRU block");
    auto m = gru_from_block<Real>(*c.gru);
    ModelScorer<Real, decltype(m)> scorer(m);
    return evaluate_system(scorer, test, k, system, lanes);
  }
  if (system == "pnn") {
    if (!c.pnn) throw DataError("checkpoint has no PNN block");
    auto m = pnn_from_block<Real>(*c.pnn);
    ModelScorer<Real, decltype(m)> scorer(m);
    return evaluate_system(scorer, test, k, system, lanes);
  }
  auto m = arnn_from_checkpoint<Real>(c);
  ModelScorer<Real, decltype(m)> scorer(m);
  return evaluate_system(scorer, test, k, system, lanes);
}

int cmd_evaluate(const RunConfig& cfg) {
  const std::size_t k = cfg.get_size("k", 20);
  if (k == 0) throw ConfigError("k must be positive");
  const auto systems = split_list(cfg.get_string("systems", "itemknn,gru,pnn,arnn"));
  if (systems.empty()) throw ConfigError("systems list is empty");
  for (const auto& s : systems) {
    if (s != "itemknn" && s != "gru" && s != "pnn" && s != "arnn") {
      throw ConfigError("unknown system '" + s + "' (expected itemknn, gru, pnn, arnn)");
    }
  }
  const double lambda = cfg.get_double("knn_lambda", 20.0);
  const std::size_t neighbors = cfg.get_size("knn_neighbors", 100);
  const std::size_t lanes = cfg.get_size("eval_lanes", 32);
  if (lanes < 2) throw ConfigError("eval_lanes must be at least 2");
  const int precision = precision_of(cfg);
  const std::string dir = out_dir(cfg);
  const std::string ckpt_dir = cfg.get_string("checkpoint_dir", dir);
  const std::string train_path = path_in(cfg, "train_data", dir, "train.json");
  const std::string test_path = path_in(cfg, "test_data", dir, "test.json");
  auto ckpt_for = [&](const std::string& system) {
    if (system == "gru") return path_in(cfg, "gru_checkpoint", ckpt_dir, "gru.ckpt");
    if (system == "pnn") return path_in(cfg, "pnn_checkpoint", ckpt_dir, "pnn.ckpt");
    return path_in(cfg, "checkpoint", ckpt_dir, "merge.ckpt");
  };
  for (const auto& s : systems) {
    if (s != "itemknn" && !fs::exists(ckpt_for(s))) {
      throw ConfigError("system " + s + " needs checkpoint " + ckpt_for(s));
    }
  }

  const SessionDataset test = load_dataset(test_path);
  std::vector<EvalReport> reports;
  for (const auto& s : systems) {
    if (s == "itemknn") {
      const SessionDataset train = load_dataset(train_path);
      if (train.schema.hash() != test.schema.hash()) {
        throw DataError("train and test datasets have different schemas");
      }
      auto index = build_itemknn(train, lambda, neighbors);
      reports.push_back(evaluate_system(index, test, k, s, lanes));
      continue;
    }
    const Checkpoint c = load_checkpoint(ckpt_for(s));
    reports.push_back(precision == 32 ? evaluate_checkpoint<float>(s, c, test, k, lanes)
                                      : evaluate_checkpoint<double>(s, c, test, k, lanes));
  }
  ensure_dir(dir);
  write_text((fs::path(dir) / "report.tsv").string(), format_report_tsv(reports));
  std::fputs(format_report_table(reports).c_str(), stdout);
  return 0;
}

// ---------------------------------------------------------------------------
// recommend
// ---------------------------------------------------------------------------

/// ITEM[@field=v1|v2;field2=v]
std::pair<std::string, Attributes> parse_token(const std::string& token) {
  const auto at = token.find('@');
  std::pair<std::string, Attributes> out{token.substr(0, at), {}};
  if (out.first.empty()) throw DataError("empty item in prefix token '" + token + "'");
  if (at == std::string::npos) return out;
  for (const auto& part : split_string(token.substr(at + 1), ';')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw DataError("context '" + part + "' is not field=value");
    out.second[part.substr(0, eq)] = split_string(part.substr(eq + 1), '|');
  }
  return out;
}

template <typename Real, typename Model>
Tensor<Real> stream_prefix(Model& model, const std::vector<ItemIndex>& items,
                           const std::vector<Context>& contexts) {
  model.reset_state(1);
  Tensor<Real> last;
  for (std::size_t t = 0; t < items.size(); ++t) {
    StepInput in{{0}, {items[t]}, {contexts[t]}, {t == 0}};
    Tape<Real> tape;
    last = model.logits(tape, in, Mode::kInference).value();
  }
  return last;
}

template <typename Real>
Tensor<Real> score_prefix(const Checkpoint& c, const std::vector<ItemIndex>& items,
                          const std::vector<Context>& contexts) {
  if (c.stage == "gru") {
    auto m = gru_from_block<Real>(*c.gru);
    return stream_prefix<Real>(m, items, contexts);
  }
  if (c.stage == "pnn") {
    auto m = pnn_from_block<Real>(*c.pnn);
    return stream_prefix<Real>(m, items, contexts);
  }
  auto m = arnn_from_checkpoint<Real>(c);
  return stream_prefix<Real>(m, items, contexts);
}

int cmd_recommend(const RunConfig& cfg, const std::vector<std::string>& prefix) {
  const std::size_t k = cfg.get_size("k", 20);
  if (k == 0) throw ConfigError("k must be positive");
  if (prefix.empty()) throw ConfigError("recommend needs at least one prefix item");
  const int precision = precision_of(cfg);
  const std::string dir = out_dir(cfg);
  const std::string path =
      path_in(cfg, "checkpoint", cfg.get_string("checkpoint_dir", dir), "merge.ckpt");

  const Checkpoint c = load_checkpoint(path);
  const FieldSchema schema = c.field_schema();
  std::vector<ItemIndex> items;
  std::vector<Context> contexts;
  std::vector<std::string> unknown;
  for (const auto& token : prefix) {
    auto [item, attrs] = parse_token(token);
    const auto idx = schema.item_index(item);
    if (!idx) {
      unknown.push_back(item);
      continue;
    }
    items.push_back(*idx);
    contexts.push_back(encode_context(attrs, schema));
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw DataError("items not in the vocabulary: " + list);
  }

  std::vector<std::pair<ItemIndex, double>> ranked;
  if (precision == 32) {
    const auto scores = score_prefix<float>(c, items, contexts);
    for (auto i : top_k(scores.row(0), k)) ranked.emplace_back(i, scores(0, i));
  } else {
    const auto scores = score_prefix<double>(c, items, contexts);
    for (auto i : top_k(scores.row(0), k)) ranked.emplace_back(i, scores(0, i));
  }
  std::printf("rank\titem\tscore\n");
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    std::printf("%zu\t%s\t%.6f\n", r + 1, schema.items()[ranked[r].first].c_str(), ranked[r].second);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ARNN session-based recommender"};
  app.require_subcommand(1);
  Flags flags;
  auto* synth = app.add_subcommand("synth", "generate context-dependent synthetic sessions");
  auto* prep = app.add_subcommand("preprocess", "sessionize, sample, encode and split a raw log");
  auto* train = app.add_subcommand("train", "train one stage (gru, pnn, merge)");
  auto* eval = app.add_subcommand("evaluate", "Recall@k and MRR@k for itemknn, gru, pnn, arnn");
  auto* rec = app.add_subcommand("recommend", "top-k next items for a session prefix");
  for (auto* cmd : {synth, prep, train, eval, rec}) add_common(cmd, flags);
  train->add_option("--stage", flags.stage, "gru, pnn or merge");
  rec->add_option("prefix", flags.positional, "ITEM[@field=v1|v2;field2=v] tokens, oldest first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfigError);
  }

  try {
    const RunConfig cfg = resolve(flags);
    if (synth->parsed()) return cmd_synth(cfg);
    if (prep->parsed()) return cmd_preprocess(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (eval->parsed()) return cmd_evaluate(cfg);
    return cmd_recommend(cfg, flags.positional);
  } catch (const Error& e) {
    std::fprintf(stderr, "arnn: %s\n", e.what());
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "arnn: internal error: %s\n", e.what());
    return 1;
  }
}
