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

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "arnn/error.hpp"

namespace arnn {

/// Every key a config file or --set override may carry.
inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      // preprocess
      "raw_path", "delimiter", "multi_delimiter", "gap_threshold_seconds", "item_coverage",
      "category_coverage", "test_window_days", "item_coverage_scope",
      // synth
      "sessions", "items", "fields", "context_dependent", "min_length", "max_length", "days",
      // train
      "stage", "profile", "seed", "epochs", "batch_lanes", "learning_rate", "weight_decay",
      "patience", "validation_fraction", "precision", "hidden_size", "embedding_dim",
      "context_size", "merge_size", "gru_dropout", "gru_checkpoint", "pnn_checkpoint",
      // evaluate / recommend
      "k", "systems", "knn_lambda", "knn_neighbors", "eval_lanes", "checkpoint",
      // paths
      "train_data", "test_data", "checkpoint_dir", "out"};
  return keys;
}

/// Flat key=value configuration. Later sources override earlier ones; keys
/// outside known_config_keys() are rejected.
class RunConfig {
 public:
  static RunConfig parse(std::istream& in, const std::string& origin = "config") {
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value");
      }
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value) {
    if (!known_config_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  /// Parses "key=value".
  void set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
  }

  std::string require(const std::string& key) const {
    auto v = get(key);
    if (!v || v->empty()) throw ConfigError("missing required config key '" + key + "'");
    return *v;
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const double d = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' expects a number, got '" + *v + "'");
    }
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) {
      throw ConfigError("config key '" + key + "' expects an integer, got '" + *v + "'");
    }
    return out;
  }

  std::size_t get_size(const std::string& key, std::size_t fallback) const {
    const auto v = get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError("config key '" + key + "' must be non-negative");
    return static_cast<std::size_t>(v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("config key '" + key + "' expects a boolean, got '" + *v + "'");
  }

  /// Single-character delimiter; accepts the names "tab" and "comma".
  char get_delimiter(const std::string& key, char fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "tab" || *v == "\\t") return '\t';
    if (*v == "comma") return ',';
    if (v->size() != 1) throw ConfigError("config key '" + key + "' expects one character");
    return (*v)[0];
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace arnn
