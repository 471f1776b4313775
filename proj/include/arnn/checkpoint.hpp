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

// Checkpoint files are JSON objects:
//
//   format           "arnn-checkpoint", version 1
//   stage            "gru" | "pnn" | "merge"
//   schema_hash      FieldSchema::hash() of the training data
//   hyperparameters  free-form object recorded by the trainer
//   schema           the FieldSchema itself, so recommend needs no dataset
//   references       paths of the pretraining checkpoints (merge only)
//   gru | pnn | merge  model blocks present for the stage
//
// A block is { config: {...}, parameters: [{name, shape, values}],
// running_stats: {bn-name: {mean, var}} }. Values are written with
// round-trip precision, so a block re-serializes to the same bytes.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "arnn/data.hpp"
#include "arnn/error.hpp"
#include "arnn/io.hpp"
#include "arnn/models.hpp"
#include "arnn/tensor.hpp"

namespace arnn {

struct Checkpoint {
  std::string stage;
  std::string schema_hash;
  nlohmann::json hyperparameters = nlohmann::json::object();
  nlohmann::json references = nlohmann::json::object();
  std::optional<nlohmann::json> schema;
  std::optional<nlohmann::json> gru;
  std::optional<nlohmann::json> pnn;
  std::optional<nlohmann::json> merge;

  nlohmann::json to_json() const {
    nlohmann::json j{{"format", "arnn-checkpoint"},
                     {"version", 1},
                     {"stage", stage},
                     {"schema_hash", schema_hash},
                     {"hyperparameters", hyperparameters},
                     {"references", references}};
    if (schema) j["schema"] = *schema;
    if (gru) j["gru"] = *gru;
    if (pnn) j["pnn"] = *pnn;
    if (merge) j["merge"] = *merge;
    return j;
  }

  static Checkpoint from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "arnn-checkpoint" || j.value("version", 0) != 1) {
      throw DataError("not an arnn-checkpoint v1 file");
    }
    Checkpoint c;
    c.stage = j.at("stage").get<std::string>();
    c.schema_hash = j.at("schema_hash").get<std::string>();
    c.hyperparameters = j.value("hyperparameters", nlohmann::json::object());
    c.references = j.value("references", nlohmann::json::object());
    if (j.contains("schema")) c.schema = j.at("schema");
    if (j.contains("gru")) c.gru = j.at("gru");
    if (j.contains("pnn")) c.pnn = j.at("pnn");
    if (j.contains("merge")) c.merge = j.at("merge");
    return c;
  }

  FieldSchema field_schema() const {
    if (!schema) throw DataError("checkpoint carries no schema");
    FieldSchema out = schema_from_json(*schema);
    if (out.hash() != schema_hash) throw DataError("checkpoint schema does not match its hash");
    return out;
  }

  /// Fails loudly when the checkpoint was trained on a different schema.
  void require_schema(const FieldSchema& schema) const {
    if (schema_hash != schema.hash()) {
      throw DataError("schema hash mismatch: checkpoint " + schema_hash + ", dataset " +
                      schema.hash());
    }
  }
};

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << c.to_json().dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path);
  try {
    return Checkpoint::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  }
}

namespace detail {

template <typename Real>
nlohmann::json tensor_values(const Tensor<Real>& t) {
  std::vector<double> v(t.values().begin(), t.values().end());
  return v;
}

template <typename Real>
nlohmann::json parameters_json(const std::vector<Parameter<Real>*>& params) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto* p : params) {
    out.push_back({{"name", p->name}, {"shape", p->shape()}, {"values", tensor_values(p->value)}});
  }
  return out;
}

template <typename Real>
Tensor<Real> tensor_from(const nlohmann::json& values, const Shape& shape, const std::string& name) {
  const auto v = values.get<std::vector<double>>();
  if (v.size() != shape_size(shape)) {
    throw DataError("tensor " + name + ": " + std::to_string(v.size()) + " values for shape " +
                    shape_string(shape));
  }
  return Tensor<Real>(shape, std::vector<Real>(v.begin(), v.end()));
}

/// Copies stored tensors into `params`, matching by name and shape.
template <typename Real>
void load_parameters(const nlohmann::json& stored, const std::vector<Parameter<Real>*>& params) {
  for (auto* p : params) {
    const nlohmann::json* found = nullptr;
    for (const auto& s : stored) {
      if (s.at("name").get<std::string>() == p->name) {
        found = &s;
        break;
      }
    }
    if (!found) throw DataError("checkpoint is missing tensor " + p->name);
    const auto shape = found->at("shape").get<Shape>();
    if (shape != p->shape()) {
      throw DataError("tensor " + p->name + " has shape " + shape_string(shape) +
                      " in the checkpoint but the model expects " + shape_string(p->shape()));
    }
    p->assign(tensor_from<Real>(found->at("values"), shape, p->name));
  }
}

template <typename Real>
nlohmann::json running_stats_json(const BatchNorm<Real>& bn) {
  return {{"mean", tensor_values(bn.running_mean)}, {"var", tensor_values(bn.running_var)}};
}

template <typename Real>
void load_running_stats(const nlohmann::json& block, const std::string& name, BatchNorm<Real>& bn) {
  const auto& stats = block.at("running_stats").at(name);
  bn.running_mean = tensor_from<Real>(stats.at("mean"), Shape{bn.dim()}, name + ".running_mean");
  bn.running_var = tensor_from<Real>(stats.at("var"), Shape{bn.dim()}, name + ".running_var");
}

}  // namespace detail

template <typename Real>
nlohmann::json gru_block(GruSessionModel<Real>& gru) {
  return {{"config",
           {{"items", gru.items()}, {"hidden_size", gru.hidden_size()}, {"dropout", gru.dropout()}}},
          {"parameters", detail::parameters_json(gru.parameters())},
          {"running_stats", nlohmann::json::object()}};
}

template <typename Real>
GruSessionModel<Real> gru_from_block(const nlohmann::json& block) {
  try {
    const auto& cfg = block.at("config");
    Rng rng(0);
    GruSessionModel<Real> gru(cfg.at("items").get<std::size_t>(),
                              cfg.at("hidden_size").get<std::size_t>(),
                              cfg.at("dropout").get<double>(), rng);
    detail::load_parameters(block.at("parameters"), gru.parameters());
    return gru;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed GRU block: ") + e.what());
  }
}

template <typename Real>
nlohmann::json pnn_block(PnnEncoder<Real>& pnn) {
  return {{"config",
           {{"field_sizes", pnn.field_sizes()},
            {"items", pnn.items()},
            {"embedding_dim", pnn.embedding_dim()},
            {"context_size", pnn.context_size()}}},
          {"parameters", detail::parameters_json(pnn.parameters())},
          {"running_stats", {{"pnn.bn", detail::running_stats_json(pnn.bn)}}}};
}

template <typename Real>
PnnEncoder<Real> pnn_from_block(const nlohmann::json& block) {
  try {
    const auto& cfg = block.at("config");
    Rng rng(0);
    PnnEncoder<Real> pnn(cfg.at("field_sizes").get<std::vector<std::size_t>>(),
                         cfg.at("items").get<std::size_t>(),
                         cfg.at("embedding_dim").get<std::size_t>(),
                         cfg.at("context_size").get<std::size_t>(), rng);
    detail::load_parameters(block.at("parameters"), pnn.parameters());
    detail::load_running_stats(block, "pnn.bn", pnn.bn);
    return pnn;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed PNN block: ") + e.what());
  }
}

template <typename Real>
nlohmann::json merge_block(ArnnModel<Real>& arnn) {
  return {{"config", {{"merge_size", arnn.merge_size()}}},
          {"parameters", detail::parameters_json(arnn.merge_parameters())},
          {"running_stats", {{"merge.bn", detail::running_stats_json(arnn.merge_bn)}}}};
}

/// Rebuilds an ARNN from a merge checkpoint (which carries all three
/// blocks). Extractor parameters come back frozen.
template <typename Real>
ArnnModel<Real> arnn_from_checkpoint(const Checkpoint& c) {
  if (!c.gru || !c.pnn || !c.merge) {
    throw DataError("checkpoint of stage '" + c.stage + "' lacks the blocks of an ARNN model");
  }
  try {
    Rng rng(0);
    ArnnModel<Real> arnn(pnn_from_block<Real>(*c.pnn), gru_from_block<Real>(*c.gru),
                         c.merge->at("config").at("merge_size").get<std::size_t>(), rng);
    detail::load_parameters(c.merge->at("parameters"), arnn.merge_parameters());
    detail::load_running_stats(*c.merge, "merge.bn", arnn.merge_bn);
    return arnn;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed merge block: ") + e.what());
  }
}

}  // namespace arnn
