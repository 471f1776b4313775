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

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "arnn/data.hpp"
#include "arnn/error.hpp"

namespace arnn {

inline std::vector<std::string> split_string(std::string_view text, char delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(delimiter, start);
    out.emplace_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Reads a delimited event log. The header must start with user_id, item_id
/// and timestamp; every further column is a context field whose cell holds
/// zero or more categories separated by `multi_delimiter`.
inline EventLog read_event_log(std::istream& in, char delimiter = '\t',
                               char multi_delimiter = '|') {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&line_no](const std::string& msg) -> DataError {
    return DataError("line " + std::to_string(line_no) + ": " + msg);
  };
  if (!std::getline(in, line)) throw DataError("event log has no header row");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_string(line, delimiter);
  if (header.size() < 3 || header[0] != "user_id" || header[1] != "item_id" ||
      header[2] != "timestamp") {
    throw fail("header must begin with user_id, item_id, timestamp");
  }
  EventLog log;
  log.field_names.assign(header.begin() + 3, header.end());
  for (const auto& name : log.field_names) {
    if (name.empty()) throw fail("empty field name in header");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cols = split_string(line, delimiter);
    if (cols.size() != header.size()) {
      throw fail("expected " + std::to_string(header.size()) + " columns, got " +
                 std::to_string(cols.size()));
    }
    RawEvent e;
    e.user_id = cols[0];
    e.item_id = cols[1];
    if (e.item_id.empty()) throw fail("empty item_id");
    const auto& ts = cols[2];
    auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), e.timestamp);
    if (ec != std::errc() || ptr != ts.data() + ts.size() || e.timestamp < 0) {
      throw fail("bad timestamp '" + ts + "'");
    }
    for (std::size_t f = 0; f < log.field_names.size(); ++f) {
      const auto& cell = cols[f + 3];
      if (cell.empty()) continue;
      auto values = split_string(cell, multi_delimiter);
      std::erase(values, std::string());
      if (!values.empty()) e.attributes[log.field_names[f]] = std::move(values);
    }
    log.events.push_back(std::move(e));
  }
  return log;
}

inline EventLog read_event_log_file(const std::string& path, char delimiter = '\t',
                                    char multi_delimiter = '|') {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open event log " + path);
  return read_event_log(in, delimiter, multi_delimiter);
}

inline void write_event_log(std::ostream& out, const EventLog& log, char delimiter = '\t',
                            char multi_delimiter = '|') {
  out << "user_id" << delimiter << "item_id" << delimiter << "timestamp";
  for (const auto& f : log.field_names) out << delimiter << f;
  out << '\n';
  for (const auto& e : log.events) {
    out << e.user_id << delimiter << e.item_id << delimiter << e.timestamp;
    for (const auto& f : log.field_names) {
      out << delimiter;
      auto it = e.attributes.find(f);
      if (it == e.attributes.end()) continue;
      for (std::size_t k = 0; k < it->second.size(); ++k) {
        if (k) out << multi_delimiter;
        out << it->second[k];
      }
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Dataset files
//
// JSON object:
//   format   "arnn-dataset", version 1
//   schema   { fields: [{name, categories: [..]}], items: [..], hash }
//   sessions [{ start, end, items: [i0, i1, ..], contexts: [[pos..], ..] }]
// ---------------------------------------------------------------------------

inline nlohmann::json schema_to_json(const FieldSchema& schema) {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : schema.fields()) {
    fields.push_back({{"name", f.name}, {"categories", f.categories}});
  }
  return {{"fields", fields}, {"items", schema.items()}, {"hash", schema.hash()}};
}

inline FieldSchema schema_from_json(const nlohmann::json& j) {
  std::vector<FieldSpec> fields;
  for (const auto& f : j.at("fields")) {
    fields.push_back(FieldSpec{f.at("name").get<std::string>(),
                               f.at("categories").get<std::vector<std::string>>()});
  }
  FieldSchema schema(std::move(fields), j.at("items").get<std::vector<std::string>>());
  if (j.contains("hash") && j.at("hash").get<std::string>() != schema.hash()) {
    throw DataError("schema hash mismatch: file says " + j.at("hash").get<std::string>() +
                    ", contents hash to " + schema.hash());
  }
  return schema;
}

inline nlohmann::json dataset_to_json(const SessionDataset& data) {
  nlohmann::json sessions = nlohmann::json::array();
  for (const auto& s : data.sessions) {
    std::vector<ItemIndex> items;
    std::vector<Context> contexts;
    for (const auto& st : s.steps) {
      items.push_back(st.item);
      contexts.push_back(st.context);
    }
    sessions.push_back(
        {{"start", s.start_time}, {"end", s.end_time}, {"items", items}, {"contexts", contexts}});
  }
  return {{"format", "arnn-dataset"},
          {"version", 1},
          {"schema", schema_to_json(data.schema)},
          {"sessions", sessions}};
}

inline SessionDataset dataset_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "arnn-dataset" || j.value("version", 0) != 1) {
    throw DataError("not an arnn-dataset v1 file");
  }
  SessionDataset data;
  data.schema = schema_from_json(j.at("schema"));
  for (const auto& js : j.at("sessions")) {
    Session s;
    s.start_time = js.at("start").get<std::int64_t>();
    s.end_time = js.at("end").get<std::int64_t>();
    const auto items = js.at("items").get<std::vector<ItemIndex>>();
    const auto contexts = js.at("contexts").get<std::vector<Context>>();
    if (items.size() != contexts.size()) throw DataError("session items/contexts length mismatch");
    for (std::size_t k = 0; k < items.size(); ++k) s.steps.push_back(Step{contexts[k], items[k]});
    data.sessions.push_back(std::move(s));
  }
  data.validate();
  return data;
}

inline void save_dataset(const SessionDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset " + path);
  out << dataset_to_json(data).dump() << '\n';
}

inline SessionDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path);
  try {
    return dataset_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("dataset " + path + ": " + e.what());
  }
}

}  // namespace arnn
