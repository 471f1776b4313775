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
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "arnn/data.hpp"
#include "arnn/error.hpp"

namespace arnn {

enum class CoverageScope { kFullLog, kTrainOnly };

struct PreprocessConfig {
  std::int64_t gap_threshold_seconds = 3600;
  double item_coverage = 0.5;
  double category_coverage = 0.75;
  std::int64_t test_window_seconds = 3 * 86400;
  CoverageScope item_coverage_scope = CoverageScope::kFullLog;
};

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t sessions = 0;
  std::size_t transactions = 0;
  std::size_t context_fields = 0;
  /// Context fields plus the previous-item field.
  std::size_t input_fields = 0;
};

struct PreprocessResult {
  SessionDataset train;
  SessionDataset test;
  DatasetStats stats;
};

namespace detail {

inline std::vector<RawEvent> flatten(const std::vector<RawSession>& sessions) {
  std::vector<RawEvent> out;
  for (const auto& s : sessions) out.insert(out.end(), s.events.begin(), s.events.end());
  return out;
}

/// Removes events of non-retained items; sessions left with fewer than two
/// events are dropped.
inline std::vector<RawSession> drop_items(const std::vector<RawSession>& sessions,
                                          const std::vector<std::string>& retained) {
  const std::unordered_set<std::string> keep(retained.begin(), retained.end());
  std::vector<RawSession> out;
  for (const auto& s : sessions) {
    RawSession kept{s.user_id, {}};
    for (const auto& e : s.events) {
      if (keep.count(e.item_id)) kept.events.push_back(e);
    }
    if (kept.events.size() >= 2) out.push_back(std::move(kept));
  }
  return out;
}

}  // namespace detail

/// Session marking, item sampling, multi-valued capping, encoding and the
/// time split, in that order.
inline PreprocessResult preprocess(const EventLog& log, const PreprocessConfig& config) {
  if (log.events.empty()) throw DataError("event log is empty");
  const auto sorted = sort_events_per_user(log.events);
  auto sessions = mark_sessions(sorted, config.gap_threshold_seconds);
  if (sessions.empty()) throw DataError("no session with at least two events");

  // Item sampling.
  std::vector<RawEvent> counted;
  if (config.item_coverage_scope == CoverageScope::kTrainOnly) {
    std::int64_t last = std::numeric_limits<std::int64_t>::min();
    for (const auto& s : sessions) last = std::max(last, s.events.back().timestamp);
    for (const auto& s : sessions) {
      if (s.events.front().timestamp <= last - config.test_window_seconds) {
        counted.insert(counted.end(), s.events.begin(), s.events.end());
      }
    }
    if (counted.empty()) throw DataError("no training sessions before the test window");
  } else {
    counted = detail::flatten(sessions);
  }
  const auto retained = sample_items_by_coverage(counted, config.item_coverage);
  sessions = detail::drop_items(sessions, retained);
  if (sessions.empty()) throw DataError("no session survives item sampling");

  // Capping of multi-valued fields.
  EventLog flat{log.field_names, detail::flatten(sessions)};
  std::vector<FieldSpec> fields;
  for (const auto& name : log.field_names) {
    bool multi = false;
    for (const auto& e : flat.events) {
      auto it = e.attributes.find(name);
      if (it != e.attributes.end() && it->second.size() > 1) {
        multi = true;
        break;
      }
    }
    if (multi) {
      auto capped = cap_multivalued(flat, name, config.category_coverage);
      flat.events = std::move(capped.events);
      fields.push_back(FieldSpec{name, std::move(capped.categories)});
    } else {
      // Single-valued: every observed category in first-seen order, then
      // the unknown slot for missing values.
      std::vector<std::string> cats;
      std::unordered_set<std::string> seen;
      for (const auto& e : flat.events) {
        auto it = e.attributes.find(name);
        if (it == e.attributes.end()) continue;
        for (const auto& v : it->second) {
          if (v != kUnknownCategory && seen.insert(v).second) cats.push_back(v);
        }
      }
      cats.push_back(kUnknownCategory);
      fields.push_back(FieldSpec{name, std::move(cats)});
    }
  }

  // Regroup the rewritten events into their sessions; flatten() preserved
  // session order and length.
  std::size_t cursor = 0;
  for (auto& s : sessions) {
    for (auto& e : s.events) e = flat.events[cursor++];
  }

  std::vector<std::string> items;
  {
    std::unordered_set<std::string> seen;
    for (const auto& e : flat.events) {
      if (seen.insert(e.item_id).second) items.push_back(e.item_id);
    }
  }
  FieldSchema schema(std::move(fields), std::move(items));

  // Static user context: the first event's attributes apply to every step.
  std::vector<Session> encoded;
  encoded.reserve(sessions.size());
  for (const auto& s : sessions) {
    Session out;
    out.start_time = s.events.front().timestamp;
    out.end_time = s.events.back().timestamp;
    const Context ctx = encode_context(s.events.front().attributes, schema);
    for (const auto& e : s.events) out.steps.push_back(Step{ctx, *schema.item_index(e.item_id)});
    encoded.push_back(std::move(out));
  }
  std::stable_sort(encoded.begin(), encoded.end(), [](const Session& a, const Session& b) {
    return a.start_time < b.start_time;
  });

  auto [train, test] = split_train_test(encoded, schema, config.test_window_seconds);

  PreprocessResult result{std::move(train), std::move(test), {}};
  std::unordered_set<std::string> users;
  for (const auto& s : sessions) users.insert(s.user_id);
  result.stats.users = users.size();
  result.stats.items = result.train.schema.item_count();
  result.stats.sessions = result.train.sessions.size() + result.test.sessions.size();
  result.stats.transactions = result.train.transactions() + result.test.transactions();
  result.stats.context_fields = log.field_names.size();
  result.stats.input_fields = log.field_names.size() + 1;
  return result;
}

}  // namespace arnn
