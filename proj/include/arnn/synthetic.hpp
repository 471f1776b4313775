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

// Context-dependent navigation data with known ground truth.
//
// Items are split round-robin into one group per context field. Every item
// has two successors, both in the next group. In the context-dependent
// variant the successor is picked by the parity of the user's category in
// the field owning the current item's group; otherwise by a fair coin.
// Because consecutive steps consult different fields, and sessions have at
// most `fields` transitions, the item history says nothing about the next
// choice: a context-blind model tops out near Recall@1 = 0.5.

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "arnn/data.hpp"
#include "arnn/error.hpp"
#include "arnn/random.hpp"

namespace arnn {

struct SyntheticConfig {
  std::size_t sessions = 2000;
  std::size_t items = 60;
  std::size_t fields = 6;
  bool context_dependent = true;
  std::size_t min_length = 3;
  std::size_t max_length = 7;
  std::int64_t days = 30;
  std::int64_t start_time = 1'600'000'000;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  EventLog log;
  /// successors[item][choice] for choice in {0, 1}.
  std::vector<std::array<std::size_t, 2>> successors;
  /// Category count of each field; a category's parity is its choice bit.
  std::vector<std::size_t> field_sizes;
  std::size_t users = 0;
  std::size_t sessions = 0;
  std::size_t transactions = 0;
  std::size_t distinct_items = 0;
};

inline std::string synthetic_item_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "item%03zu", i);
  return buf;
}

inline std::string synthetic_field_name(std::size_t f) { return "field" + std::to_string(f); }

inline std::string synthetic_category_name(std::size_t c) { return "c" + std::to_string(c); }

/// Field consulted when leaving `item`.
inline std::size_t synthetic_field_of(std::size_t item, std::size_t fields) { return item % fields; }

inline SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.fields < 2 || cfg.items < 4 * cfg.fields) {
    throw ConfigError("synthetic data needs >= 2 fields and >= 4 items per field");
  }
  if (cfg.min_length < 2 || cfg.max_length < cfg.min_length || cfg.max_length > cfg.fields + 1) {
    throw ConfigError("synthetic session lengths must satisfy 2 <= min <= max <= fields + 1");
  }
  if (cfg.sessions == 0 || cfg.days <= 0) throw ConfigError("synthetic: sessions and days must be > 0");

  Rng rng(derive_seed(cfg.seed, 7));
  SyntheticData out;
  for (std::size_t f = 0; f < cfg.fields; ++f) out.field_sizes.push_back(2 * (1 + f % 3));

  std::vector<std::vector<std::size_t>> group(cfg.fields);
  for (std::size_t i = 0; i < cfg.items; ++i) group[i % cfg.fields].push_back(i);
  out.successors.resize(cfg.items);
  for (std::size_t i = 0; i < cfg.items; ++i) {
    const auto& next = group[(i + 1) % cfg.fields];
    const std::size_t a = uniform_index(rng, next.size());
    std::size_t b = uniform_index(rng, next.size() - 1);
    if (b >= a) ++b;
    out.successors[i] = {next[a], next[b]};
  }

  for (std::size_t f = 0; f < cfg.fields; ++f) out.log.field_names.push_back(synthetic_field_name(f));
  const std::int64_t span = cfg.days * 86400;
  std::set<std::size_t> seen;
  for (std::size_t s = 0; s < cfg.sessions; ++s) {
    std::vector<std::size_t> cats(cfg.fields);
    Attributes attrs;
    for (std::size_t f = 0; f < cfg.fields; ++f) {
      cats[f] = uniform_index(rng, out.field_sizes[f]);
      attrs[synthetic_field_name(f)] = {synthetic_category_name(cats[f])};
    }
    const std::size_t length =
        cfg.min_length + uniform_index(rng, cfg.max_length - cfg.min_length + 1);
    const std::int64_t start =
        cfg.start_time + static_cast<std::int64_t>(s) * span / static_cast<std::int64_t>(cfg.sessions);
    char user[32];
    std::snprintf(user, sizeof user, "user%05zu", s);
    std::size_t item = uniform_index(rng, cfg.items);
    for (std::size_t t = 0; t < length; ++t) {
      if (t > 0) {
        const std::size_t choice = cfg.context_dependent
                                       ? cats[synthetic_field_of(item, cfg.fields)] % 2
                                       : uniform_index(rng, 2);
        item = out.successors[item][choice];
      }
      seen.insert(item);
      out.log.events.push_back(
          RawEvent{user, synthetic_item_name(item), start + static_cast<std::int64_t>(t) * 60, attrs});
    }
    out.transactions += length;
  }
  out.users = cfg.sessions;
  out.sessions = cfg.sessions;
  out.distinct_items = seen.size();
  return out;
}

/// The generator's next item for a given previous item and per-field
/// category indices (context-dependent variant).
inline std::size_t synthetic_next(const SyntheticData& data, std::size_t item,
                                  const std::vector<std::size_t>& categories) {
  const std::size_t f = synthetic_field_of(item, data.field_sizes.size());
  return data.successors.at(item)[categories.at(f) % 2];
}

}  // namespace arnn
