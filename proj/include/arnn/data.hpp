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
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "arnn/error.hpp"

namespace arnn {

using ItemIndex = std::uint32_t;

/// Sorted active positions in the concatenated one-hot context vector.
using Context = std::vector<std::uint32_t>;

/// Category lists per field name. Multi-valued fields hold several entries.
using Attributes = std::map<std::string, std::vector<std::string>>;

inline constexpr const char* kUnknownCategory = "unknown";

struct RawEvent {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;
  Attributes attributes;
};

/// Events plus the declared context field names, in column order.
struct EventLog {
  std::vector<std::string> field_names;
  std::vector<RawEvent> events;
};

struct FieldSpec {
  std::string name;
  std::vector<std::string> categories;
};

/// Layout of the concatenated one-hot context vector and the item
/// vocabulary. Field f occupies positions [offsets[f], offsets[f] + size).
class FieldSchema {
 public:
  FieldSchema() = default;

  FieldSchema(std::vector<FieldSpec> fields, std::vector<std::string> items)
      : fields_(std::move(fields)), items_(std::move(items)) {
    std::size_t offset = 0;
    category_index_.resize(fields_.size());
    for (std::size_t f = 0; f < fields_.size(); ++f) {
      const auto& spec = fields_[f];
      if (spec.categories.empty()) {
        throw DataError("field '" + spec.name + "' has no categories");
      }
      if (field_index_.count(spec.name)) {
        throw DataError("duplicate field '" + spec.name + "'");
      }
      field_index_[spec.name] = f;
      for (std::size_t c = 0; c < spec.categories.size(); ++c) {
        if (!category_index_[f].emplace(spec.categories[c], c).second) {
          throw DataError("duplicate category '" + spec.categories[c] +
                          "' in field '" + spec.name + "'");
        }
      }
      offsets_.push_back(offset);
      offset += spec.categories.size();
    }
    width_ = offset;
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (!item_index_.emplace(items_[i], static_cast<ItemIndex>(i)).second) {
        throw DataError("duplicate item '" + items_[i] + "' in vocabulary");
      }
    }
  }

  const std::vector<FieldSpec>& fields() const noexcept { return fields_; }
  const std::vector<std::string>& items() const noexcept { return items_; }
  const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
  std::size_t field_count() const noexcept { return fields_.size(); }
  std::size_t item_count() const noexcept { return items_.size(); }
  std::size_t width() const noexcept { return width_; }
  std::size_t field_size(std::size_t f) const { return fields_[f].categories.size(); }

  std::optional<std::size_t> field_index(const std::string& name) const {
    auto it = field_index_.find(name);
    if (it == field_index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> category_index(std::size_t field,
                                            const std::string& category) const {
    auto it = category_index_[field].find(category);
    if (it == category_index_[field].end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> unknown_index(std::size_t field) const {
    return category_index(field, kUnknownCategory);
  }

  std::optional<ItemIndex> item_index(const std::string& item) const {
    auto it = item_index_.find(item);
    if (it == item_index_.end()) return std::nullopt;
    return it->second;
  }

  /// Field that owns a one-hot position.
  std::size_t field_of(std::uint32_t position) const {
    if (position >= width_) {
      throw DataError("context position " + std::to_string(position) +
                      " outside one-hot width " + std::to_string(width_));
    }
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), position);
    return static_cast<std::size_t>(it - offsets_.begin()) - 1;
  }

  /// FNV-1a over a canonical rendering of fields, categories and items.
  std::string hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const std::string& s, char sep) {
      for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
      }
      h ^= static_cast<unsigned char>(sep);
      h *= 1099511628211ULL;
    };
    for (const auto& f : fields_) {
      mix(f.name, '\x1d');
      for (const auto& c : f.categories) mix(c, '\x1f');
      mix("", '\x1e');
    }
    for (const auto& item : items_) mix(item, '\x1c');
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

 private:
  std::vector<FieldSpec> fields_;
  std::vector<std::string> items_;
  std::vector<std::size_t> offsets_;
  std::size_t width_ = 0;
  std::unordered_map<std::string, std::size_t> field_index_;
  std::vector<std::unordered_map<std::string, std::size_t>> category_index_;
  std::unordered_map<std::string, ItemIndex> item_index_;
};

struct Step {
  Context context;
  ItemIndex item = 0;

  friend bool operator==(const Step&, const Step&) = default;
};

struct Session {
  std::vector<Step> steps;
  std::int64_t start_time = 0;
  std::int64_t end_time = 0;

  std::size_t size() const noexcept { return steps.size(); }
  friend bool operator==(const Session&, const Session&) = default;
};

struct SessionDataset {
  std::vector<Session> sessions;
  FieldSchema schema;

  std::size_t transactions() const {
    std::size_t n = 0;
    for (const auto& s : sessions) n += s.size();
    return n;
  }

  /// Throws DataError if a session is shorter than 2 or an index is out of
  /// range.
  void validate() const {
    for (std::size_t i = 0; i < sessions.size(); ++i) {
      const auto& s = sessions[i];
      if (s.size() < 2) {
        throw DataError("session " + std::to_string(i) + " has fewer than 2 steps");
      }
      for (const auto& step : s.steps) {
        if (step.item >= schema.item_count()) {
          throw DataError("session " + std::to_string(i) + " item index " +
                          std::to_string(step.item) + " outside vocabulary of " +
                          std::to_string(schema.item_count()));
        }
        for (auto pos : step.context) {
          if (pos >= schema.width()) {
            throw DataError("session " + std::to_string(i) + " context position " +
                            std::to_string(pos) + " outside one-hot width");
          }
        }
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Context encoding
// ---------------------------------------------------------------------------

/// Active one-hot positions for a user's attributes. A field with no value
/// maps to its "unknown" slot; an unlisted category also falls back to
/// "unknown" when the field has one.
inline Context encode_context(const Attributes& attributes, const FieldSchema& schema) {
  for (const auto& [name, values] : attributes) {
    if (!schema.field_index(name)) {
      throw DataError("attribute field '" + name + "' not in schema");
    }
  }
  Context out;
  for (std::size_t f = 0; f < schema.field_count(); ++f) {
    const auto& spec = schema.fields()[f];
    auto it = attributes.find(spec.name);
    std::vector<std::size_t> cats;
    if (it != attributes.end()) {
      for (const auto& value : it->second) {
        auto idx = schema.category_index(f, value);
        if (!idx) idx = schema.unknown_index(f);
        if (!idx) {
          throw DataError("category '" + value + "' not in field '" + spec.name +
                          "' and the field has no unknown slot");
        }
        cats.push_back(*idx);
      }
    }
    if (cats.empty()) {
      auto unk = schema.unknown_index(f);
      if (!unk) {
        throw DataError("field '" + spec.name + "' is empty and has no unknown slot");
      }
      cats.push_back(*unk);
    }
    for (auto c : cats) out.push_back(static_cast<std::uint32_t>(schema.offsets()[f] + c));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline Attributes decode_context(const Context& context, const FieldSchema& schema) {
  Attributes out;
  for (auto pos : context) {
    const std::size_t f = schema.field_of(pos);
    const auto& spec = schema.fields()[f];
    out[spec.name].push_back(spec.categories[pos - schema.offsets()[f]]);
  }
  return out;
}

/// Category indices per field. Fields with no active position get an empty
/// list.
inline std::vector<std::vector<std::uint32_t>> split_by_field(const Context& context,
                                                              const FieldSchema& schema) {
  std::vector<std::vector<std::uint32_t>> out(schema.field_count());
  for (auto pos : context) {
    const std::size_t f = schema.field_of(pos);
    out[f].push_back(static_cast<std::uint32_t>(pos - schema.offsets()[f]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Session marking
// ---------------------------------------------------------------------------

struct RawSession {
  std::string user_id;
  std::vector<RawEvent> events;
};

/// Stable sort by timestamp within each user, users kept in first-seen order.
inline std::vector<RawEvent> sort_events_per_user(std::span<const RawEvent> events) {
  std::unordered_map<std::string, std::size_t> rank;
  for (const auto& e : events) rank.emplace(e.user_id, rank.size());
  std::vector<RawEvent> out(events.begin(), events.end());
  std::stable_sort(out.begin(), out.end(), [&rank](const RawEvent& a, const RawEvent& b) {
    const auto ra = rank.at(a.user_id), rb = rank.at(b.user_id);
    if (ra != rb) return ra < rb;
    return a.timestamp < b.timestamp;
  });
  return out;
}

/// Splits each user's events wherever the gap to the previous event is
/// strictly greater than `gap_threshold`. Groups with fewer than two events
/// are dropped. Events must already be time-ordered within each user.
inline std::vector<RawSession> mark_sessions(std::span<const RawEvent> events,
                                             std::int64_t gap_threshold) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const RawEvent*>> by_user;
  for (const auto& e : events) {
    auto [it, inserted] = by_user.try_emplace(e.user_id);
    if (inserted) order.push_back(e.user_id);
    if (!it->second.empty() && it->second.back()->timestamp > e.timestamp) {
      throw DataError("events for user '" + e.user_id + "' are not time-ordered (" +
                      std::to_string(it->second.back()->timestamp) + " before " +
                      std::to_string(e.timestamp) + ")");
    }
    it->second.push_back(&e);
  }
  std::vector<RawSession> out;
  for (const auto& user : order) {
    const auto& list = by_user[user];
    RawSession current{user, {}};
    auto flush = [&] {
      if (current.events.size() >= 2) out.push_back(std::move(current));
      current = RawSession{user, {}};
    };
    for (const RawEvent* e : list) {
      if (!current.events.empty() &&
          e->timestamp - current.events.back().timestamp > gap_threshold) {
        flush();
      }
      current.events.push_back(*e);
    }
    flush();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Popularity-coverage sampling
// ---------------------------------------------------------------------------

namespace detail {

/// Keys sorted by descending count, ties by first appearance, truncated to
/// the shortest prefix whose cumulative count reaches coverage * total.
inline std::vector<std::string> coverage_prefix(
    const std::vector<std::pair<std::string, std::size_t>>& counts_in_first_seen_order,
    double coverage) {
  auto ranked = counts_in_first_seen_order;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::size_t total = 0;
  for (const auto& [key, n] : ranked) total += n;
  const double needed = coverage * static_cast<double>(total);
  std::vector<std::string> kept;
  std::size_t cumulative = 0;
  for (const auto& [key, n] : ranked) {
    if (static_cast<double>(cumulative) >= needed && !kept.empty()) break;
    kept.push_back(key);
    cumulative += n;
  }
  return kept;
}

inline void check_coverage(double coverage, const char* what) {
  if (!(coverage > 0.0 && coverage <= 1.0)) {
    throw ConfigError(std::string(what) + " must be in (0, 1], got " +
                      std::to_string(coverage));
  }
}

}  // namespace detail

/// Most popular items whose transactions reach `coverage` of the total,
/// in popularity order.
inline std::vector<std::string> sample_items_by_coverage(std::span<const RawEvent> events,
                                                         double coverage) {
  detail::check_coverage(coverage, "item coverage");
  if (events.empty()) throw DataError("item sampling on an empty event list");
  std::vector<std::pair<std::string, std::size_t>> counts;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& e : events) {
    auto [it, inserted] = slot.try_emplace(e.item_id, counts.size());
    if (inserted) counts.emplace_back(e.item_id, 0);
    ++counts[it->second].second;
  }
  return detail::coverage_prefix(counts, coverage);
}

inline std::vector<RawEvent> filter_items(std::span<const RawEvent> events,
                                          const std::vector<std::string>& retained) {
  const std::unordered_set<std::string> keep(retained.begin(), retained.end());
  std::vector<RawEvent> out;
  for (const auto& e : events) {
    if (keep.count(e.item_id)) out.push_back(e);
  }
  return out;
}

struct CappedField {
  std::vector<RawEvent> events;
  /// Retained categories in popularity order, followed by "unknown".
  std::vector<std::string> categories;
};

/// Keeps the categories of `field` that cover `coverage` of its
/// occurrences and rewrites the rest to "unknown". Each event counts a
/// category at most once.
inline CappedField cap_multivalued(const EventLog& log, const std::string& field,
                                   double coverage) {
  detail::check_coverage(coverage, "category coverage");
  if (std::find(log.field_names.begin(), log.field_names.end(), field) ==
      log.field_names.end()) {
    throw DataError("unknown field '" + field + "'");
  }
  std::vector<std::pair<std::string, std::size_t>> counts;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& e : log.events) {
    auto it = e.attributes.find(field);
    if (it == e.attributes.end()) continue;
    std::unordered_set<std::string> seen;
    for (const auto& v : it->second) {
      if (!seen.insert(v).second) continue;
      auto [s, inserted] = slot.try_emplace(v, counts.size());
      if (inserted) counts.emplace_back(v, 0);
      ++counts[s->second].second;
    }
  }
  CappedField out;
  out.categories = counts.empty() ? std::vector<std::string>{}
                                  : detail::coverage_prefix(counts, coverage);
  const std::unordered_set<std::string> keep(out.categories.begin(), out.categories.end());
  out.categories.erase(
      std::remove(out.categories.begin(), out.categories.end(), kUnknownCategory),
      out.categories.end());
  out.categories.push_back(kUnknownCategory);

  out.events = log.events;
  for (auto& e : out.events) {
    auto it = e.attributes.find(field);
    if (it == e.attributes.end()) continue;
    std::vector<std::string> rewritten;
    bool has_unknown = false;
    for (const auto& v : it->second) {
      if (keep.count(v) && v != kUnknownCategory) {
        rewritten.push_back(v);
      } else if (!has_unknown) {
        rewritten.push_back(kUnknownCategory);
        has_unknown = true;
      }
    }
    it->second = std::move(rewritten);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Train/test split
// ---------------------------------------------------------------------------

/// Sessions starting strictly after (last timestamp - test_window) form the
/// test set. Both sides are re-indexed to the train item vocabulary; test
/// steps with unseen items are removed and test sessions left with fewer
/// than two steps are dropped.
inline std::pair<SessionDataset, SessionDataset> split_train_test(
    const std::vector<Session>& sessions, const FieldSchema& schema,
    std::int64_t test_window) {
  if (sessions.empty()) throw DataError("split: no sessions");
  std::int64_t first = sessions.front().start_time, last = sessions.front().end_time;
  for (const auto& s : sessions) {
    first = std::min(first, s.start_time);
    last = std::max(last, s.end_time);
  }
  if (test_window < 0 || test_window >= last - first) {
    throw DataError("split: test window " + std::to_string(test_window) +
                    "s must be non-negative and shorter than the time span " +
                    std::to_string(last - first) + "s");
  }
  const std::int64_t cutoff = last - test_window;

  std::vector<const Session*> train_src, test_src;
  for (const auto& s : sessions) (s.start_time > cutoff ? test_src : train_src).push_back(&s);

  std::vector<char> seen(schema.item_count(), 0);
  for (const Session* s : train_src) {
    for (const auto& st : s->steps) seen.at(st.item) = 1;
  }
  std::vector<std::string> vocab;
  std::vector<ItemIndex> remap(schema.item_count(), 0);
  for (std::size_t i = 0; i < schema.item_count(); ++i) {
    if (seen[i]) {
      remap[i] = static_cast<ItemIndex>(vocab.size());
      vocab.push_back(schema.items()[i]);
    }
  }
  FieldSchema out_schema(schema.fields(), vocab);

  SessionDataset train{{}, out_schema}, test{{}, out_schema};
  for (const Session* s : train_src) {
    Session copy = *s;
    for (auto& st : copy.steps) st.item = remap[st.item];
    train.sessions.push_back(std::move(copy));
  }
  for (const Session* s : test_src) {
    Session kept{{}, s->start_time, s->end_time};
    for (const auto& st : s->steps) {
      if (seen.at(st.item)) kept.steps.push_back(Step{st.context, remap[st.item]});
    }
    if (kept.size() >= 2) test.sessions.push_back(std::move(kept));
  }
  if (train.sessions.empty() || test.sessions.empty()) {
    throw DataError("split produced " + std::to_string(train.sessions.size()) +
                    " train and " + std::to_string(test.sessions.size()) +
                    " test sessions (window " + std::to_string(test_window) + "s)");
  }
  return {std::move(train), std::move(test)};
}

/// The last `fraction` of sessions by start time become a validation set.
inline std::pair<SessionDataset, SessionDataset> split_validation(const SessionDataset& train,
                                                                  double fraction) {
  std::vector<std::size_t> order(train.sessions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return train.sessions[a].start_time < train.sessions[b].start_time;
  });
  const auto n_val = static_cast<std::size_t>(fraction * static_cast<double>(order.size()));
  SessionDataset fit{{}, train.schema}, val{{}, train.schema};
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k + n_val < order.size() ? fit : val).sessions.push_back(train.sessions[order[k]]);
  }
  return {std::move(fit), std::move(val)};
}

}  // namespace arnn
