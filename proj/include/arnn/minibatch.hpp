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
#include <optional>
#include <string>
#include <vector>

#include "arnn/data.hpp"
#include "arnn/error.hpp"
#include "arnn/random.hpp"

namespace arnn {

/// What a model may see at one step: the active lanes' previous items,
/// contexts and reset flags. Targets are deliberately absent.
struct StepInput {
  std::vector<std::size_t> lanes;
  std::vector<ItemIndex> prev_items;
  std::vector<Context> contexts;
  std::vector<bool> boundaries;

  std::size_t size() const noexcept { return lanes.size(); }
};

/// One session-parallel step over B lanes.
struct MiniBatch {
  std::vector<ItemIndex> prev_items;
  std::vector<ItemIndex> target_items;
  std::vector<Context> contexts;
  std::vector<bool> session_boundary;
  std::vector<bool> active;

  std::size_t lanes() const noexcept { return active.size(); }

  std::vector<std::size_t> active_lanes() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (active[i]) out.push_back(i);
    }
    return out;
  }

  StepInput inputs() const {
    StepInput in;
    for (std::size_t i : active_lanes()) {
      in.lanes.push_back(i);
      in.prev_items.push_back(prev_items[i]);
      in.contexts.push_back(contexts[i]);
      in.boundaries.push_back(session_boundary[i]);
    }
    return in;
  }
};

/// In-batch negatives for `lane`: distinct targets of the other active
/// lanes, excluding the lane's own target.
inline std::vector<ItemIndex> negatives_for(const MiniBatch& batch, std::size_t lane) {
  if (lane >= batch.lanes() || !batch.active[lane]) {
    throw DataError("negatives requested for inactive lane " + std::to_string(lane));
  }
  const ItemIndex own = batch.target_items[lane];
  std::vector<ItemIndex> out;
  for (std::size_t j = 0; j < batch.lanes(); ++j) {
    if (j == lane || !batch.active[j]) continue;
    const ItemIndex t = batch.target_items[j];
    if (t != own && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  }
  return out;
}

/// Walks a dataset with B parallel lanes. Each lane advances one step of its
/// session per batch; a finished lane takes the next unstarted session and
/// flags a boundary, and goes inactive once no sessions remain.
class SessionParallelIterator {
 public:
  SessionParallelIterator(const SessionDataset& data, std::size_t lanes, std::uint64_t seed,
                          bool shuffle = true)
      : data_(&data), lanes_(lanes), seed_(seed), shuffle_(shuffle) {
    if (lanes < 2) {
      throw ConfigError("batch_lanes must be at least 2, got " + std::to_string(lanes));
    }
    begin_epoch(0);
  }

  std::size_t lanes() const noexcept { return lanes_; }

  /// Resets to the start of an epoch. Session order is the dataset order,
  /// shuffled with a stream derived from (seed, epoch) when enabled.
  void begin_epoch(std::uint64_t epoch) {
    order_.resize(data_->sessions.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (shuffle_) {
      Rng rng(derive_seed(seed_, epoch));
      shuffle(order_, rng);
    }
    next_session_ = 0;
    lane_session_.assign(lanes_, kNone);
    lane_pos_.assign(lanes_, 0);
  }

  std::optional<MiniBatch> next() {
    MiniBatch b;
    b.prev_items.assign(lanes_, 0);
    b.target_items.assign(lanes_, 0);
    b.contexts.assign(lanes_, Context{});
    b.session_boundary.assign(lanes_, false);
    b.active.assign(lanes_, false);
    bool any = false;
    for (std::size_t l = 0; l < lanes_; ++l) {
      bool boundary = false;
      if (lane_session_[l] != kNone &&
          lane_pos_[l] + 1 < data_->sessions[lane_session_[l]].size()) {
        ++lane_pos_[l];
      } else {
        lane_session_[l] = kNone;
        while (next_session_ < order_.size()) {
          const std::size_t s = order_[next_session_++];
          if (data_->sessions[s].size() >= 2) {
            lane_session_[l] = s;
            lane_pos_[l] = 1;
            boundary = true;
            break;
          }
        }
        if (lane_session_[l] == kNone) continue;
      }
      const auto& steps = data_->sessions[lane_session_[l]].steps;
      const std::size_t p = lane_pos_[l];
      b.prev_items[l] = steps[p - 1].item;
      b.target_items[l] = steps[p].item;
      b.contexts[l] = steps[p - 1].context;
      b.session_boundary[l] = boundary;
      b.active[l] = true;
      any = true;
    }
    if (!any) return std::nullopt;
    return b;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  const SessionDataset* data_;
  std::size_t lanes_;
  std::uint64_t seed_;
  bool shuffle_;
  std::vector<std::size_t> order_;
  std::size_t next_session_ = 0;
  std::vector<std::size_t> lane_session_;
  std::vector<std::size_t> lane_pos_;
};

}  // namespace arnn
