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
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "arnn/data.hpp"
#include "arnn/error.hpp"

namespace arnn {

/// Best-first order: higher score wins, equal scores go to the lower index.
template <typename Real>
std::vector<ItemIndex> top_k(std::span<const Real> scores, std::size_t k) {
  std::vector<ItemIndex> idx(scores.size());
  std::iota(idx.begin(), idx.end(), ItemIndex{0});
  k = std::min(k, idx.size());
  auto better = [&scores](ItemIndex a, ItemIndex b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
  idx.resize(k);
  return idx;
}

/// 1-based position of `target` under the top_k ordering.
template <typename Real>
std::size_t rank_of(std::span<const Real> scores, ItemIndex target) {
  const Real t = scores[target];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > t || (scores[i] == t && i < target)) ++rank;
  }
  return rank;
}

namespace detail {

inline void check_ranked_input(const std::vector<std::vector<ItemIndex>>& lists,
                               const std::vector<ItemIndex>& targets, std::size_t k) {
  if (lists.empty()) throw DataError("metric over zero recommendation attempts");
  if (lists.size() != targets.size()) {
    throw DataError("metric: " + std::to_string(lists.size()) + " lists for " +
                    std::to_string(targets.size()) + " targets");
  }
  for (const auto& l : lists) {
    if (l.size() > k) {
      throw DataError("metric: list of " + std::to_string(l.size()) + " items exceeds k=" +
                      std::to_string(k));
    }
  }
}

}  // namespace detail

/// Fraction of attempts whose target appears in its top-k list.
inline double recall_at_k(const std::vector<std::vector<ItemIndex>>& lists,
                          const std::vector<ItemIndex>& targets, std::size_t k) {
  detail::check_ranked_input(lists, targets, k);
  std::size_t hits = 0;
  for (std::size_t n = 0; n < lists.size(); ++n) {
    if (std::find(lists[n].begin(), lists[n].end(), targets[n]) != lists[n].end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(lists.size());
}

/// Mean of 1/rank over attempts, a miss contributing zero.
inline double mrr_at_k(const std::vector<std::vector<ItemIndex>>& lists,
                       const std::vector<ItemIndex>& targets, std::size_t k) {
  detail::check_ranked_input(lists, targets, k);
  double total = 0.0;
  for (std::size_t n = 0; n < lists.size(); ++n) {
    auto it = std::find(lists[n].begin(), lists[n].end(), targets[n]);
    if (it != lists[n].end()) total += 1.0 / static_cast<double>(it - lists[n].begin() + 1);
  }
  return total / static_cast<double>(lists.size());
}

/// Running Recall@k / MRR@k from target ranks.
struct MetricAccumulator {
  std::size_t k = 20;
  std::size_t n_recs = 0;
  std::size_t n_hits = 0;
  double reciprocal_sum = 0.0;

  void add_rank(std::size_t rank) {
    ++n_recs;
    if (rank <= k) {
      ++n_hits;
      reciprocal_sum += 1.0 / static_cast<double>(rank);
    }
  }

  double recall() const {
    return n_recs ? static_cast<double>(n_hits) / static_cast<double>(n_recs) : 0.0;
  }
  double mrr() const { return n_recs ? reciprocal_sum / static_cast<double>(n_recs) : 0.0; }
};

}  // namespace arnn
