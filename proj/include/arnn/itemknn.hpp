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
#include <cmath>
#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "arnn/data.hpp"
#include "arnn/error.hpp"
#include "arnn/minibatch.hpp"
#include "arnn/tensor.hpp"

namespace arnn {

struct Neighbor {
  ItemIndex item;
  double similarity;
};

/// Item-to-item cosine similarity over binary session-incidence vectors:
///   sim(i, j) = |S_i & S_j| / (sqrt|S_i| * sqrt|S_j| + lambda)
/// Scores the next item by its similarity to the previous one.
class ItemKnnIndex {
 public:
  ItemKnnIndex() = default;

  ItemKnnIndex(const SessionDataset& train, double lambda, std::size_t max_neighbors)
      : lambda_(lambda), items_(train.schema.item_count()) {
    if (train.sessions.empty()) throw DataError("item-knn: empty training set");
    if (lambda < 0.0) throw ConfigError("item-knn: lambda must be non-negative");
    std::vector<std::size_t> support(items_, 0);
    std::vector<std::map<ItemIndex, std::size_t>> co(items_);
    std::vector<ItemIndex> uniq;
    for (const auto& s : train.sessions) {
      uniq.clear();
      for (const auto& st : s.steps) uniq.push_back(st.item);
      std::sort(uniq.begin(), uniq.end());
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      for (std::size_t a = 0; a < uniq.size(); ++a) {
        ++support[uniq[a]];
        for (std::size_t b = a + 1; b < uniq.size(); ++b) {
          ++co[uniq[a]][uniq[b]];
          ++co[uniq[b]][uniq[a]];
        }
      }
    }
    neighbors_.resize(items_);
    for (std::size_t i = 0; i < items_; ++i) {
      auto& list = neighbors_[i];
      for (const auto& [j, both] : co[i]) {
        const double denom =
            std::sqrt(static_cast<double>(support[i])) * std::sqrt(static_cast<double>(support[j])) +
            lambda_;
        list.push_back(Neighbor{j, static_cast<double>(both) / denom});
      }
      std::stable_sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.similarity > b.similarity;
      });
      if (list.size() > max_neighbors) list.resize(max_neighbors);
    }
  }

  std::size_t items() const noexcept { return items_; }
  double lambda() const noexcept { return lambda_; }

  /// Retained neighbors of `item`, most similar first.
  const std::vector<Neighbor>& neighbors(ItemIndex item) const { return neighbors_.at(item); }

  /// Stored similarity, zero when j is not among i's retained neighbors.
  double similarity(ItemIndex i, ItemIndex j) const {
    for (const auto& n : neighbors_.at(i)) {
      if (n.item == j) return n.similarity;
    }
    return 0.0;
  }

  void reset_state(std::size_t) {}

  Tensor<double> predict(const StepInput& in) const {
    Tensor<double> out(Shape{in.size(), items_});
    for (std::size_t r = 0; r < in.size(); ++r) {
      if (in.prev_items[r] >= items_) {
        throw DataError("item index " + std::to_string(in.prev_items[r]) + " outside vocabulary");
      }
      for (const auto& n : neighbors_[in.prev_items[r]]) out(r, n.item) = n.similarity;
    }
    return out;
  }

 private:
  double lambda_ = 20.0;
  std::size_t items_ = 0;
  std::vector<std::vector<Neighbor>> neighbors_;
};

inline ItemKnnIndex build_itemknn(const SessionDataset& train, double lambda,
                                  std::size_t max_neighbors) {
  return ItemKnnIndex(train, lambda, max_neighbors);
}

}  // namespace arnn
