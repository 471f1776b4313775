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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arnn/error.hpp"
#include "arnn/ops.hpp"
#include "arnn/tape.hpp"

namespace arnn {

/// TOP1 ranking loss for one target against its sampled negatives:
///   mean_j [ sigmoid(neg_j - pos) + sigmoid(neg_j^2) ]
/// The second term regularizes negative scores toward zero.
template <typename Real>
Real top1_loss(Real target_logit, std::span<const Real> negative_logits) {
  if (negative_logits.empty()) {
    throw NumericError("TOP1 loss is undefined without negatives");
  }
  Real total = 0;
  for (Real n : negative_logits) {
    total += sigmoid_value(n - target_logit) + sigmoid_value(n * n);
  }
  return total / static_cast<Real>(negative_logits.size());
}

/// Partial derivatives of top1_loss. Returns d/d(target); writes d/d(neg_j)
/// into `negative_grads`.
template <typename Real>
Real top1_gradient(Real target_logit, std::span<const Real> negative_logits,
                   std::span<Real> negative_grads) {
  if (negative_logits.empty()) {
    throw NumericError("TOP1 loss is undefined without negatives");
  }
  const Real inv_n = Real(1) / static_cast<Real>(negative_logits.size());
  Real d_target = 0;
  for (std::size_t j = 0; j < negative_logits.size(); ++j) {
    const Real n = negative_logits[j];
    const Real s_diff = sigmoid_value(n - target_logit);
    const Real s_reg = sigmoid_value(n * n);
    const Real d_diff = s_diff * (Real(1) - s_diff);
    d_target -= d_diff * inv_n;
    negative_grads[j] = (d_diff + s_reg * (Real(1) - s_reg) * Real(2) * n) * inv_n;
  }
  return d_target;
}

/// Batched TOP1 over a logit matrix. Row r scores targets[r] against the
/// items in negatives[r]; rows with no negatives are skipped and the result
/// is the mean over the remaining rows. Returns nullopt when no row
/// contributes.
template <typename Real>
std::optional<Var<Real>> top1_batch(const Var<Real>& logits,
                                    const std::vector<std::uint32_t>& targets,
                                    const std::vector<std::vector<std::uint32_t>>& negatives) {
  const auto& lv = logits.value();
  if (lv.rank() != 2 || lv.rows() != targets.size() || negatives.size() != targets.size()) {
    throw DimensionError("top1_batch: logits " + shape_string(lv.shape()) + " for " +
                         std::to_string(targets.size()) + " targets");
  }
  std::size_t contributing = 0;
  for (const auto& n : negatives) contributing += n.empty() ? 0 : 1;
  if (contributing == 0) return std::nullopt;

  const Real inv_rows = Real(1) / static_cast<Real>(contributing);
  Real total = 0;
  std::vector<Real> neg_logits;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (negatives[r].empty()) continue;
    neg_logits.clear();
    for (auto item : negatives[r]) neg_logits.push_back(lv(r, item));
    total += top1_loss<Real>(lv(r, targets[r]), neg_logits);
  }
  const std::size_t li = logits.id();
  return logits.tape().record(
      Tensor<Real>::scalar(total * inv_rows), {logits},
      [li, targets, negatives, inv_rows](Tape<Real>& t, const Tensor<Real>& g) {
        const auto& lv = t.value(li);
        auto& d = t.grad(li);
        std::vector<Real> neg_logits, neg_grads;
        for (std::size_t r = 0; r < targets.size(); ++r) {
          if (negatives[r].empty()) continue;
          neg_logits.clear();
          for (auto item : negatives[r]) neg_logits.push_back(lv(r, item));
          neg_grads.assign(neg_logits.size(), Real(0));
          const Real scale = g[0] * inv_rows;
          d(r, targets[r]) +=
              scale * top1_gradient<Real>(lv(r, targets[r]), neg_logits, neg_grads);
          for (std::size_t j = 0; j < negatives[r].size(); ++j) {
            d(r, negatives[r][j]) += scale * neg_grads[j];
          }
        }
      },
      "top1");
}

}  // namespace arnn
