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

// Random gradient-check instances for the GRU step, the PNN forward pass,
// the merge network and the TOP1 loss.

#include <cstddef>
#include <vector>

#include "arnn/loss.hpp"
#include "arnn/minibatch.hpp"
#include "arnn/models.hpp"
#include "support.hpp"

namespace arnn::testing {

inline StepInput random_step(Rng& rng, std::size_t rows, std::size_t items,
                             const std::vector<std::size_t>& field_sizes, bool boundaries) {
  StepInput in;
  for (std::size_t r = 0; r < rows; ++r) {
    in.lanes.push_back(r);
    in.prev_items.push_back(static_cast<ItemIndex>(uniform_index(rng, items)));
    Context ctx;
    std::size_t offset = 0;
    for (auto size : field_sizes) {
      // One or two active categories so the averaging path is exercised.
      const auto a = static_cast<std::uint32_t>(offset + uniform_index(rng, size));
      ctx.push_back(a);
      if (size > 1 && uniform01(rng) < 0.3) {
        auto b = static_cast<std::uint32_t>(offset + uniform_index(rng, size));
        if (b != a) ctx.push_back(b);
      }
      offset += size;
    }
    std::sort(ctx.begin(), ctx.end());
    in.contexts.push_back(ctx);
    in.boundaries.push_back(boundaries);
  }
  return in;
}

/// GRU step from a random non-zero state, probed by a random linear
/// functional of the output scores.
inline GradCheck gru_step_case(Rng& rng) {
  const std::size_t items = 6, hidden = 4, rows = 3;
  GruSessionModel<double> gru(items, hidden, 0.0, rng);
  for (auto* p : gru.parameters()) p->value = random_tensor(p->shape(), rng);
  const Tensor<double> state = random_tensor(Shape{rows, hidden}, rng);
  const StepInput in = random_step(rng, rows, items, {}, false);
  const Tensor<double> w = random_tensor(Shape{rows, items}, rng);
  return check_gradients(gru.parameters(), [&](Tape<double>& tape) {
    gru.set_hidden(state);
    return probe(tape, gru.logits(tape, in, Mode::kInference), w);
  });
}

/// PNN with E=3, F=4 (three context fields plus the item), D_c=5, in train
/// mode so batch statistics are differentiated too.
inline GradCheck pnn_case(Rng& rng) {
  const std::vector<std::size_t> fields = {3, 4, 2};
  const std::size_t items = 5, rows = 4;
  PnnEncoder<double> pnn(fields, items, 3, 5, rng);
  for (auto* p : pnn.parameters()) p->value = random_tensor(p->shape(), rng);
  const StepInput in = random_step(rng, rows, items, fields, true);
  const Tensor<double> wc = random_tensor(Shape{rows, 5}, rng);
  const Tensor<double> ws = random_tensor(Shape{rows, items}, rng);
  return check_gradients(pnn.parameters(), [&](Tape<double>& tape) {
    Var<double> c = pnn.forward(tape, in, Mode::kTrain);
    Var<double> s = pnn.scores(tape, c);
    return add(probe(tape, c, wc), probe(tape, s, ws));
  });
}

/// Full ARNN logits, all parameters (frozen ones included: freezing is the
/// optimizer's business, gradients must still be right).
inline GradCheck merge_case(Rng& rng) {
  const std::vector<std::size_t> fields = {2, 3};
  const std::size_t items = 5, rows = 4, hidden = 3;
  PnnEncoder<double> pnn(fields, items, 2, 4, rng);
  GruSessionModel<double> gru(items, hidden, 0.0, rng);
  ArnnModel<double> model(pnn, gru, 4, rng);
  for (auto* p : model.parameters()) p->value = random_tensor(p->shape(), rng);
  const Tensor<double> state = random_tensor(Shape{rows, hidden}, rng);
  const StepInput in = random_step(rng, rows, items, fields, false);
  const Tensor<double> w = random_tensor(Shape{rows, items}, rng);
  return check_gradients(model.parameters(), [&](Tape<double>& tape) {
    model.body.set_hidden(state);
    return probe(tape, model.logits(tape, in, Mode::kTrain), w);
  });
}

/// Batched TOP1 over a random logit matrix with random in-batch negatives.
inline GradCheck top1_case(Rng& rng) {
  const std::size_t rows = 4, items = 7;
  Parameter<double> logits("logits", random_tensor(Shape{rows, items}, rng, -2.0, 2.0));
  std::vector<std::uint32_t> targets;
  std::vector<std::vector<std::uint32_t>> negatives(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    targets.push_back(static_cast<std::uint32_t>(uniform_index(rng, items)));
    for (std::uint32_t j = 0; j < items; ++j) {
      if (j != targets[r] && uniform01(rng) < 0.5) negatives[r].push_back(j);
    }
  }
  negatives[0].clear();  // a row without negatives must be skipped
  negatives[1].push_back(targets[1] == 0 ? 1 : 0);
  return check_gradients({&logits}, [&](Tape<double>& tape) {
    return *top1_batch(tape.parameter(logits), targets, negatives);
  });
}

}  // namespace arnn::testing
