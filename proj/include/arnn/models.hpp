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
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "arnn/data.hpp"
#include "arnn/error.hpp"
#include "arnn/minibatch.hpp"
#include "arnn/ops.hpp"
#include "arnn/random.hpp"
#include "arnn/tape.hpp"
#include "arnn/tensor.hpp"

namespace arnn {

template <typename Real>
std::vector<Parameter<Real>*> collect(std::initializer_list<Parameter<Real>*> ps) {
  return std::vector<Parameter<Real>*>(ps);
}

/// Anything usable as the recurrent body under the merge layer.
template <typename M, typename Real>
concept SessionBody = requires(M m, Tape<Real>& tape, const StepInput& in, std::size_t n) {
  { m.step(tape, in, Mode::kInference) } -> std::same_as<Var<Real>>;
  { m.hidden_size() } -> std::convertible_to<std::size_t>;
  { m.items() } -> std::convertible_to<std::size_t>;
  m.reset_state(n);
  { m.parameters() } -> std::same_as<std::vector<Parameter<Real>*>>;
};

// ---------------------------------------------------------------------------
// GRU session model
// ---------------------------------------------------------------------------

/// Single-layer GRU over learned item embeddings of width H:
///   z = sigmoid(x Wz + h Uz + bz)
///   r = sigmoid(x Wr + h Ur + br)
///   n = tanh(x Wn + (r * h) Un + bn)
///   h' = (1 - z) * n + z * h
/// Hidden state is kept per lane and carried between steps as a constant
/// (truncated backpropagation of length one).
template <typename Real>
class GruSessionModel {
 public:
  GruSessionModel() = default;

  GruSessionModel(std::size_t items, std::size_t hidden, double dropout, Rng& rng)
      : items_(items), hidden_size_(hidden), dropout_(dropout) {
    if (items == 0 || hidden == 0) throw ConfigError("GRU needs items > 0 and hidden > 0");
    item_embedding = Parameter<Real>("gru.item_embedding", glorot_uniform<Real>(items, hidden, rng));
    auto square = [&](const char* n) { return Parameter<Real>(n, glorot_uniform<Real>(hidden, hidden, rng)); };
    auto bias = [&](const char* n, std::size_t d) { return Parameter<Real>(n, Tensor<Real>(Shape{d})); };
    w_update = square("gru.w_update");
    u_update = square("gru.u_update");
    b_update = bias("gru.b_update", hidden);
    w_reset = square("gru.w_reset");
    u_reset = square("gru.u_reset");
    b_reset = bias("gru.b_reset", hidden);
    w_candidate = square("gru.w_candidate");
    u_candidate = square("gru.u_candidate");
    b_candidate = bias("gru.b_candidate", hidden);
    out_weight = Parameter<Real>("gru.out_weight", glorot_uniform<Real>(hidden, items, rng));
    out_bias = bias("gru.out_bias", items);
    dropout_rng_.seed(derive_seed(rng(), 17));
  }

  std::size_t items() const noexcept { return items_; }
  std::size_t hidden_size() const noexcept { return hidden_size_; }
  double dropout() const noexcept { return dropout_; }

  std::vector<Parameter<Real>*> parameters() {
    return collect<Real>({&item_embedding, &w_update, &u_update, &b_update, &w_reset,
                          &u_reset, &b_reset, &w_candidate, &u_candidate, &b_candidate,
                          &out_weight, &out_bias});
  }

  /// Clears every lane's hidden state.
  void reset_state(std::size_t lanes) { hidden_ = Tensor<Real>(Shape{lanes, hidden_size_}); }

  const Tensor<Real>& hidden() const noexcept { return hidden_; }

  /// Overwrites the per-lane state, e.g. to replay a step from a snapshot.
  void set_hidden(Tensor<Real> h) {
    if (h.rank() != 2 || h.cols() != hidden_size_) {
      throw DimensionError("hidden state " + shape_string(h.shape()) + " for hidden size " +
                           std::to_string(hidden_size_));
    }
    hidden_ = std::move(h);
  }

  /// Advances the active lanes by one item. Lanes flagged as boundaries
  /// start from a zero state. Returns the new hidden rows, in `in.lanes`
  /// order; dropout is applied to the returned value only in train mode.
  Var<Real> step(Tape<Real>& tape, const StepInput& in, Mode mode) {
    const std::size_t rows = in.size();
    std::size_t needed = 0;
    for (auto l : in.lanes) needed = std::max(needed, l + 1);
    if (hidden_.rank() != 2 || hidden_.rows() < needed) {
      Tensor<Real> grown(Shape{needed, hidden_size_});
      for (std::size_t r = 0; r < std::min(hidden_.rank() == 2 ? hidden_.rows() : 0, needed); ++r) {
        std::copy(hidden_.row(r).begin(), hidden_.row(r).end(), grown.row(r).begin());
      }
      hidden_ = std::move(grown);
    }
    Tensor<Real> prev(Shape{rows, hidden_size_});
    std::vector<std::vector<std::uint32_t>> bags(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      if (in.prev_items[r] >= items_) {
        throw DataError("item index " + std::to_string(in.prev_items[r]) +
                        " outside vocabulary of " + std::to_string(items_));
      }
      bags[r] = {in.prev_items[r]};
      if (!in.boundaries[r]) {
        auto src = hidden_.row(in.lanes[r]);
        std::copy(src.begin(), src.end(), prev.row(r).begin());
      }
    }
    Var<Real> h = tape.constant(std::move(prev));
    Var<Real> x = embedding_bag(tape.parameter(item_embedding), bags);
    Var<Real> next = cell(tape, x, h);
    for (std::size_t r = 0; r < rows; ++r) {
      auto src = next.value().row(r);
      std::copy(src.begin(), src.end(), hidden_.row(in.lanes[r]).begin());
    }
    if (mode == Mode::kTrain && dropout_ > 0.0) return arnn::dropout(next, dropout_, dropout_rng_);
    return next;
  }

  /// One GRU cell application on explicit input and state.
  Var<Real> cell(Tape<Real>& tape, const Var<Real>& x, const Var<Real>& h) {
    auto gate = [&](Parameter<Real>& w, Parameter<Real>& u, Parameter<Real>& b, const Var<Real>& state) {
      return add(affine(x, tape.parameter(w), tape.parameter(b)), matmul(state, tape.parameter(u)));
    };
    Var<Real> z = sigmoid(gate(w_update, u_update, b_update, h));
    Var<Real> r = sigmoid(gate(w_reset, u_reset, b_reset, h));
    Var<Real> n = tanh(gate(w_candidate, u_candidate, b_candidate, mul(r, h)));
    return add(n, mul(z, sub(h, n)));
  }

  Var<Real> scores(Tape<Real>& tape, const Var<Real>& hidden) {
    return affine(hidden, tape.parameter(out_weight), tape.parameter(out_bias));
  }

  Var<Real> logits(Tape<Real>& tape, const StepInput& in, Mode mode) {
    return scores(tape, step(tape, in, mode));
  }

  Parameter<Real> item_embedding;
  Parameter<Real> w_update, u_update, b_update;
  Parameter<Real> w_reset, u_reset, b_reset;
  Parameter<Real> w_candidate, u_candidate, b_candidate;
  Parameter<Real> out_weight, out_bias;

 private:
  std::size_t items_ = 0;
  std::size_t hidden_size_ = 0;
  double dropout_ = 0.0;
  Tensor<Real> hidden_{Shape{0, 0}};
  Rng dropout_rng_;
};

// ---------------------------------------------------------------------------
// PNN context encoder
// ---------------------------------------------------------------------------

/// Inner-product PNN over the context fields plus the previous item. Each
/// field contributes one embedding (the mean when several categories are
/// active); the FC layer sees [linear signal; pairwise signal] and is
/// followed by ReLU and batch normalization.
template <typename Real>
class PnnEncoder {
 public:
  PnnEncoder() = default;

  PnnEncoder(std::vector<std::size_t> field_sizes, std::size_t items, std::size_t embedding_dim,
             std::size_t context_size, Rng& rng)
      : field_sizes_(std::move(field_sizes)),
        items_(items),
        embedding_dim_(embedding_dim),
        context_size_(context_size) {
    if (items == 0 || embedding_dim == 0 || context_size == 0) {
      throw ConfigError("PNN needs items, embedding_dim and context_size > 0");
    }
    std::size_t offset = 0;
    for (std::size_t f = 0; f < field_sizes_.size(); ++f) {
      if (field_sizes_[f] == 0) throw ConfigError("PNN field " + std::to_string(f) + " is empty");
      offsets_.push_back(offset);
      offset += field_sizes_[f];
      field_embeddings.emplace_back("pnn.field" + std::to_string(f),
                                    glorot_uniform<Real>(field_sizes_[f], embedding_dim, rng));
    }
    width_ = offset;
    item_embedding = Parameter<Real>("pnn.item_embedding", glorot_uniform<Real>(items, embedding_dim, rng));
    fc_weight = Parameter<Real>("pnn.fc_weight", glorot_uniform<Real>(fc_input_size(), context_size, rng));
    fc_bias = Parameter<Real>("pnn.fc_bias", Tensor<Real>(Shape{context_size}));
    bn = BatchNorm<Real>("pnn.bn", context_size);
    score_weight = Parameter<Real>("pnn.score_weight", glorot_uniform<Real>(context_size, items, rng));
    score_bias = Parameter<Real>("pnn.score_bias", Tensor<Real>(Shape{items}));
  }

  /// Field count including the previous-item field.
  std::size_t fields() const noexcept { return field_sizes_.size() + 1; }
  std::size_t linear_size() const noexcept { return fields() * embedding_dim_; }
  std::size_t pairwise_size() const noexcept { return pair_count(fields()); }
  std::size_t fc_input_size() const noexcept { return linear_size() + pairwise_size(); }
  std::size_t context_size() const noexcept { return context_size_; }
  std::size_t embedding_dim() const noexcept { return embedding_dim_; }
  std::size_t items() const noexcept { return items_; }
  const std::vector<std::size_t>& field_sizes() const noexcept { return field_sizes_; }

  std::vector<Parameter<Real>*> parameters() {
    std::vector<Parameter<Real>*> out;
    for (auto& p : field_embeddings) out.push_back(&p);
    for (auto* p : {&item_embedding, &fc_weight, &fc_bias, &bn.gamma, &bn.beta, &score_weight,
                    &score_bias}) {
      out.push_back(p);
    }
    return out;
  }

  void reset_state(std::size_t) {}

  /// Field embeddings for each row, flattened into the linear signal z.
  Var<Real> linear_signal(Tape<Real>& tape, const StepInput& in) {
    const std::size_t rows = in.size();
    std::vector<std::vector<std::vector<std::uint32_t>>> bags(
        fields(), std::vector<std::vector<std::uint32_t>>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
      for (auto pos : in.contexts[r]) {
        if (pos >= width_) {
          throw DataError("context position " + std::to_string(pos) + " outside width " +
                          std::to_string(width_));
        }
        const auto f = static_cast<std::size_t>(
            std::upper_bound(offsets_.begin(), offsets_.end(), pos) - offsets_.begin() - 1);
        bags[f][r].push_back(static_cast<std::uint32_t>(pos - offsets_[f]));
      }
      for (std::size_t f = 0; f + 1 < fields(); ++f) {
        if (bags[f][r].empty()) {
          throw DataError("context field " + std::to_string(f) + " has no active category");
        }
      }
      if (in.prev_items[r] >= items_) {
        throw DataError("item index " + std::to_string(in.prev_items[r]) +
                        " outside vocabulary of " + std::to_string(items_));
      }
      bags.back()[r] = {in.prev_items[r]};
    }
    std::vector<Var<Real>> parts;
    for (std::size_t f = 0; f + 1 < fields(); ++f) {
      parts.push_back(embedding_bag(tape.parameter(field_embeddings[f]), bags[f]));
    }
    parts.push_back(embedding_bag(tape.parameter(item_embedding), bags.back()));
    return concat_cols(parts);
  }

  /// Contextual preference c_t = BN(ReLU(FC([z; p]))).
  Var<Real> forward(Tape<Real>& tape, const StepInput& in, Mode mode) {
    Var<Real> z = linear_signal(tape, in);
    Var<Real> p = pairwise_inner(z, fields());
    Var<Real> hidden = relu(affine(concat_cols<Real>({z, p}), tape.parameter(fc_weight),
                                   tape.parameter(fc_bias)));
    return batch_norm(hidden, bn, mode);
  }

  Var<Real> scores(Tape<Real>& tape, const Var<Real>& context) {
    return affine(context, tape.parameter(score_weight), tape.parameter(score_bias));
  }

  Var<Real> logits(Tape<Real>& tape, const StepInput& in, Mode mode) {
    return scores(tape, forward(tape, in, mode));
  }

  std::vector<Parameter<Real>> field_embeddings;
  Parameter<Real> item_embedding;
  Parameter<Real> fc_weight, fc_bias;
  BatchNorm<Real> bn;
  Parameter<Real> score_weight, score_bias;

 private:
  std::vector<std::size_t> field_sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t width_ = 0;
  std::size_t items_ = 0;
  std::size_t embedding_dim_ = 0;
  std::size_t context_size_ = 0;
};

// ---------------------------------------------------------------------------
// ARNN merge network
// ---------------------------------------------------------------------------

/// Pretrained PNN and session body used as frozen feature extractors; the
/// merge layer M = BN(ReLU(FC([c_t; h_t]))) and a fresh output projection
/// are the trainable part, together with the PNN's batch-norm scale/shift.
template <typename Real, typename Body = GruSessionModel<Real>>
  requires SessionBody<Body, Real>
class ArnnModel {
 public:
  ArnnModel() = default;

  ArnnModel(PnnEncoder<Real> pnn_in, Body body_in, std::size_t merge_size, Rng& rng)
      : pnn(std::move(pnn_in)), body(std::move(body_in)) {
    if (pnn.items() != body.items()) {
      throw DataError("PNN scores " + std::to_string(pnn.items()) + " items but the session model " +
                      std::to_string(body.items()));
    }
    const std::size_t in = pnn.context_size() + body.hidden_size();
    merge_weight = Parameter<Real>("merge.weight", glorot_uniform<Real>(in, merge_size, rng));
    merge_bias = Parameter<Real>("merge.bias", Tensor<Real>(Shape{merge_size}));
    merge_bn = BatchNorm<Real>("merge.bn", merge_size);
    out_weight = Parameter<Real>("merge.out_weight", glorot_uniform<Real>(merge_size, pnn.items(), rng));
    out_bias = Parameter<Real>("merge.out_bias", Tensor<Real>(Shape{pnn.items()}));
    freeze_extractors();
  }

  std::size_t merge_input_size() const noexcept {
    return pnn.context_size() + body.hidden_size();
  }
  std::size_t merge_size() const noexcept { return merge_bn.dim(); }
  std::size_t items() const noexcept { return pnn.items(); }

  /// Freezes every extractor parameter except the PNN batch-norm scale/shift.
  void freeze_extractors() {
    for (auto* p : pnn.parameters()) p->frozen = true;
    for (auto* p : body.parameters()) p->frozen = true;
    pnn.bn.gamma.frozen = false;
    pnn.bn.beta.frozen = false;
  }

  /// All parameters, frozen ones included.
  std::vector<Parameter<Real>*> parameters() {
    auto out = pnn.parameters();
    for (auto* p : body.parameters()) out.push_back(p);
    for (auto* p : merge_parameters()) out.push_back(p);
    return out;
  }

  std::vector<Parameter<Real>*> merge_parameters() {
    return collect<Real>({&merge_weight, &merge_bias, &merge_bn.gamma, &merge_bn.beta,
                          &out_weight, &out_bias});
  }

  void reset_state(std::size_t lanes) { body.reset_state(lanes); }

  /// Merge-layer features M([c_t; h_t]). The session body always runs in
  /// inference mode; the PNN batch norm follows `mode`.
  Var<Real> features(Tape<Real>& tape, const StepInput& in, Mode mode) {
    Var<Real> context = pnn.forward(tape, in, mode);
    Var<Real> hidden = body.step(tape, in, Mode::kInference);
    Var<Real> merged = affine(concat_cols<Real>({context, hidden}), tape.parameter(merge_weight),
                              tape.parameter(merge_bias));
    return batch_norm(relu(merged), merge_bn, mode);
  }

  Var<Real> logits(Tape<Real>& tape, const StepInput& in, Mode mode) {
    return affine(features(tape, in, mode), tape.parameter(out_weight), tape.parameter(out_bias));
  }

  PnnEncoder<Real> pnn;
  Body body;
  Parameter<Real> merge_weight, merge_bias;
  BatchNorm<Real> merge_bn;
  Parameter<Real> out_weight, out_bias;
};

}  // namespace arnn
