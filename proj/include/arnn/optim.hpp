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

#include <cmath>
#include <span>
#include <vector>

#include "arnn/error.hpp"
#include "arnn/tensor.hpp"

namespace arnn {

struct AdagradConfig {
  double learning_rate = 0.05;
  double weight_decay = 1e-6;
  double epsilon = 1e-10;
};

/// Adagrad with decoupled L2 shrinkage. Per-parameter state lives in
/// Parameter::accumulator.
class Adagrad {
 public:
  explicit Adagrad(AdagradConfig config = {}) : config_(config) {
    if (!(config_.learning_rate > 0.0) || config_.weight_decay < 0.0) {
      throw ConfigError("adagrad: learning_rate must be > 0 and weight_decay >= 0");
    }
  }

  const AdagradConfig& config() const noexcept { return config_; }

  /// acc += g^2; value -= lr * g / (sqrt(acc) + eps) + lr * wd * value.
  /// Frozen parameters keep their value bit-identical. All gradients are
  /// zeroed afterwards.
  template <typename Real>
  void step(std::span<Parameter<Real>* const> params) const {
    for (const Parameter<Real>* p : params) {
      if (!p->frozen && !p->grad.all_finite()) {
        throw NumericError("non-finite gradient in parameter " + p->name);
      }
    }
    const Real lr = static_cast<Real>(config_.learning_rate);
    const Real wd = static_cast<Real>(config_.weight_decay);
    const Real eps = static_cast<Real>(config_.epsilon);
    for (Parameter<Real>* p : params) {
      if (!p->frozen) {
        auto value = p->value.values();
        auto grad = p->grad.values();
        auto acc = p->accumulator.values();
        for (std::size_t i = 0; i < value.size(); ++i) {
          const Real g = grad[i];
          acc[i] += g * g;
          const Real old = value[i];
          value[i] = old - lr * g / (std::sqrt(acc[i]) + eps) - lr * wd * old;
        }
      }
      p->zero_grad();
    }
  }

  template <typename Real>
  void step(const std::vector<Parameter<Real>*>& params) const {
    step(std::span<Parameter<Real>* const>(params));
  }

 private:
  AdagradConfig config_;
};

}  // namespace arnn
