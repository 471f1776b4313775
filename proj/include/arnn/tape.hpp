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
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "arnn/error.hpp"
#include "arnn/tensor.hpp"

namespace arnn {

template <typename Real>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the
/// tape lives.
template <typename Real>
class Var {
 public:
  Var() = default;
  Var(Tape<Real>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor<Real>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  Tape<Real>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape<Real>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recorder. Nodes are appended in evaluation order, so walking
/// them backwards is a valid topological order for the chain rule.
///
/// Leaves bound to a Parameter receive their accumulated gradient in
/// Parameter::grad after backward(); frozen parameters get gradients too and
/// the optimizer is responsible for ignoring them.
template <typename Real>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<Real>& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Enables a NaN/Inf scan of every recorded value.
  void set_check_finite(bool on) noexcept { check_finite_ = on; }

  Var<Real> constant(Tensor<Real> value) {
    return push(std::move(value), nullptr, false, {}, "constant");
  }

  Var<Real> parameter(Parameter<Real>& p) {
    return push(p.value, &p, true, {}, p.name);
  }

  /// Records an op output. The backward rule is kept only when at least one
  /// parent needs a gradient.
  Var<Real> record(Tensor<Real> value, std::initializer_list<Var<Real>> parents,
                   BackwardFn backward, const char* op) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id()].requires_grad;
    return push(std::move(value), nullptr, needs,
                needs ? std::move(backward) : BackwardFn{}, op);
  }

  Var<Real> record(Tensor<Real> value, const std::vector<Var<Real>>& parents,
                   BackwardFn backward, const char* op) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id()].requires_grad;
    return push(std::move(value), nullptr, needs,
                needs ? std::move(backward) : BackwardFn{}, op);
  }

  const Tensor<Real>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient slot of a node, allocated as zeros on first access.
  Tensor<Real>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
      n.grad = Tensor<Real>(n.value.shape());
      n.has_grad = true;
    }
    return n.grad;
  }

  bool has_grad(std::size_t id) const { return nodes_[id].has_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Propagates d(loss)/d(node) to every reachable node and adds the leaf
  /// gradients into their Parameters.
  void backward(const Var<Real>& loss) {
    if (loss.value().size() != 1) {
      throw DimensionError("backward() needs a scalar loss, got shape " +
                           shape_string(loss.shape()));
    }
    for (auto& n : nodes_) n.has_grad = false;
    grad(loss.id())[0] = Real(1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.requires_grad) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.param != nullptr) {
        auto dst = n.param->grad.values();
        auto src = n.grad.values();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
    }
  }

 private:
  struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;
    Parameter<Real>* param = nullptr;
    BackwardFn backward;
    bool requires_grad = false;
    bool has_grad = false;
  };

  Var<Real> push(Tensor<Real> value, Parameter<Real>* param, bool requires_grad,
                 BackwardFn backward, const std::string& op) {
    if (check_finite_ && !value.all_finite()) {
      throw NumericError("non-finite value produced by " + op);
    }
    nodes_.push_back(Node{std::move(value), Tensor<Real>(), param,
                          std::move(backward), requires_grad, false});
    return Var<Real>(this, nodes_.size() - 1);
  }

  // A deque so references returned by value() survive later pushes.
  std::deque<Node> nodes_;
  bool check_finite_ = false;
};

}  // namespace arnn
