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

// Test-side helpers: finite differences, random instance generators and
// brute-force oracles written independently of the library code paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "arnn/data.hpp"
#include "arnn/random.hpp"
#include "arnn/tape.hpp"
#include "arnn/tensor.hpp"

namespace arnn::testing {

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

struct GradCheck {
  double max_relative_error = 0.0;
  std::string worst;
  std::size_t entries = 0;
};

/// |a - n| / max(|a|, |n|, floor). Central differences at h=1e-5 carry about
/// 1e-10 of rounding noise, so gradients below the floor are effectively
/// compared at an absolute 1e-9 instead of blowing the noise up.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Compares backward() against central differences for every entry of
/// `params`. `build` must rebuild the scalar loss from scratch on the tape
/// it is given and must be a pure function of the parameter values.
inline GradCheck check_gradients(const std::vector<Parameter<double>*>& params,
                                 const std::function<Var<double>(Tape<double>&)>& build,
                                 double h = 1e-5) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<double> tape;
    Var<double> loss = build(tape);
    tape.backward(loss);
  }
  GradCheck out;
  for (auto* p : params) {
    const Tensor<double> analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      double plus, minus;
      {
        Tape<double> tape;
        plus = build(tape).value().item();
      }
      p->value[i] = saved - h;
      {
        Tape<double> tape;
        minus = build(tape).value().item();
      }
      p->value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double err = relative_error(analytic[i], numeric);
      ++out.entries;
      if (err > out.max_relative_error) {
        out.max_relative_error = err;
        out.worst = p->name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic[i]) +
                    " numeric " + std::to_string(numeric);
      }
    }
    p->zero_grad();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random generators
// ---------------------------------------------------------------------------

inline Tensor<double> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0,
                                    double hi = 1.0) {
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = uniform(rng, lo, hi);
  return t;
}

/// Sum of weights * x: a generic scalar probe of an op's output.
inline Var<double> probe(Tape<double>& tape, const Var<double>& x, const Tensor<double>& weights) {
  Var<double> w = tape.constant(weights);
  const auto& xv = x.value();
  const std::size_t xi = x.id();
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) total += weights[i] * xv[i];
  return tape.record(
      Tensor<double>::scalar(total), {x, w},
      [xi, weights](Tape<double>& t, const Tensor<double>& g) {
        auto& d = t.grad(xi);
        for (std::size_t i = 0; i < weights.size(); ++i) d[i] += g[0] * weights[i];
      },
      "probe");
}

/// Sessions over `items` items with lengths in [2, max_len] and a context
/// with one category per field.
inline SessionDataset random_dataset(Rng& rng, std::size_t sessions, std::size_t items,
                                     const std::vector<std::size_t>& field_sizes,
                                     std::size_t max_len = 6) {
  std::vector<FieldSpec> fields;
  for (std::size_t f = 0; f < field_sizes.size(); ++f) {
    FieldSpec spec{"f" + std::to_string(f), {}};
    for (std::size_t c = 0; c < field_sizes[f]; ++c) spec.categories.push_back("v" + std::to_string(c));
    fields.push_back(spec);
  }
  std::vector<std::string> names;
  for (std::size_t i = 0; i < items; ++i) names.push_back("i" + std::to_string(i));
  SessionDataset data{{}, FieldSchema(fields, names)};
  for (std::size_t s = 0; s < sessions; ++s) {
    Context ctx;
    for (std::size_t f = 0; f < field_sizes.size(); ++f) {
      ctx.push_back(static_cast<std::uint32_t>(data.schema.offsets()[f] +
                                               uniform_index(rng, field_sizes[f])));
    }
    Session session;
    session.start_time = static_cast<std::int64_t>(s) * 100;
    const std::size_t len = 2 + uniform_index(rng, max_len - 1);
    for (std::size_t t = 0; t < len; ++t) {
      session.steps.push_back(Step{ctx, static_cast<ItemIndex>(uniform_index(rng, items))});
    }
    session.end_time = session.start_time + static_cast<std::int64_t>(len);
    data.sessions.push_back(std::move(session));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Brute-force oracles
// ---------------------------------------------------------------------------

/// Rank by full sort of (score desc, index asc); 1-based.
inline std::size_t brute_rank(const std::vector<double>& scores, std::size_t target) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (order[r] == target) return r + 1;
  }
  return order.size() + 1;
}

struct BruteMetrics {
  double recall = 0.0;
  double mrr = 0.0;
};

/// Counts hits and reciprocal positions with a per-list linear scan.
inline BruteMetrics brute_metrics(const std::vector<std::vector<ItemIndex>>& lists,
                                  const std::vector<ItemIndex>& targets) {
  std::size_t hits = 0;
  double rr = 0.0;
  for (std::size_t n = 0; n < lists.size(); ++n) {
    for (std::size_t pos = 0; pos < lists[n].size(); ++pos) {
      if (lists[n][pos] == targets[n]) {
        ++hits;
        rr += 1.0 / static_cast<double>(pos + 1);
        break;
      }
    }
  }
  const double n = static_cast<double>(lists.size());
  return {static_cast<double>(hits) / n, rr / n};
}

/// Dense cosine over binary session-incidence vectors, with regularizer
/// lambda added to the norm product.
inline std::vector<std::vector<double>> dense_cosine(const SessionDataset& data, double lambda) {
  const std::size_t n = data.schema.item_count();
  std::vector<std::vector<int>> incidence(n, std::vector<int>(data.sessions.size(), 0));
  for (std::size_t s = 0; s < data.sessions.size(); ++s) {
    for (const auto& st : data.sessions[s].steps) incidence[st.item][s] = 1;
  }
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double dot = 0, ni = 0, nj = 0;
      for (std::size_t s = 0; s < data.sessions.size(); ++s) {
        dot += incidence[i][s] * incidence[j][s];
        ni += incidence[i][s] * incidence[i][s];
        nj += incidence[j][s] * incidence[j][s];
      }
      const double denom = std::sqrt(ni) * std::sqrt(nj) + lambda;
      sim[i][j] = denom > 0.0 ? dot / denom : 0.0;
    }
  }
  return sim;
}

inline double scalar_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Scalar-loop GRU cell on one row: x (H), h (H), weights row-major H x H.
inline std::vector<double> gru_cell_oracle(const std::vector<double>& x, const std::vector<double>& h,
                                           const Tensor<double>& wz, const Tensor<double>& uz,
                                           const Tensor<double>& bz, const Tensor<double>& wr,
                                           const Tensor<double>& ur, const Tensor<double>& br,
                                           const Tensor<double>& wn, const Tensor<double>& un,
                                           const Tensor<double>& bn) {
  const std::size_t H = h.size();
  auto lin = [&](const std::vector<double>& v, const Tensor<double>& w, std::size_t col) {
    double acc = 0;
    for (std::size_t k = 0; k < v.size(); ++k) acc += v[k] * w(k, col);
    return acc;
  };
  std::vector<double> z(H), r(H), rh(H), out(H);
  for (std::size_t c = 0; c < H; ++c) {
    z[c] = scalar_sigmoid(lin(x, wz, c) + lin(h, uz, c) + bz[c]);
    r[c] = scalar_sigmoid(lin(x, wr, c) + lin(h, ur, c) + br[c]);
  }
  for (std::size_t c = 0; c < H; ++c) rh[c] = r[c] * h[c];
  for (std::size_t c = 0; c < H; ++c) {
    const double n = std::tanh(lin(x, wn, c) + lin(rh, un, c) + bn[c]);
    out[c] = (1.0 - z[c]) * n + z[c] * h[c];
  }
  return out;
}

}  // namespace arnn::testing
