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
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "arnn/error.hpp"
#include "arnn/random.hpp"
#include "arnn/tape.hpp"
#include "arnn/tensor.hpp"

namespace arnn {

namespace detail {

template <typename Real>
void require_matrix(const Tensor<Real>& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " must be a matrix, got " +
                         shape_string(t.shape()));
  }
}

// c (+)= a * b for row-major a[m x k], b[k x n].
template <typename Real>
void gemm_nn(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    Real* ci = c.values().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = a(i, p);
      if (aip == Real(0)) continue;
      const Real* bp = b.values().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c += a * b^T for a[m x n], b[k x n], c[m x k].
template <typename Real>
void gemm_nt(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& c) {
  const std::size_t m = a.rows(), n = a.cols(), k = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    const Real* ai = a.values().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real* bp = b.values().data() + p * n;
      Real acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      c(i, p) += acc;
    }
  }
}

// c += a^T * b for a[m x k], b[m x n], c[k x n].
template <typename Real>
void gemm_tn(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    const Real* bi = b.values().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = a(i, p);
      if (aip == Real(0)) continue;
      Real* cp = c.values().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

template <typename Real>
void check_same_shape(const Var<Real>& a, const Var<Real>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

}  // namespace detail

template <typename Real>
Var<Real> matmul(const Var<Real>& x, const Var<Real>& w) {
  const auto& xv = x.value();
  const auto& wv = w.value();
  detail::require_matrix(xv, "matmul input");
  detail::require_matrix(wv, "matmul weight");
  if (xv.cols() != wv.rows()) {
    throw DimensionError("matmul: input " + shape_string(xv.shape()) +
                         " incompatible with weight " + shape_string(wv.shape()));
  }
  Tensor<Real> out(Shape{xv.rows(), wv.cols()});
  detail::gemm_nn(xv, wv, out);
  const std::size_t xi = x.id(), wi = w.id();
  return x.tape().record(
      std::move(out), {x, w},
      [xi, wi](Tape<Real>& t, const Tensor<Real>& g) {
        if (t.requires_grad(xi)) detail::gemm_nt(g, t.value(wi), t.grad(xi));
        if (t.requires_grad(wi)) detail::gemm_tn(t.value(xi), g, t.grad(wi));
      },
      "matmul");
}

/// out[b,o] = sum_i input[b,i] * weight[i,o] + bias[o].
template <typename Real>
Var<Real> affine(const Var<Real>& x, const Var<Real>& w, const Var<Real>& b) {
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = b.value();
  detail::require_matrix(xv, "affine input");
  detail::require_matrix(wv, "affine weight");
  if (xv.cols() != wv.rows() || bv.size() != wv.cols()) {
    throw DimensionError("affine: input " + shape_string(xv.shape()) +
                         ", weight " + shape_string(wv.shape()) + ", bias " +
                         shape_string(bv.shape()));
  }
  Tensor<Real> out(Shape{xv.rows(), wv.cols()});
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = bv[c];
  }
  detail::gemm_nn(xv, wv, out);
  const std::size_t xi = x.id(), wi = w.id(), bi = b.id();
  return x.tape().record(
      std::move(out), {x, w, b},
      [xi, wi, bi](Tape<Real>& t, const Tensor<Real>& g) {
        if (t.requires_grad(xi)) detail::gemm_nt(g, t.value(wi), t.grad(xi));
        if (t.requires_grad(wi)) detail::gemm_tn(t.value(xi), g, t.grad(wi));
        if (t.requires_grad(bi)) {
          auto& gb = t.grad(bi);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            auto row = g.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
          }
        }
      },
      "affine");
}

template <typename Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  detail::check_same_shape(a, b, "add");
  Tensor<Real> out = a.value();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record(
      std::move(out), {a, b},
      [ai, bi](Tape<Real>& t, const Tensor<Real>& g) {
        for (std::size_t id : {ai, bi}) {
          if (!t.requires_grad(id)) continue;
          auto& d = t.grad(id);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        }
      },
      "add");
}

template <typename Real>
Var<Real> sub(const Var<Real>& a, const Var<Real>& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor<Real> out = a.value();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record(
      std::move(out), {a, b},
      [ai, bi](Tape<Real>& t, const Tensor<Real>& g) {
        if (t.requires_grad(ai)) {
          auto& d = t.grad(ai);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        }
        if (t.requires_grad(bi)) {
          auto& d = t.grad(bi);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
        }
      },
      "sub");
}

/// Elementwise (Hadamard) product.
template <typename Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor<Real> out = a.value();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record(
      std::move(out), {a, b},
      [ai, bi](Tape<Real>& t, const Tensor<Real>& g) {
        if (t.requires_grad(ai)) {
          auto& d = t.grad(ai);
          const auto& other = t.value(bi);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * other[i];
        }
        if (t.requires_grad(bi)) {
          auto& d = t.grad(bi);
          const auto& other = t.value(ai);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * other[i];
        }
      },
      "mul");
}

/// Sum of all entries as a scalar.
template <typename Real>
Var<Real> sum(const Var<Real>& x) {
  Real s = 0;
  for (Real v : x.value().values()) s += v;
  const std::size_t xi = x.id();
  return x.tape().record(
      Tensor<Real>::scalar(s), {x},
      [xi](Tape<Real>& t, const Tensor<Real>& g) {
        auto& d = t.grad(xi);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0];
      },
      "sum");
}

enum class Activation { kSigmoid, kTanh, kRelu };

template <typename Real>
Real sigmoid_value(Real x) {
  // Split on sign so exp() never overflows.
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

template <typename Real>
Var<Real> elementwise(Activation kind, const Var<Real>& x) {
  Tensor<Real> out = x.value();
  for (auto& v : out.values()) {
    switch (kind) {
      case Activation::kSigmoid: v = sigmoid_value(v); break;
      case Activation::kTanh: v = std::tanh(v); break;
      case Activation::kRelu: v = v > Real(0) ? v : Real(0); break;
    }
  }
  const std::size_t xi = x.id();
  auto& tape = x.tape();
  const std::size_t oi = tape.size();
  const char* names[] = {"sigmoid", "tanh", "relu"};
  return tape.record(
      std::move(out), {x},
      [xi, oi, kind](Tape<Real>& t, const Tensor<Real>& g) {
        auto& d = t.grad(xi);
        const auto& y = t.value(oi);
        for (std::size_t i = 0; i < g.size(); ++i) {
          switch (kind) {
            case Activation::kSigmoid: d[i] += g[i] * y[i] * (Real(1) - y[i]); break;
            case Activation::kTanh: d[i] += g[i] * (Real(1) - y[i] * y[i]); break;
            case Activation::kRelu: d[i] += y[i] > Real(0) ? g[i] : Real(0); break;
          }
        }
      },
      names[static_cast<int>(kind)]);
}

template <typename Real>
Var<Real> sigmoid(const Var<Real>& x) { return elementwise(Activation::kSigmoid, x); }
template <typename Real>
Var<Real> tanh(const Var<Real>& x) { return elementwise(Activation::kTanh, x); }
template <typename Real>
Var<Real> relu(const Var<Real>& x) { return elementwise(Activation::kRelu, x); }

/// Row-wise softmax, max-subtracted.
template <typename Real>
Tensor<Real> softmax_rows(const Tensor<Real>& logits) {
  Tensor<Real> out = logits;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    Real mx = row[0];
    for (Real v : row) mx = std::max(mx, v);
    Real total = 0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      total += v;
    }
    for (auto& v : row) v /= total;
  }
  return out;
}

template <typename Real>
Var<Real> softmax(const Var<Real>& logits) {
  if (logits.value().cols() < 1) throw DimensionError("softmax over zero columns");
  const std::size_t xi = logits.id();
  auto& tape = logits.tape();
  const std::size_t oi = tape.size();
  return tape.record(
      softmax_rows(logits.value()), {logits},
      [xi, oi](Tape<Real>& t, const Tensor<Real>& g) {
        auto& d = t.grad(xi);
        const auto& y = t.value(oi);
        for (std::size_t r = 0; r < y.rows(); ++r) {
          auto yr = y.row(r);
          auto gr = g.row(r);
          Real dot = 0;
          for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
          auto dr = d.row(r);
          for (std::size_t c = 0; c < yr.size(); ++c) dr[c] += yr[c] * (gr[c] - dot);
        }
      },
      "softmax");
}

/// Column-wise concatenation of matrices with equal row counts.
template <typename Real>
Var<Real> concat_cols(const std::vector<Var<Real>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    detail::require_matrix(p.value(), "concat_cols part");
    if (p.value().rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " +
                           shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    cols += p.value().cols();
  }
  Tensor<Real> out(Shape{rows, cols});
  std::vector<std::size_t> ids, widths;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      auto src = v.row(r);
      std::copy(src.begin(), src.end(), out.row(r).begin() + offset);
    }
    offset += v.cols();
    ids.push_back(p.id());
    widths.push_back(v.cols());
  }
  return parts[0].tape().record(
      std::move(out), parts,
      [ids, widths](Tape<Real>& t, const Tensor<Real>& g) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (t.requires_grad(ids[k])) {
            auto& d = t.grad(ids[k]);
            for (std::size_t r = 0; r < g.rows(); ++r) {
              auto gr = g.row(r);
              auto dr = d.row(r);
              for (std::size_t c = 0; c < widths[k]; ++c) dr[c] += gr[off + c];
            }
          }
          off += widths[k];
        }
      },
      "concat_cols");
}

/// Mean of the selected rows of `table` for each output row. A bag with a
/// single index is a plain embedding lookup.
template <typename Real>
Var<Real> embedding_bag(const Var<Real>& table,
                        const std::vector<std::vector<std::uint32_t>>& bags) {
  const auto& tv = table.value();
  detail::require_matrix(tv, "embedding table");
  const std::size_t dim = tv.cols();
  Tensor<Real> out(Shape{bags.size(), dim});
  for (std::size_t b = 0; b < bags.size(); ++b) {
    if (bags[b].empty()) throw DataError("embedding_bag: empty bag at row " + std::to_string(b));
    const Real scale = Real(1) / static_cast<Real>(bags[b].size());
    auto dst = out.row(b);
    for (std::uint32_t idx : bags[b]) {
      if (idx >= tv.rows()) {
        throw DataError("embedding index " + std::to_string(idx) +
                        " out of range for table " + shape_string(tv.shape()));
      }
      auto src = tv.row(idx);
      for (std::size_t c = 0; c < dim; ++c) dst[c] += scale * src[c];
    }
  }
  const std::size_t ti = table.id();
  return table.tape().record(
      std::move(out), {table},
      [ti, bags](Tape<Real>& t, const Tensor<Real>& g) {
        auto& d = t.grad(ti);
        for (std::size_t b = 0; b < bags.size(); ++b) {
          const Real scale = Real(1) / static_cast<Real>(bags[b].size());
          auto gr = g.row(b);
          for (std::uint32_t idx : bags[b]) {
            auto dr = d.row(idx);
            for (std::size_t c = 0; c < gr.size(); ++c) dr[c] += scale * gr[c];
          }
        }
      },
      "embedding_bag");
}

/// Number of unordered field pairs.
constexpr std::size_t pair_count(std::size_t fields) {
  return fields < 2 ? 0 : fields * (fields - 1) / 2;
}

/// Inner products of every unordered pair of field embeddings. The input row
/// is the concatenation of `fields` embeddings of equal width; output columns
/// enumerate pairs (f, g), f < g, in lexicographic order.
template <typename Real>
Var<Real> pairwise_inner(const Var<Real>& flat, std::size_t fields) {
  const auto& zv = flat.value();
  detail::require_matrix(zv, "pairwise_inner input");
  if (fields == 0 || zv.cols() % fields != 0) {
    throw DimensionError("pairwise_inner: width " + std::to_string(zv.cols()) +
                         " not divisible into " + std::to_string(fields) + " fields");
  }
  const std::size_t dim = zv.cols() / fields;
  Tensor<Real> out(Shape{zv.rows(), pair_count(fields)});
  for (std::size_t r = 0; r < zv.rows(); ++r) {
    auto z = zv.row(r);
    auto o = out.row(r);
    std::size_t k = 0;
    for (std::size_t f = 0; f < fields; ++f) {
      for (std::size_t h = f + 1; h < fields; ++h, ++k) {
        Real acc = 0;
        for (std::size_t c = 0; c < dim; ++c) acc += z[f * dim + c] * z[h * dim + c];
        o[k] = acc;
      }
    }
  }
  const std::size_t zi = flat.id();
  return flat.tape().record(
      std::move(out), {flat},
      [zi, fields, dim](Tape<Real>& t, const Tensor<Real>& g) {
        const auto& zv = t.value(zi);
        auto& d = t.grad(zi);
        for (std::size_t r = 0; r < zv.rows(); ++r) {
          auto z = zv.row(r);
          auto dz = d.row(r);
          auto gr = g.row(r);
          std::size_t k = 0;
          for (std::size_t f = 0; f < fields; ++f) {
            for (std::size_t h = f + 1; h < fields; ++h, ++k) {
              for (std::size_t c = 0; c < dim; ++c) {
                dz[f * dim + c] += gr[k] * z[h * dim + c];
                dz[h * dim + c] += gr[k] * z[f * dim + c];
              }
            }
          }
        }
      },
      "pairwise_inner");
}

/// Inverted dropout: kept units are scaled by 1 / (1 - rate).
template <typename Real>
Var<Real> dropout(const Var<Real>& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  auto mask = std::make_shared<std::vector<Real>>(x.value().size());
  const Real keep = static_cast<Real>(1.0 / (1.0 - rate));
  Tensor<Real> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = uniform01(rng) < rate ? Real(0) : keep;
    out[i] *= (*mask)[i];
  }
  const std::size_t xi = x.id();
  return x.tape().record(
      std::move(out), {x},
      [xi, mask](Tape<Real>& t, const Tensor<Real>& g) {
        auto& d = t.grad(xi);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (*mask)[i];
      },
      "dropout");
}

enum class Mode { kTrain, kInference };

/// Per-feature batch normalization with learned scale/shift and running
/// statistics for inference.
template <typename Real>
struct BatchNorm {
  Parameter<Real> gamma;
  Parameter<Real> beta;
  Tensor<Real> running_mean;
  Tensor<Real> running_var;
  double epsilon = 1e-5;
  double momentum = 0.1;

  BatchNorm() = default;
  BatchNorm(const std::string& name, std::size_t dim)
      : gamma(name + ".gamma", Tensor<Real>(Shape{dim}, Real(1))),
        beta(name + ".beta", Tensor<Real>(Shape{dim}, Real(0))),
        running_mean(Shape{dim}, Real(0)),
        running_var(Shape{dim}, Real(1)) {}

  std::size_t dim() const { return gamma.value.size(); }
};

template <typename Real>
Var<Real> batch_norm(const Var<Real>& x, BatchNorm<Real>& bn, Mode mode) {
  const auto& xv = x.value();
  detail::require_matrix(xv, "batch_norm input");
  const std::size_t batch = xv.rows(), dim = xv.cols();
  if (dim != bn.dim()) {
    throw DimensionError("batch_norm: input " + shape_string(xv.shape()) +
                         " vs " + std::to_string(bn.dim()) + " features");
  }
  auto& tape = x.tape();
  Var<Real> gamma = tape.parameter(bn.gamma);
  Var<Real> beta = tape.parameter(bn.beta);
  const Real eps = static_cast<Real>(bn.epsilon);

  if (mode == Mode::kInference) {
    Tensor<Real> out(xv.shape());
    std::vector<Real> scale(dim);
    for (std::size_t c = 0; c < dim; ++c) {
      scale[c] = Real(1) / std::sqrt(bn.running_var[c] + eps);
    }
    for (std::size_t r = 0; r < batch; ++r) {
      for (std::size_t c = 0; c < dim; ++c) {
        out(r, c) = bn.gamma.value[c] * (xv(r, c) - bn.running_mean[c]) * scale[c] +
                    bn.beta.value[c];
      }
    }
    const Tensor<Real> mean = bn.running_mean;
    const std::size_t xi = x.id(), gi = gamma.id(), bi = beta.id();
    return tape.record(
        std::move(out), {x, gamma, beta},
        [xi, gi, bi, scale, mean](Tape<Real>& t, const Tensor<Real>& g) {
          const auto& xv = t.value(xi);
          const auto& gv = t.value(gi);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < g.cols(); ++c) {
              if (t.requires_grad(xi)) t.grad(xi)(r, c) += g(r, c) * gv[c] * scale[c];
              if (t.requires_grad(gi)) t.grad(gi)[c] += g(r, c) * (xv(r, c) - mean[c]) * scale[c];
              if (t.requires_grad(bi)) t.grad(bi)[c] += g(r, c);
            }
          }
        },
        "batch_norm");
  }

  if (batch < 2) {
    throw DimensionError("batch_norm: degenerate batch of " + std::to_string(batch) +
                         " rows in train mode");
  }
  Tensor<Real> normalized(xv.shape());
  std::vector<Real> inv_std(dim);
  Tensor<Real> out(xv.shape());
  const Real momentum = static_cast<Real>(bn.momentum);
  for (std::size_t c = 0; c < dim; ++c) {
    Real mean = 0;
    for (std::size_t r = 0; r < batch; ++r) mean += xv(r, c);
    mean /= static_cast<Real>(batch);
    Real var = 0;
    for (std::size_t r = 0; r < batch; ++r) {
      const Real dlt = xv(r, c) - mean;
      var += dlt * dlt;
    }
    var /= static_cast<Real>(batch);
    inv_std[c] = Real(1) / std::sqrt(var + eps);
    for (std::size_t r = 0; r < batch; ++r) {
      normalized(r, c) = (xv(r, c) - mean) * inv_std[c];
      out(r, c) = bn.gamma.value[c] * normalized(r, c) + bn.beta.value[c];
    }
    // Running variance uses the unbiased estimate.
    const Real unbiased = var * static_cast<Real>(batch) / static_cast<Real>(batch - 1);
    bn.running_mean[c] = (Real(1) - momentum) * bn.running_mean[c] + momentum * mean;
    bn.running_var[c] = (Real(1) - momentum) * bn.running_var[c] + momentum * unbiased;
  }
  const std::size_t xi = x.id(), gi = gamma.id(), bi = beta.id();
  return tape.record(
      std::move(out), {x, gamma, beta},
      [xi, gi, bi, normalized = std::move(normalized), inv_std](
          Tape<Real>& t, const Tensor<Real>& g) {
        const std::size_t batch = g.rows(), dim = g.cols();
        const auto& gv = t.value(gi);
        for (std::size_t c = 0; c < dim; ++c) {
          Real sum_g = 0, sum_gx = 0;
          for (std::size_t r = 0; r < batch; ++r) {
            sum_g += g(r, c);
            sum_gx += g(r, c) * normalized(r, c);
          }
          if (t.requires_grad(gi)) t.grad(gi)[c] += sum_gx;
          if (t.requires_grad(bi)) t.grad(bi)[c] += sum_g;
          if (t.requires_grad(xi)) {
            auto& d = t.grad(xi);
            const Real k = gv[c] * inv_std[c] / static_cast<Real>(batch);
            for (std::size_t r = 0; r < batch; ++r) {
              d(r, c) += k * (static_cast<Real>(batch) * g(r, c) - sum_g -
                              normalized(r, c) * sum_gx);
            }
          }
        }
      },
      "batch_norm");
}

}  // namespace arnn
