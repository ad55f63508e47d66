// Copyright 2026 The vqad Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vqad/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cassert>
#include <cmath>
#include <memory>
#include <sstream>

#include "vqad/error.hpp"

namespace vqad {

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != count(shape_)) {
    throw ContractError("tensor data size " + std::to_string(data_.size()) +
                        " does not match shape " + shape_string(shape_));
  }
}

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace ag {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ContractError(std::string(op) + ": shape mismatch " +
                        shape_string(a.shape()) + " vs " +
                        shape_string(b.shape()));
  }
}

Tape& tape_of(Var a) {
  assert(a.valid());
  return *a.tape();
}

}  // namespace

Param::Param(std::string n, Tensor v)
    : name(std::move(n)),
      value(std::move(v)),
      grad(value.shape()),
      m(value.shape()),
      v(value.shape()) {}

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

Var Tape::constant(Tensor value) { return record(std::move(value), false, {}); }

Var Tape::leaf(Tensor value) { return record(std::move(value), true, {}); }

Var Tape::param(Param& p) {
  Var v = record(p.value, true, {});
  nodes_[v.id()].param = &p;
  return v;
}

Var Tape::record(Tensor value, bool needs_grad, Backward fn) {
  nodes_.push_back(Node{std::move(value), Tensor{}, needs_grad, std::move(fn), nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Tape::grad(int id) {
  Node& node = nodes_[id];
  if (node.grad.empty() && !node.value.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Tape::backward(Var scalar) {
  if (scalar.tape() != this) throw ContractError("backward: variable from another tape");
  if (value(scalar.id()).size() != 1) {
    throw ContractError("backward: expected a scalar, got shape " +
                        shape_string(value(scalar.id()).shape()));
  }
  grad(scalar.id())[0] = 1.0f;
  for (int id = scalar.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.needs_grad || node.grad.empty()) continue;
    if (node.backward) node.backward(*this);
    if (node.param != nullptr) {
      Tensor& acc = node.param->grad;
      const Tensor& g = node.grad;
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
  }
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct ConvGeometry {
  int cin, h, w, cout, kh, kw, ho, wo, stride, pad;
  std::vector<std::pair<int, int>> taps;
  int rows() const { return cin * static_cast<int>(taps.size()); }
  int cols() const { return ho * wo; }
};

ConvGeometry make_geometry(const Tensor& x, const Tensor& weight, const ConvSpec& spec) {
  if (x.rank() != 3 || weight.rank() != 4) {
    throw ContractError("conv2d: expected (C,H,W) input and (O,I,KH,KW) weight, got " +
                        shape_string(x.shape()) + " and " + shape_string(weight.shape()));
  }
  if (x.dim(0) != weight.dim(1)) {
    throw ContractError("conv2d: input has " + std::to_string(x.dim(0)) +
                        " channels, weight expects " + std::to_string(weight.dim(1)));
  }
  ConvGeometry g;
  g.cin = x.dim(0);
  g.h = x.dim(1);
  g.w = x.dim(2);
  g.cout = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = spec.stride;
  g.pad = spec.pad;
  g.ho = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
  if (g.ho <= 0 || g.wo <= 0) throw ContractError("conv2d: kernel larger than padded input");
  if (spec.taps.empty()) {
    for (int ky = 0; ky < g.kh; ++ky)
      for (int kx = 0; kx < g.kw; ++kx) g.taps.emplace_back(ky, kx);
  } else {
    g.taps = spec.taps;
  }
  return g;
}

void im2col(const ConvGeometry& g, const float* x, float* cols) {
  const int ntaps = static_cast<int>(g.taps.size());
  const int ncols = g.cols();
  for (int c = 0; c < g.cin; ++c) {
    const float* plane = x + static_cast<std::size_t>(c) * g.h * g.w;
    for (int t = 0; t < ntaps; ++t) {
      const auto [ky, kx] = g.taps[t];
      float* row = cols + static_cast<std::size_t>(c * ntaps + t) * ncols;
      for (int oy = 0; oy < g.ho; ++oy) {
        const int iy = oy * g.stride - g.pad + ky;
        float* dst = row + oy * g.wo;
        if (iy < 0 || iy >= g.h) {
          std::fill(dst, dst + g.wo, 0.0f);
          continue;
        }
        const float* src = plane + iy * g.w;
        for (int ox = 0; ox < g.wo; ++ox) {
          const int ix = ox * g.stride - g.pad + kx;
          dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0f;
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const float* cols, float* dx) {
  const int ntaps = static_cast<int>(g.taps.size());
  const int ncols = g.cols();
  for (int c = 0; c < g.cin; ++c) {
    float* plane = dx + static_cast<std::size_t>(c) * g.h * g.w;
    for (int t = 0; t < ntaps; ++t) {
      const auto [ky, kx] = g.taps[t];
      const float* row = cols + static_cast<std::size_t>(c * ntaps + t) * ncols;
      for (int oy = 0; oy < g.ho; ++oy) {
        const int iy = oy * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.h) continue;
        const float* src = row + oy * g.wo;
        float* dst = plane + iy * g.w;
        for (int ox = 0; ox < g.wo; ++ox) {
          const int ix = ox * g.stride - g.pad + kx;
          if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
        }
      }
    }
  }
}

// Packs the active taps of a (O, I, KH, KW) weight into an (O, I*T) matrix.
RowMat gather_weight(const ConvGeometry& g, const Tensor& weight) {
  const int ntaps = static_cast<int>(g.taps.size());
  RowMat wm(g.cout, g.rows());
  for (int o = 0; o < g.cout; ++o)
    for (int c = 0; c < g.cin; ++c)
      for (int t = 0; t < ntaps; ++t) {
        const auto [ky, kx] = g.taps[t];
        wm(o, c * ntaps + t) =
            weight[((static_cast<std::size_t>(o) * g.cin + c) * g.kh + ky) * g.kw + kx];
      }
  return wm;
}

}  // namespace

Var conv2d(Var x, Var weight, Var bias, const ConvSpec& spec) {
  Tape& tape = tape_of(x);
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  auto g = std::make_shared<ConvGeometry>(make_geometry(xv, wv, spec));
  if (bias.valid() && (bias.value().rank() != 1 || bias.value().dim(0) != g->cout)) {
    throw ContractError("conv2d: bias shape " + shape_string(bias.value().shape()));
  }

  auto cols = std::make_shared<RowMat>(g->rows(), g->cols());
  im2col(*g, xv.data(), cols->data());
  auto wm = std::make_shared<RowMat>(gather_weight(*g, wv));

  // Products and reductions run on Eigen-owned storage only: vectorized
  // reductions over a Map peel by address, so sums would depend on heap layout.
  Tensor out({g->cout, g->ho, g->wo});
  MapMat om(out.data(), g->cout, g->cols());
  RowMat prod = (*wm) * (*cols);
  om = prod;
  if (bias.valid()) {
    const Tensor& bv = bias.value();
    for (int o = 0; o < g->cout; ++o) om.row(o).array() += bv[o];
  }

  const int ix = x.id(), iw = weight.id(), ib = bias.valid() ? bias.id() : -1;
  const bool ng = tape.needs_grad(ix) || tape.needs_grad(iw) ||
                  (ib >= 0 && tape.needs_grad(ib));
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), ng, [=](Tape& t) {
    const RowMat dout = ConstMapMat(t.grad(self).data(), g->cout, g->cols());
    if (t.needs_grad(iw)) {
      RowMat dwm = dout * cols->transpose();
      Tensor& dw = t.grad(iw);
      const int ntaps = static_cast<int>(g->taps.size());
      for (int o = 0; o < g->cout; ++o)
        for (int c = 0; c < g->cin; ++c)
          for (int k = 0; k < ntaps; ++k) {
            const auto [ky, kx] = g->taps[k];
            dw[((static_cast<std::size_t>(o) * g->cin + c) * g->kh + ky) * g->kw + kx] +=
                dwm(o, c * ntaps + k);
          }
    }
    if (ib >= 0 && t.needs_grad(ib)) {
      Tensor& db = t.grad(ib);
      for (int o = 0; o < g->cout; ++o) db[o] += dout.row(o).sum();
    }
    if (t.needs_grad(ix)) {
      RowMat dcols = wm->transpose() * dout;
      col2im_add(*g, dcols.data(), t.grad(ix).data());
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

template <typename F, typename DF>
Var map_unary(Var a, F f, DF df) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  const int ia = a.id();
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), tape.needs_grad(ia), [=](Tape& t) {
    const Tensor& xv = t.value(ia);
    const Tensor& yv = t.value(self);
    const Tensor& gy = t.grad(self);
    Tensor& gx = t.grad(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * df(xv[i], yv[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  Tape& tape = tape_of(a);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const int ia = a.id(), ib = b.id();
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), tape.needs_grad(ia) || tape.needs_grad(ib),
                     [=](Tape& t) {
                       const Tensor& g = t.grad(self);
                       for (int id : {ia, ib}) {
                         if (!t.needs_grad(id)) continue;
                         Tensor& d = t.grad(id);
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                       }
                     });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const int ia = a.id(), ib = b.id();
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), tape.needs_grad(ia) || tape.needs_grad(ib),
                     [=](Tape& t) {
                       const Tensor& g = t.grad(self);
                       if (t.needs_grad(ia)) {
                         Tensor& d = t.grad(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                       }
                       if (t.needs_grad(ib)) {
                         Tensor& d = t.grad(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
                       }
                     });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const int ia = a.id(), ib = b.id();
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), tape.needs_grad(ia) || tape.needs_grad(ib),
                     [=](Tape& t) {
                       const Tensor& g = t.grad(self);
                       const Tensor& av = t.value(ia);
                       const Tensor& bw = t.value(ib);
                       if (t.needs_grad(ia)) {
                         Tensor& d = t.grad(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bw[i];
                       }
                       if (t.needs_grad(ib)) {
                         Tensor& d = t.grad(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
                       }
                     });
}

Var scale(Var a, float factor) {
  return map_unary(
      a, [factor](float x) { return x * factor; },
      [factor](float, float) { return factor; });
}

Var relu(Var a) {
  return map_unary(
      a, [](float x) { return x > 0.0f ? x : 0.0f; },
      [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

Var sigmoid(Var a) {
  return map_unary(
      a, [](float x) { return 1.0f / (1.0f + std::exp(-x)); },
      [](float, float y) { return y * (1.0f - y); });
}

Var tanh(Var a) {
  return map_unary(
      a, [](float x) { return std::tanh(x); },
      [](float, float y) { return 1.0f - y * y; });
}

Var detach(Var a) { return tape_of(a).constant(a.value()); }

Var upsample2x(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  if (x.rank() != 3) throw ContractError("upsample2x: expected (C,H,W)");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < 2 * h; ++y)
      for (int xx = 0; xx < 2 * w; ++xx) out.at(k, y, xx) = x.at(k, y / 2, xx / 2);
  const int ia = a.id();
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), tape.needs_grad(ia), [=](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& d = t.grad(ia);
    for (int k = 0; k < c; ++k)
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx) d.at(k, y / 2, xx / 2) += g.at(k, y, xx);
  });
}

Var slice_channels(Var a, int begin, int end) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  if (x.rank() != 3 || begin < 0 || end > x.dim(0) || begin >= end) {
    throw ContractError("slice_channels: invalid range");
  }
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  Tensor out({end - begin, x.dim(1), x.dim(2)});
  std::copy(x.data() + begin * plane, x.data() + end * plane, out.data());
  const int ia = a.id();
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), tape.needs_grad(ia), [=](Tape& t) {
    const Tensor& g = t.grad(self);
    float* d = t.grad(ia).data() + begin * plane;
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

Var gather_rows(Var table, std::span<const int> indices, int height, int width) {
  Tape& tape = tape_of(table);
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw ContractError("gather_rows: table must be (N, D)");
  if (indices.size() != static_cast<std::size_t>(height) * width) {
    throw ContractError("gather_rows: index count does not match grid");
  }
  const int n = tv.dim(0), d = tv.dim(1);
  const std::size_t cells = indices.size();
  Tensor out({d, height, width});
  for (std::size_t p = 0; p < cells; ++p) {
    const int row = indices[p];
    if (row < 0 || row >= n) throw ContractError("gather_rows: index out of range");
    for (int c = 0; c < d; ++c) out[c * cells + p] = tv[static_cast<std::size_t>(row) * d + c];
  }
  const int it = table.id();
  const int self = static_cast<int>(tape.size());
  std::vector<int> idx(indices.begin(), indices.end());
  return tape.record(std::move(out), tape.needs_grad(it), [=, idx = std::move(idx)](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& dt = t.grad(it);
    for (std::size_t p = 0; p < cells; ++p)
      for (int c = 0; c < d; ++c)
        dt[static_cast<std::size_t>(idx[p]) * d + c] += g[c * cells + p];
  });
}

// ---------------------------------------------------------------------------
// Reductions

namespace {

template <typename F, typename DF>
Var reduce(Var a, F f, DF df) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += f(x[i]);
  const float norm = static_cast<float>(x.size());
  Tensor out({1}, static_cast<float>(acc));
  const int ia = a.id();
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), tape.needs_grad(ia), [=](Tape& t) {
    const float g = t.grad(self)[0];
    const Tensor& xv = t.value(ia);
    Tensor& d = t.grad(ia);
    for (std::size_t i = 0; i < xv.size(); ++i) d[i] += g * df(xv[i], norm);
  });
}

}  // namespace

Var sum(Var a) {
  return reduce(a, [](float x) { return static_cast<double>(x); },
                [](float, float) { return 1.0f; });
}

Var sum_square(Var a) {
  return reduce(a, [](float x) { return static_cast<double>(x) * x; },
                [](float x, float) { return 2.0f * x; });
}

Var mean_abs(Var a) {
  Var s = reduce(a, [](float x) { return std::fabs(static_cast<double>(x)); },
                 [](float x, float) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); });
  return scale(s, 1.0f / static_cast<float>(a.value().size()));
}

Var mean_square(Var a) {
  return scale(sum_square(a), 1.0f / static_cast<float>(a.value().size()));
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  Tape& tape = tape_of(logits);
  const Tensor& lv = logits.value();
  if (lv.rank() != 3) throw ContractError("cross_entropy: logits must be (N, H, W)");
  const int n = lv.dim(0);
  const std::size_t cells = static_cast<std::size_t>(lv.dim(1)) * lv.dim(2);
  if (targets.size() != cells) throw ContractError("cross_entropy: target count mismatch");

  auto probs = std::make_shared<std::vector<float>>(static_cast<std::size_t>(n) * cells);
  double total = 0.0;
  for (std::size_t p = 0; p < cells; ++p) {
    float mx = lv[p];
    for (int k = 1; k < n; ++k) mx = std::max(mx, lv[k * cells + p]);
    double z = 0.0;
    for (int k = 0; k < n; ++k) z += std::exp(static_cast<double>(lv[k * cells + p] - mx));
    for (int k = 0; k < n; ++k) {
      (*probs)[k * cells + p] =
          static_cast<float>(std::exp(static_cast<double>(lv[k * cells + p] - mx)) / z);
    }
    const int target = targets[p];
    if (target < 0 || target >= n) throw ContractError("cross_entropy: target out of range");
    total += std::log(z) + mx - lv[target * cells + p];
  }
  Tensor out({1}, static_cast<float>(total / static_cast<double>(cells)));
  const int il = logits.id();
  const int self = static_cast<int>(tape.size());
  std::vector<int> tgt(targets.begin(), targets.end());
  return tape.record(std::move(out), tape.needs_grad(il), [=, tgt = std::move(tgt)](Tape& t) {
    const float g = t.grad(self)[0] / static_cast<float>(cells);
    Tensor& d = t.grad(il);
    for (std::size_t i = 0; i < probs->size(); ++i) d[i] += g * (*probs)[i];
    for (std::size_t p = 0; p < cells; ++p) d[tgt[p] * cells + p] -= g;
  });
}

}  // namespace ag
}  // namespace vqad
