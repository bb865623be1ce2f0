#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "modiff/tensor.hpp"

namespace modiff {

// Tape-based reverse-mode autodiff over 2-D tensors. Build a fresh graph per
// training step; ops record a backward closure only when some ancestor
// requires gradients, so inference graphs carry no tape at all. backward() is
// single-shot per graph (gradients accumulate in place).
template <typename T>
class Graph {
 public:
  struct Ref {
    int i = -1;
    bool valid() const { return i >= 0; }
  };

  Ref leaf(Tensor<T> value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.needs = requires_grad;
    nodes_.push_back(std::move(n));
    return Ref{int(nodes_.size()) - 1};
  }
  Ref constant(Tensor<T> value) { return leaf(std::move(value), false); }

  const Tensor<T>& val(Ref r) const { return nodes_[size_t(r.i)].value; }

  // Gradient of the last backward() w.r.t. node r (zeros if it never received one).
  Tensor<T> grad(Ref r) const {
    const Node& n = nodes_[size_t(r.i)];
    if (n.has_grad) return n.grad;
    return Tensor<T>(n.value.rows, n.value.cols);
  }

  size_t node_count() const { return nodes_.size(); }

  void backward(Ref loss) {
    Node& ln = nodes_[size_t(loss.i)];
    if (ln.value.rows != 1 || ln.value.cols != 1)
      throw DimensionError("backward: loss must be 1x1");
    gref(loss.i).at(0, 0) = T(1);
    for (int i = loss.i; i >= 0; --i) {
      Node& n = nodes_[size_t(i)];
      if (n.has_grad && n.back) n.back(*this);
    }
  }

  // ---- elementwise ----

  Ref add(Ref a, Ref b) {
    const auto &va = val(a), &vb = val(b);
    if (!va.same_shape(vb)) throw DimensionError("add: shape mismatch");
    Tensor<T> y(va.rows, va.cols);
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] = va.v[i] + vb.v[i];
    const int self = next_index();
    return make(std::move(y), needs(a) || needs(b), [self, a, b](Graph& g) {
      const auto& gy = g.nodes_[size_t(self)].grad;
      if (g.needs(a)) g.axpy(a.i, T(1), gy);
      if (g.needs(b)) g.axpy(b.i, T(1), gy);
    });
  }

  Ref sub(Ref a, Ref b) {
    const auto &va = val(a), &vb = val(b);
    if (!va.same_shape(vb)) throw DimensionError("sub: shape mismatch");
    Tensor<T> y(va.rows, va.cols);
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] = va.v[i] - vb.v[i];
    const int self = next_index();
    return make(std::move(y), needs(a) || needs(b), [self, a, b](Graph& g) {
      const auto& gy = g.nodes_[size_t(self)].grad;
      if (g.needs(a)) g.axpy(a.i, T(1), gy);
      if (g.needs(b)) g.axpy(b.i, T(-1), gy);
    });
  }

  Ref mul(Ref a, Ref b) {
    const auto &va = val(a), &vb = val(b);
    if (!va.same_shape(vb)) throw DimensionError("mul: shape mismatch");
    Tensor<T> y(va.rows, va.cols);
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] = va.v[i] * vb.v[i];
    const int self = next_index();
    return make(std::move(y), needs(a) || needs(b), [self, a, b](Graph& g) {
      const auto& gy = g.nodes_[size_t(self)].grad;
      if (g.needs(a)) {
        auto& ga = g.gref(a.i);
        const auto& vb2 = g.val(b);
        for (size_t i = 0; i < gy.v.size(); ++i) ga.v[i] += gy.v[i] * vb2.v[i];
      }
      if (g.needs(b)) {
        auto& gb = g.gref(b.i);
        const auto& va2 = g.val(a);
        for (size_t i = 0; i < gy.v.size(); ++i) gb.v[i] += gy.v[i] * va2.v[i];
      }
    });
  }

  Ref scale(Ref a, double s) {
    const auto& va = val(a);
    Tensor<T> y(va.rows, va.cols);
    const T ts = T(s);
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] = ts * va.v[i];
    const int self = next_index();
    return make(std::move(y), needs(a), [self, a, ts](Graph& g) {
      if (g.needs(a)) g.axpy(a.i, ts, g.nodes_[size_t(self)].grad);
    });
  }

  Ref silu(Ref a) {
    const auto& va = val(a);
    Tensor<T> y(va.rows, va.cols);
    for (size_t i = 0; i < y.v.size(); ++i) {
      const T s = T(1) / (T(1) + std::exp(-va.v[i]));
      y.v[i] = va.v[i] * s;
    }
    const int self = next_index();
    return make(std::move(y), needs(a), [self, a](Graph& g) {
      if (!g.needs(a)) return;
      const auto& gy = g.nodes_[size_t(self)].grad;
      const auto& x = g.val(a);
      auto& gx = g.gref(a.i);
      for (size_t i = 0; i < gy.v.size(); ++i) {
        const T s = T(1) / (T(1) + std::exp(-x.v[i]));
        gx.v[i] += gy.v[i] * s * (T(1) + x.v[i] * (T(1) - s));
      }
    });
  }

  // Elementwise square root; gradient is defined as 0 where the input is
  // exactly 0 so downstream RMS-style losses stay finite on degenerate data.
  Ref sqrt_elem(Ref a) {
    const auto& va = val(a);
    Tensor<T> y(va.rows, va.cols);
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] = std::sqrt(va.v[i]);
    const int self = next_index();
    return make(std::move(y), needs(a), [self, a](Graph& g) {
      if (!g.needs(a)) return;
      const auto& gy = g.nodes_[size_t(self)].grad;
      const auto& yv = g.nodes_[size_t(self)].value;
      auto& gx = g.gref(a.i);
      for (size_t i = 0; i < gy.v.size(); ++i)
        if (yv.v[i] != T(0)) gx.v[i] += gy.v[i] / (T(2) * yv.v[i]);
    });
  }

  // ---- linear algebra ----

  Ref matmul(Ref a, Ref b) {
    const auto &va = val(a), &vb = val(b);
    if (va.cols != vb.rows) throw DimensionError("matmul: inner dims disagree");
    Tensor<T> y(va.rows, vb.cols);
    gemm_nn(va, vb, y);
    const int self = next_index();
    return make(std::move(y), needs(a) || needs(b), [self, a, b](Graph& g) {
      const auto& gy = g.nodes_[size_t(self)].grad;
      if (g.needs(a)) gemm_nt_acc(gy, g.val(b), g.gref(a.i));  // ga += gy b^T
      if (g.needs(b)) gemm_tn_acc(g.val(a), gy, g.gref(b.i));  // gb += a^T gy
    });
  }

  Ref transpose(Ref a) {
    const auto& va = val(a);
    Tensor<T> y(va.cols, va.rows);
    for (int r = 0; r < va.rows; ++r)
      for (int c = 0; c < va.cols; ++c) y.at(c, r) = va.at(r, c);
    const int self = next_index();
    return make(std::move(y), needs(a), [self, a](Graph& g) {
      if (!g.needs(a)) return;
      const auto& gy = g.nodes_[size_t(self)].grad;
      auto& ga = g.gref(a.i);
      for (int r = 0; r < gy.rows; ++r)
        for (int c = 0; c < gy.cols; ++c) ga.at(c, r) += gy.at(r, c);
    });
  }

  // y[i][j] = x[i][j] + b[0][j]
  Ref add_row_bias(Ref x, Ref b) {
    const auto &vx = val(x), &vb = val(b);
    if (vb.rows != 1 || vb.cols != vx.cols) throw DimensionError("add_row_bias: bias must be 1 x cols");
    Tensor<T> y(vx.rows, vx.cols);
    for (int r = 0; r < vx.rows; ++r)
      for (int c = 0; c < vx.cols; ++c) y.at(r, c) = vx.at(r, c) + vb.at(0, c);
    const int self = next_index();
    return make(std::move(y), needs(x) || needs(b), [self, x, b](Graph& g) {
      const auto& gy = g.nodes_[size_t(self)].grad;
      if (g.needs(x)) g.axpy(x.i, T(1), gy);
      if (g.needs(b)) {
        auto& gb = g.gref(b.i);
        for (int r = 0; r < gy.rows; ++r)
          for (int c = 0; c < gy.cols; ++c) gb.at(0, c) += gy.at(r, c);
      }
    });
  }

  // y[c][j] = x[c][j] + b[0][c]  (per-channel bias on a channels x frames map)
  Ref add_channel_bias(Ref x, Ref b) {
    const auto &vx = val(x), &vb = val(b);
    if (vb.rows != 1 || vb.cols != vx.rows)
      throw DimensionError("add_channel_bias: bias must be 1 x rows");
    Tensor<T> y(vx.rows, vx.cols);
    for (int r = 0; r < vx.rows; ++r) {
      const T bias = vb.at(0, r);
      for (int c = 0; c < vx.cols; ++c) y.at(r, c) = vx.at(r, c) + bias;
    }
    const int self = next_index();
    return make(std::move(y), needs(x) || needs(b), [self, x, b](Graph& g) {
      const auto& gy = g.nodes_[size_t(self)].grad;
      if (g.needs(x)) g.axpy(x.i, T(1), gy);
      if (g.needs(b)) {
        auto& gb = g.gref(b.i);
        for (int r = 0; r < gy.rows; ++r) {
          T acc = T(0);
          for (int c = 0; c < gy.cols; ++c) acc += gy.at(r, c);
          gb.at(0, r) += acc;
        }
      }
    });
  }

  // 1-D convolution over a channels x frames map with zero padding.
  // x: Cin x N, w: Cout x (Cin*K), b: 1 x Cout  ->  Cout x Nout.
  Ref conv1d(Ref x, Ref w, Ref b, int k, int stride, int pad) {
    const auto &vx = val(x), &vw = val(w), &vb = val(b);
    if (k < 1 || stride < 1 || pad < 0) throw ParameterError("conv1d: bad geometry");
    const int cin = vx.rows, n = vx.cols, cout = vw.rows;
    if (vw.cols != cin * k) throw DimensionError("conv1d: weight cols must be Cin*K");
    if (vb.rows != 1 || vb.cols != cout) throw DimensionError("conv1d: bias must be 1 x Cout");
    const int span = n + 2 * pad - k;
    if (span < 0 || span % stride != 0)
      throw DimensionError("conv1d: frame count incompatible with stride/pad");
    const int nout = span / stride + 1;
    Tensor<T> y(cout, nout);
    for (int o = 0; o < cout; ++o) {
      T* yo = y.row(o);
      for (int j = 0; j < nout; ++j) yo[j] = vb.at(0, o);
      const T* wo = vw.row(o);
      for (int c = 0; c < cin; ++c) {
        const T* xc = vx.row(c);
        for (int kk = 0; kk < k; ++kk) {
          const T wv = wo[c * k + kk];
          if (wv == T(0)) continue;
          for (int j = 0; j < nout; ++j) {
            const int src = j * stride + kk - pad;
            if (src >= 0 && src < n) yo[j] += wv * xc[src];
          }
        }
      }
    }
    const int self = next_index();
    return make(std::move(y), needs(x) || needs(w) || needs(b),
                [self, x, w, b, k, stride, pad](Graph& g) {
      const auto& gy = g.nodes_[size_t(self)].grad;
      const auto &vx2 = g.val(x), &vw2 = g.val(w);
      const int cin = vx2.rows, n = vx2.cols, cout = vw2.rows, nout = gy.cols;
      if (g.needs(b)) {
        auto& gb = g.gref(b.i);
        for (int o = 0; o < cout; ++o) {
          T acc = T(0);
          const T* gyo = gy.row(o);
          for (int j = 0; j < nout; ++j) acc += gyo[j];
          gb.at(0, o) += acc;
        }
      }
      if (g.needs(w)) {
        auto& gw = g.gref(w.i);
        for (int o = 0; o < cout; ++o) {
          const T* gyo = gy.row(o);
          T* gwo = gw.row(o);
          for (int c = 0; c < cin; ++c) {
            const T* xc = vx2.row(c);
            for (int kk = 0; kk < k; ++kk) {
              T acc = T(0);
              for (int j = 0; j < nout; ++j) {
                const int src = j * stride + kk - pad;
                if (src >= 0 && src < n) acc += gyo[j] * xc[src];
              }
              gwo[c * k + kk] += acc;
            }
          }
        }
      }
      if (g.needs(x)) {
        auto& gx = g.gref(x.i);
        for (int o = 0; o < cout; ++o) {
          const T* gyo = gy.row(o);
          const T* wo = vw2.row(o);
          for (int c = 0; c < cin; ++c) {
            T* gxc = gx.row(c);
            for (int kk = 0; kk < k; ++kk) {
              const T wv = wo[c * k + kk];
              if (wv == T(0)) continue;
              for (int j = 0; j < nout; ++j) {
                const int src = j * stride + kk - pad;
                if (src >= 0 && src < n) gxc[src] += wv * gyo[j];
              }
            }
          }
        }
      }
    });
  }

  // Layer norm over each row of x (n x d), with per-feature gain/bias (1 x d).
  Ref layer_norm_rows(Ref x, Ref gamma, Ref beta, double eps = 1e-5) {
    const auto &vx = val(x), &vg = val(gamma), &vb = val(beta);
    if (vg.rows != 1 || vg.cols != vx.cols || vb.rows != 1 || vb.cols != vx.cols)
      throw DimensionError("layer_norm_rows: gain/bias must be 1 x cols");
    const int n = vx.rows, d = vx.cols;
    Tensor<T> y(n, d), xhat(n, d);
    std::vector<T> inv_std(static_cast<size_t>(n));
    for (int r = 0; r < n; ++r) {
      const T* xr = vx.row(r);
      T mu = T(0);
      for (int c = 0; c < d; ++c) mu += xr[c];
      mu /= T(d);
      T var = T(0);
      for (int c = 0; c < d; ++c) var += (xr[c] - mu) * (xr[c] - mu);
      var /= T(d);
      const T is = T(1) / std::sqrt(var + T(eps));
      inv_std[size_t(r)] = is;
      for (int c = 0; c < d; ++c) {
        xhat.at(r, c) = (xr[c] - mu) * is;
        y.at(r, c) = vg.at(0, c) * xhat.at(r, c) + vb.at(0, c);
      }
    }
    const int self = next_index();
    return make(std::move(y), needs(x) || needs(gamma) || needs(beta),
                [self, x, gamma, beta, xh = std::move(xhat),
                 is = std::move(inv_std)](Graph& g) {
      const auto& gy = g.nodes_[size_t(self)].grad;
      const auto& vg2 = g.val(gamma);
      const int n = gy.rows, d = gy.cols;
      if (g.needs(gamma)) {
        auto& gg = g.gref(gamma.i);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < d; ++c) gg.at(0, c) += gy.at(r, c) * xh.at(r, c);
      }
      if (g.needs(beta)) {
        auto& gb = g.gref(beta.i);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < d; ++c) gb.at(0, c) += gy.at(r, c);
      }
      if (g.needs(x)) {
        auto& gx = g.gref(x.i);
        for (int r = 0; r < n; ++r) {
          T mean_dxh = T(0), mean_dxh_xh = T(0);
          for (int c = 0; c < d; ++c) {
            const T dxh = gy.at(r, c) * vg2.at(0, c);
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh.at(r, c);
          }
          mean_dxh /= T(d);
          mean_dxh_xh /= T(d);
          for (int c = 0; c < d; ++c) {
            const T dxh = gy.at(r, c) * vg2.at(0, c);
            gx.at(r, c) += is[size_t(r)] * (dxh - mean_dxh - xh.at(r, c) * mean_dxh_xh);
          }
        }
      }
    });
  }

  Ref softmax_rows(Ref a) {
    const auto& va = val(a);
    Tensor<T> y(va.rows, va.cols);
    for (int r = 0; r < va.rows; ++r) {
      const T* xr = va.row(r);
      T mx = xr[0];
      for (int c = 1; c < va.cols; ++c) mx = std::max(mx, xr[c]);
      T sum = T(0);
      for (int c = 0; c < va.cols; ++c) {
        y.at(r, c) = std::exp(xr[c] - mx);
        sum += y.at(r, c);
      }
      for (int c = 0; c < va.cols; ++c) y.at(r, c) /= sum;
    }
    const int self = next_index();
    return make(std::move(y), needs(a), [self, a](Graph& g) {
      if (!g.needs(a)) return;
      const auto& gy = g.nodes_[size_t(self)].grad;
      const auto& yv = g.nodes_[size_t(self)].value;
      auto& ga = g.gref(a.i);
      for (int r = 0; r < gy.rows; ++r) {
        T dot = T(0);
        for (int c = 0; c < gy.cols; ++c) dot += gy.at(r, c) * yv.at(r, c);
        for (int c = 0; c < gy.cols; ++c) ga.at(r, c) += yv.at(r, c) * (gy.at(r, c) - dot);
      }
    });
  }

  // ---- shape ops ----

  Ref nearest_upsample2(Ref a) {
    const auto& va = val(a);
    Tensor<T> y(va.rows, 2 * va.cols);
    for (int r = 0; r < va.rows; ++r)
      for (int c = 0; c < va.cols; ++c) y.at(r, 2 * c) = y.at(r, 2 * c + 1) = va.at(r, c);
    const int self = next_index();
    return make(std::move(y), needs(a), [self, a](Graph& g) {
      if (!g.needs(a)) return;
      const auto& gy = g.nodes_[size_t(self)].grad;
      auto& ga = g.gref(a.i);
      for (int r = 0; r < ga.rows; ++r)
        for (int c = 0; c < ga.cols; ++c)
          ga.at(r, c) += gy.at(r, 2 * c) + gy.at(r, 2 * c + 1);
    });
  }

  Ref concat_rows(const std::vector<Ref>& parts) {
    if (parts.empty()) throw ParameterError("concat_rows: empty list");
    int rows = 0;
    const int cols = val(parts[0]).cols;
    bool any_needs = false;
    for (Ref p : parts) {
      if (val(p).cols != cols) throw DimensionError("concat_rows: col mismatch");
      rows += val(p).rows;
      any_needs = any_needs || needs(p);
    }
    Tensor<T> y(rows, cols);
    int r0 = 0;
    for (Ref p : parts) {
      const auto& vp = val(p);
      std::copy(vp.v.begin(), vp.v.end(), y.v.begin() + size_t(r0) * cols);
      r0 += vp.rows;
    }
    const int self = next_index();
    return make(std::move(y), any_needs, [self, parts](Graph& g) {
      const auto& gy = g.nodes_[size_t(self)].grad;
      int r0 = 0;
      for (Ref p : parts) {
        const int pr = g.val(p).rows;
        if (g.needs(p)) {
          auto& gp = g.gref(p.i);
          for (int r = 0; r < pr; ++r)
            for (int c = 0; c < gy.cols; ++c) gp.at(r, c) += gy.at(r0 + r, c);
        }
        r0 += pr;
      }
    });
  }

  Ref concat_cols(const std::vector<Ref>& parts) {
    if (parts.empty()) throw ParameterError("concat_cols: empty list");
    const int rows = val(parts[0]).rows;
    int cols = 0;
    bool any_needs = false;
    for (Ref p : parts) {
      if (val(p).rows != rows) throw DimensionError("concat_cols: row mismatch");
      cols += val(p).cols;
      any_needs = any_needs || needs(p);
    }
    Tensor<T> y(rows, cols);
    int c0 = 0;
    for (Ref p : parts) {
      const auto& vp = val(p);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < vp.cols; ++c) y.at(r, c0 + c) = vp.at(r, c);
      c0 += vp.cols;
    }
    const int self = next_index();
    return make(std::move(y), any_needs, [self, parts](Graph& g) {
      const auto& gy = g.nodes_[size_t(self)].grad;
      int c0 = 0;
      for (Ref p : parts) {
        const auto& vp = g.val(p);
        if (g.needs(p)) {
          auto& gp = g.gref(p.i);
          for (int r = 0; r < vp.rows; ++r)
            for (int c = 0; c < vp.cols; ++c) gp.at(r, c) += gy.at(r, c0 + c);
        }
        c0 += vp.cols;
      }
    });
  }

  Ref slice_rows(Ref a, int r0, int count) {
    const auto& va = val(a);
    if (r0 < 0 || count < 1 || r0 + count > va.rows) throw DimensionError("slice_rows: out of range");
    Tensor<T> y(count, va.cols);
    for (int r = 0; r < count; ++r)
      std::copy(va.row(r0 + r), va.row(r0 + r) + va.cols, y.row(r));
    const int self = next_index();
    return make(std::move(y), needs(a), [self, a, r0](Graph& g) {
      if (!g.needs(a)) return;
      const auto& gy = g.nodes_[size_t(self)].grad;
      auto& ga = g.gref(a.i);
      for (int r = 0; r < gy.rows; ++r)
        for (int c = 0; c < gy.cols; ++c) ga.at(r0 + r, c) += gy.at(r, c);
    });
  }

  Ref slice_cols(Ref a, int c0, int count) {
    const auto& va = val(a);
    if (c0 < 0 || count < 1 || c0 + count > va.cols) throw DimensionError("slice_cols: out of range");
    Tensor<T> y(va.rows, count);
    for (int r = 0; r < va.rows; ++r)
      for (int c = 0; c < count; ++c) y.at(r, c) = va.at(r, c0 + c);
    const int self = next_index();
    return make(std::move(y), needs(a), [self, a, c0](Graph& g) {
      if (!g.needs(a)) return;
      const auto& gy = g.nodes_[size_t(self)].grad;
      auto& ga = g.gref(a.i);
      for (int r = 0; r < gy.rows; ++r)
        for (int c = 0; c < gy.cols; ++c) ga.at(r, c0 + c) += gy.at(r, c);
    });
  }

  // y[i] = x[idx[i]]; duplicate indices accumulate gradient (embedding lookup).
  Ref gather_rows(Ref a, std::vector<int> idx) {
    const auto& va = val(a);
    for (int i : idx)
      if (i < 0 || i >= va.rows) throw DimensionError("gather_rows: index out of range");
    Tensor<T> y(int(idx.size()), va.cols);
    for (size_t r = 0; r < idx.size(); ++r)
      std::copy(va.row(idx[r]), va.row(idx[r]) + va.cols, y.row(int(r)));
    const int self = next_index();
    return make(std::move(y), needs(a), [self, a, idx = std::move(idx)](Graph& g) {
      if (!g.needs(a)) return;
      const auto& gy = g.nodes_[size_t(self)].grad;
      auto& ga = g.gref(a.i);
      for (size_t r = 0; r < idx.size(); ++r)
        for (int c = 0; c < gy.cols; ++c) ga.at(idx[r], c) += gy.at(int(r), c);
    });
  }

  Ref gather_cols(Ref a, std::vector<int> idx) {
    const auto& va = val(a);
    for (int i : idx)
      if (i < 0 || i >= va.cols) throw DimensionError("gather_cols: index out of range");
    Tensor<T> y(va.rows, int(idx.size()));
    for (int r = 0; r < va.rows; ++r)
      for (size_t c = 0; c < idx.size(); ++c) y.at(r, int(c)) = va.at(r, idx[c]);
    const int self = next_index();
    return make(std::move(y), needs(a), [self, a, idx = std::move(idx)](Graph& g) {
      if (!g.needs(a)) return;
      const auto& gy = g.nodes_[size_t(self)].grad;
      auto& ga = g.gref(a.i);
      for (int r = 0; r < gy.rows; ++r)
        for (size_t c = 0; c < idx.size(); ++c) ga.at(r, idx[c]) += gy.at(r, int(c));
    });
  }

  // ---- reductions ----

  Ref sum_all(Ref a) {
    const auto& va = val(a);
    Tensor<T> y(1, 1);
    T acc = T(0);
    for (T x : va.v) acc += x;
    y.at(0, 0) = acc;
    const int self = next_index();
    return make(std::move(y), needs(a), [self, a](Graph& g) {
      if (!g.needs(a)) return;
      const T gy = g.nodes_[size_t(self)].grad.at(0, 0);
      auto& ga = g.gref(a.i);
      for (auto& x : ga.v) x += gy;
    });
  }

  Ref mean_all(Ref a) { return scale(sum_all(a), 1.0 / double(val(a).numel())); }

  // Column means: (n x d) -> (1 x d).
  Ref mean_rows(Ref a) {
    const auto& va = val(a);
    if (va.rows < 1) throw DimensionError("mean_rows: empty");
    Tensor<T> y(1, va.cols);
    for (int r = 0; r < va.rows; ++r)
      for (int c = 0; c < va.cols; ++c) y.at(0, c) += va.at(r, c);
    for (int c = 0; c < va.cols; ++c) y.at(0, c) /= T(va.rows);
    const int self = next_index();
    return make(std::move(y), needs(a), [self, a](Graph& g) {
      if (!g.needs(a)) return;
      const auto& gy = g.nodes_[size_t(self)].grad;
      auto& ga = g.gref(a.i);
      const T inv = T(1) / T(ga.rows);
      for (int r = 0; r < ga.rows; ++r)
        for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += gy.at(0, c) * inv;
    });
  }

  // Row sums: (n x d) -> (n x 1).
  Ref sum_cols(Ref a) {
    const auto& va = val(a);
    Tensor<T> y(va.rows, 1);
    for (int r = 0; r < va.rows; ++r) {
      T acc = T(0);
      for (int c = 0; c < va.cols; ++c) acc += va.at(r, c);
      y.at(r, 0) = acc;
    }
    const int self = next_index();
    return make(std::move(y), needs(a), [self, a](Graph& g) {
      if (!g.needs(a)) return;
      const auto& gy = g.nodes_[size_t(self)].grad;
      auto& ga = g.gref(a.i);
      for (int r = 0; r < ga.rows; ++r)
        for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += gy.at(r, 0);
    });
  }

  bool needs(Ref r) const { return nodes_[size_t(r.i)].needs; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs = false;
    bool has_grad = false;
    std::function<void(Graph&)> back;
  };

  int next_index() const { return int(nodes_.size()); }

  Ref make(Tensor<T> value, bool node_needs, std::function<void(Graph&)> back) {
    Node n;
    n.value = std::move(value);
    n.needs = node_needs;
    if (node_needs) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Ref{int(nodes_.size()) - 1};
  }

  Tensor<T>& gref(int i) {
    Node& n = nodes_[size_t(i)];
    if (!n.has_grad) {
      n.grad = Tensor<T>(n.value.rows, n.value.cols);
      n.has_grad = true;
    }
    return n.grad;
  }

  void axpy(int i, T s, const Tensor<T>& src) {
    auto& dst = gref(i);
    for (size_t k = 0; k < src.v.size(); ++k) dst.v[k] += s * src.v[k];
  }

  // C = A B
  static void gemm_nn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
    for (int i = 0; i < a.rows; ++i) {
      T* ci = c.row(i);
      const T* ai = a.row(i);
      for (int k = 0; k < a.cols; ++k) {
        const T av = ai[k];
        if (av == T(0)) continue;
        const T* bk = b.row(k);
        for (int j = 0; j < b.cols; ++j) ci[j] += av * bk[j];
      }
    }
  }

  // C += A B^T
  static void gemm_nt_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
    for (int i = 0; i < a.rows; ++i) {
      const T* ai = a.row(i);
      T* ci = c.row(i);
      for (int j = 0; j < b.rows; ++j) {
        const T* bj = b.row(j);
        T acc = T(0);
        for (int k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
        ci[j] += acc;
      }
    }
  }

  // C += A^T B
  static void gemm_tn_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
    for (int k = 0; k < a.rows; ++k) {
      const T* ak = a.row(k);
      const T* bk = b.row(k);
      for (int i = 0; i < a.cols; ++i) {
        const T av = ak[i];
        if (av == T(0)) continue;
        T* ci = c.row(i);
        for (int j = 0; j < b.cols; ++j) ci[j] += av * bk[j];
      }
    }
  }

  std::vector<Node> nodes_;
};

}  // namespace modiff
