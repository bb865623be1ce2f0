#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "modiff/graph.hpp"
#include "modiff/rng.hpp"
#include "modiff/tensor.hpp"

namespace modiff {

enum class Modality { kNone, kAudio, kText };

std::string modality_name(Modality m);
Modality modality_from_name(const std::string& s);

// Geometry of the denoiser; serialized into checkpoints so a saved model is
// self-describing.
struct DenoiserHyper {
  int input_channels = 0;              // 3 * joint_count
  int base_channels = 32;
  std::array<int, 3> channel_mults{1, 2, 4};
  int heads = 4;
  int attn_dim = 64;
  int ctx_dim = 64;
  int time_sin_dim = 64;               // sinusoidal embedding width (even)
  int time_mlp_dim = 128;
  Modality modality = Modality::kNone;
  int mel_bands = 80;                  // audio modality input width
  int vocab_size = 0;                  // text modality vocabulary size
  int text_layers = 2;
  int text_max_tokens = 64;

  int level_channels(int lv) const { return base_channels * channel_mults[size_t(lv)]; }
  void validate() const;
};

enum class InitKind { kZero, kOne, kUniformFan };

// Named parameter tensors in a stable registration order; names double as
// checkpoint keys and gradient-table keys.
template <typename T>
struct ParamStore {
  struct Entry {
    std::string name;
    InitKind kind = InitKind::kZero;
    int fan_in = 1;
  };
  std::vector<Entry> entries;
  std::map<std::string, Tensor<T>> tensors;

  void add(const std::string& name, int rows, int cols, InitKind kind, int fan_in = 1) {
    if (tensors.count(name)) throw ParameterError("duplicate parameter: " + name);
    entries.push_back({name, kind, fan_in});
    tensors.emplace(name, Tensor<T>(rows, cols));
  }
  Tensor<T>& operator[](const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ParameterError("unknown parameter: " + name);
    return it->second;
  }
  const Tensor<T>& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ParameterError("unknown parameter: " + name);
    return it->second;
  }
  size_t total_params() const {
    size_t n = 0;
    for (const auto& e : entries) n += tensors.at(e.name).numel();
    return n;
  }
};

template <typename T>
struct DenoiserModel {
  DenoiserHyper hyper;
  ParamStore<T> params;
};

namespace detail {
void register_params(const DenoiserHyper& h,
                     const std::function<void(const std::string&, int, int, InitKind, int)>& add);
}

template <typename T>
DenoiserModel<T> build_denoiser(const DenoiserHyper& hyper) {
  hyper.validate();
  DenoiserModel<T> m;
  m.hyper = hyper;
  detail::register_params(hyper, [&](const std::string& name, int rows, int cols,
                                     InitKind kind, int fan) {
    m.params.add(name, rows, cols, kind, fan);
  });
  return m;
}

// Deterministic init: one RNG stream consumed in registration order.
template <typename T>
void init_params(DenoiserModel<T>& model, uint64_t seed) {
  NormalSampler rng(mix_seed(seed, /*tag=*/0x696e6974));  // "init"
  for (const auto& e : model.params.entries) {
    Tensor<T>& t = model.params[e.name];
    switch (e.kind) {
      case InitKind::kZero: t.fill(T(0)); break;
      case InitKind::kOne: t.fill(T(1)); break;
      case InitKind::kUniformFan: {
        const double s = 1.0 / std::sqrt(double(e.fan_in));
        for (auto& x : t.v) x = T(s * (2.0 * rng.uniform_open() - 1.0));
        break;
      }
    }
  }
}

// Sinusoidal timestep embedding: half sines, half cosines at frequencies
// 10000^(-2i/dim).
template <typename T>
Tensor<T> time_embedding(int t, int dim) {
  if (dim < 2 || dim % 2 != 0) throw ParameterError("time embedding dim must be even");
  Tensor<T> e(1, dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double w = std::pow(10000.0, -2.0 * double(i) / double(dim));
    e.at(0, i) = T(std::sin(double(t) * w));
    e.at(0, half + i) = T(std::cos(double(t) * w));
  }
  return e;
}

// Pads a frames x channels tensor on the right by edge replication so frame
// count becomes a multiple of `mult`.
template <typename T>
Tensor<T> pad_frames_replicate(const Tensor<T>& frames, int mult) {
  const int n = frames.rows;
  const int target = ((n + mult - 1) / mult) * mult;
  if (target == n) return frames;
  Tensor<T> out(target, frames.cols);
  for (int r = 0; r < target; ++r) {
    const int src = std::min(r, n - 1);
    std::copy(frames.row(src), frames.row(src) + frames.cols, out.row(r));
  }
  return out;
}

template <typename T>
Tensor<T> transpose_plain(const Tensor<T>& a) {
  Tensor<T> y(a.cols, a.rows);
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < a.cols; ++c) y.at(c, r) = a.at(r, c);
  return y;
}

template <typename T>
using ParamRefs = std::map<std::string, typename Graph<T>::Ref>;

template <typename T>
ParamRefs<T> insert_params(Graph<T>& g, const DenoiserModel<T>& model, bool requires_grad) {
  ParamRefs<T> refs;
  for (const auto& e : model.params.entries)
    refs[e.name] = g.leaf(model.params.at(e.name), requires_grad);
  return refs;
}

// Multi-head cross-attention core: x (n x d) attends over context c (m x d).
// No biases; heads are column blocks of the d-wide projections.
template <typename T>
typename Graph<T>::Ref multihead_attention(Graph<T>& g, typename Graph<T>::Ref x,
                                           typename Graph<T>::Ref c,
                                           typename Graph<T>::Ref wq,
                                           typename Graph<T>::Ref wk,
                                           typename Graph<T>::Ref wv,
                                           typename Graph<T>::Ref wo, int heads) {
  const int d = g.val(x).cols;
  if (g.val(c).cols != d) throw DimensionError("attention: x and context widths differ");
  if (heads < 1 || d % heads != 0) throw ParameterError("attention: heads must divide width");
  const int dh = d / heads;
  auto q = g.matmul(x, wq), k = g.matmul(c, wk), v = g.matmul(c, wv);
  std::vector<typename Graph<T>::Ref> outs;
  for (int h = 0; h < heads; ++h) {
    auto qh = g.slice_cols(q, h * dh, dh);
    auto kh = g.slice_cols(k, h * dh, dh);
    auto vh = g.slice_cols(v, h * dh, dh);
    auto scores = g.scale(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(double(dh)));
    outs.push_back(g.matmul(g.softmax_rows(scores), vh));
  }
  return g.matmul(heads == 1 ? outs[0] : g.concat_cols(outs), wo);
}

// Plain (no-grad) convenience wrapper used by tests and tools.
template <typename T>
struct AttentionParams {
  Tensor<T> wq, wk, wv, wo;
  int heads = 1;
};

template <typename T>
Tensor<T> cross_attention(const Tensor<T>& x, const Tensor<T>& c, const AttentionParams<T>& p) {
  Graph<T> g;
  auto out = multihead_attention(g, g.constant(x), g.constant(c), g.constant(p.wq),
                                 g.constant(p.wk), g.constant(p.wv), g.constant(p.wo), p.heads);
  return g.val(out);
}

namespace detail {

// Channel-axis layer norm on a channels x frames map, via the row-norm op.
template <typename T>
typename Graph<T>::Ref ln_channels(Graph<T>& g, typename Graph<T>::Ref x,
                                   typename Graph<T>::Ref gamma, typename Graph<T>::Ref beta) {
  return g.transpose(g.layer_norm_rows(g.transpose(x), gamma, beta));
}

template <typename T>
typename Graph<T>::Ref res_block(Graph<T>& g, const ParamRefs<T>& pr, const std::string& p,
                                 typename Graph<T>::Ref x, typename Graph<T>::Ref temb,
                                 int cin, int cout) {
  auto h = g.conv1d(g.silu(ln_channels(g, x, pr.at(p + ".ln1.g"), pr.at(p + ".ln1.b"))),
                    pr.at(p + ".c1.w"), pr.at(p + ".c1.b"), 3, 1, 1);
  auto tvec = g.add_row_bias(g.matmul(temb, pr.at(p + ".t.w")), pr.at(p + ".t.b"));
  h = g.add_channel_bias(h, tvec);
  h = g.conv1d(g.silu(ln_channels(g, h, pr.at(p + ".ln2.g"), pr.at(p + ".ln2.b"))),
               pr.at(p + ".c2.w"), pr.at(p + ".c2.b"), 3, 1, 1);
  auto skip = (cin == cout) ? x : g.conv1d(x, pr.at(p + ".skip.w"), pr.at(p + ".skip.b"), 1, 1, 0);
  return g.add(h, skip);
}

// Cross-modal block: tokens are frames; context rows attend in when present,
// otherwise the block self-attends (c := x).
template <typename T>
typename Graph<T>::Ref attn_block(Graph<T>& g, const ParamRefs<T>& pr, const std::string& p,
                                  typename Graph<T>::Ref x, typename Graph<T>::Ref ctx,
                                  bool has_ctx, int heads) {
  auto u = g.transpose(ln_channels(g, x, pr.at(p + ".ln.g"), pr.at(p + ".ln.b")));
  auto xq = g.add_row_bias(g.matmul(u, pr.at(p + ".in.w")), pr.at(p + ".in.b"));
  auto c = has_ctx
               ? g.add_row_bias(g.matmul(ctx, pr.at(p + ".ctx.w")), pr.at(p + ".ctx.b"))
               : xq;
  auto o = multihead_attention(g, xq, c, pr.at(p + ".wq"), pr.at(p + ".wk"), pr.at(p + ".wv"),
                               pr.at(p + ".wo"), heads);
  auto back = g.transpose(g.add_row_bias(g.matmul(o, pr.at(p + ".out.w")), pr.at(p + ".out.b")));
  return g.add(x, back);
}

}  // namespace detail

// Runs the denoiser. mt is frames x channels; frame counts that are not a
// multiple of 8 are right-padded by edge replication and the output is cropped
// back. ctx (tokens x ctx_dim) may be invalid for unconditional runs. Returns
// the predicted noise, frames x channels.
template <typename T>
typename Graph<T>::Ref denoiser_forward(Graph<T>& g, const DenoiserModel<T>& model,
                                        const ParamRefs<T>& pr, const Tensor<T>& mt, int t,
                                        typename Graph<T>::Ref ctx) {
  const DenoiserHyper& h = model.hyper;
  if (mt.cols != h.input_channels)
    throw DimensionError("denoiser_forward: input has " + std::to_string(mt.cols) +
                         " channels, model wants " + std::to_string(h.input_channels));
  if (mt.rows < 1) throw DimensionError("denoiser_forward: need at least one frame");
  const bool has_ctx = ctx.valid();
  if (has_ctx && h.modality == Modality::kNone)
    throw ParameterError("denoiser_forward: unconditional model cannot take context");
  if (has_ctx && g.val(ctx).cols != h.ctx_dim)
    throw DimensionError("denoiser_forward: context width mismatch");
  const int n = mt.rows;
  auto x = g.constant(transpose_plain(pad_frames_replicate(mt, 8)));

  auto temb = g.constant(time_embedding<T>(t, h.time_sin_dim));
  temb = g.silu(g.add_row_bias(g.matmul(temb, pr.at("time.l1.w")), pr.at("time.l1.b")));
  temb = g.add_row_bias(g.matmul(temb, pr.at("time.l2.w")), pr.at("time.l2.b"));

  auto cur = g.conv1d(x, pr.at("stem.w"), pr.at("stem.b"), 3, 1, 1);
  std::vector<typename Graph<T>::Ref> skips;
  for (int lv = 0; lv < 3; ++lv) {
    const int c = h.level_channels(lv);
    const std::string d = "d" + std::to_string(lv);
    cur = detail::res_block(g, pr, d + ".res", cur, temb, c, c);
    cur = detail::attn_block(g, pr, d + ".attn", cur, ctx, has_ctx, h.heads);
    skips.push_back(cur);
    cur = g.conv1d(cur, pr.at(d + ".down.w"), pr.at(d + ".down.b"), 4, 2, 1);
  }
  cur = detail::res_block(g, pr, "mid.res", cur, temb, h.level_channels(2), h.level_channels(2));
  cur = detail::attn_block(g, pr, "mid.attn", cur, ctx, has_ctx, h.heads);
  for (int lv = 2; lv >= 0; --lv) {
    const int c = h.level_channels(lv);
    const std::string u = "u" + std::to_string(lv);
    cur = g.nearest_upsample2(cur);
    cur = g.conv1d(cur, pr.at(u + ".conv.w"), pr.at(u + ".conv.b"), 3, 1, 1);
    cur = g.concat_rows({cur, skips[size_t(lv)]});
    cur = detail::res_block(g, pr, u + ".res", cur, temb, 2 * c, c);
    cur = detail::attn_block(g, pr, u + ".attn", cur, ctx, has_ctx, h.heads);
  }
  cur = g.silu(detail::ln_channels(g, cur, pr.at("head.ln.g"), pr.at("head.ln.b")));
  cur = g.conv1d(cur, pr.at("head.w"), pr.at("head.b"), 3, 1, 1);
  auto out = g.transpose(cur);
  if (g.val(out).rows != n) out = g.slice_rows(out, 0, n);
  return out;
}

// No-grad convenience wrapper: params enter the graph as constants.
template <typename T>
Tensor<T> denoiser_predict(const DenoiserModel<T>& model, const Tensor<T>& mt, int t,
                           const Tensor<T>* ctx_rows) {
  Graph<T> g;
  auto pr = insert_params(g, model, false);
  typename Graph<T>::Ref ctx;
  if (ctx_rows) ctx = g.constant(*ctx_rows);
  return g.val(denoiser_forward(g, model, pr, mt, t, ctx));
}

}  // namespace modiff
