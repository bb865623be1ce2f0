#include "modiff/denoiser.hpp"

namespace modiff {

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::kNone: return "none";
    case Modality::kAudio: return "audio";
    case Modality::kText: return "text";
  }
  return "none";
}

Modality modality_from_name(const std::string& s) {
  if (s == "none") return Modality::kNone;
  if (s == "audio") return Modality::kAudio;
  if (s == "text") return Modality::kText;
  throw ParameterError("unknown modality: " + s);
}

void DenoiserHyper::validate() const {
  if (input_channels < 3 || input_channels % 3 != 0)
    throw ParameterError("input_channels must be a positive multiple of 3");
  if (base_channels < 1) throw ParameterError("base_channels must be positive");
  for (int m : channel_mults)
    if (m < 1) throw ParameterError("channel multipliers must be positive");
  if (heads < 1) throw ParameterError("heads must be positive");
  if (attn_dim < 1 || attn_dim % heads != 0)
    throw ParameterError("attn_dim must be a positive multiple of heads");
  if (ctx_dim < 1) throw ParameterError("ctx_dim must be positive");
  if (time_sin_dim < 2 || time_sin_dim % 2 != 0)
    throw ParameterError("time_sin_dim must be even and >= 2");
  if (time_mlp_dim < 1) throw ParameterError("time_mlp_dim must be positive");
  if (modality == Modality::kAudio && mel_bands < 1)
    throw ParameterError("mel_bands must be positive for the audio modality");
  if (modality == Modality::kText) {
    if (vocab_size < 2) throw ParameterError("text modality needs vocab_size >= 2");
    if (text_layers < 1) throw ParameterError("text_layers must be positive");
    if (text_max_tokens < 1) throw ParameterError("text_max_tokens must be positive");
    if (ctx_dim % 2 != 0) throw ParameterError("text modality needs even ctx_dim");
    if (ctx_dim % heads != 0) throw ParameterError("text modality needs heads | ctx_dim");
  }
}

namespace detail {

using AddFn = std::function<void(const std::string&, int, int, InitKind, int)>;

namespace {

void add_res_block(const AddFn& add, const std::string& p, int cin, int cout, int tdim) {
  add(p + ".ln1.g", 1, cin, InitKind::kOne, 1);
  add(p + ".ln1.b", 1, cin, InitKind::kZero, 1);
  add(p + ".c1.w", cout, cin * 3, InitKind::kUniformFan, cin * 3);
  add(p + ".c1.b", 1, cout, InitKind::kZero, 1);
  add(p + ".t.w", tdim, cout, InitKind::kUniformFan, tdim);
  add(p + ".t.b", 1, cout, InitKind::kZero, 1);
  add(p + ".ln2.g", 1, cout, InitKind::kOne, 1);
  add(p + ".ln2.b", 1, cout, InitKind::kZero, 1);
  add(p + ".c2.w", cout, cout * 3, InitKind::kUniformFan, cout * 3);
  add(p + ".c2.b", 1, cout, InitKind::kZero, 1);
  if (cin != cout) {
    add(p + ".skip.w", cout, cin, InitKind::kUniformFan, cin);
    add(p + ".skip.b", 1, cout, InitKind::kZero, 1);
  }
}

void add_attn_block(const AddFn& add, const std::string& p, int c, int d, int ctx_dim,
                    bool with_ctx) {
  add(p + ".ln.g", 1, c, InitKind::kOne, 1);
  add(p + ".ln.b", 1, c, InitKind::kZero, 1);
  add(p + ".in.w", c, d, InitKind::kUniformFan, c);
  add(p + ".in.b", 1, d, InitKind::kZero, 1);
  if (with_ctx) {
    add(p + ".ctx.w", ctx_dim, d, InitKind::kUniformFan, ctx_dim);
    add(p + ".ctx.b", 1, d, InitKind::kZero, 1);
  }
  add(p + ".wq", d, d, InitKind::kUniformFan, d);
  add(p + ".wk", d, d, InitKind::kUniformFan, d);
  add(p + ".wv", d, d, InitKind::kUniformFan, d);
  add(p + ".wo", d, d, InitKind::kUniformFan, d);
  add(p + ".out.w", d, c, InitKind::kUniformFan, d);
  add(p + ".out.b", 1, c, InitKind::kZero, 1);
}

}  // namespace

void register_params(const DenoiserHyper& h, const AddFn& add) {
  const int tm = h.time_mlp_dim;
  const bool with_ctx = h.modality != Modality::kNone;
  add("time.l1.w", h.time_sin_dim, tm, InitKind::kUniformFan, h.time_sin_dim);
  add("time.l1.b", 1, tm, InitKind::kZero, 1);
  add("time.l2.w", tm, tm, InitKind::kUniformFan, tm);
  add("time.l2.b", 1, tm, InitKind::kZero, 1);
  add("stem.w", h.level_channels(0), h.input_channels * 3, InitKind::kUniformFan,
      h.input_channels * 3);
  add("stem.b", 1, h.level_channels(0), InitKind::kZero, 1);
  for (int lv = 0; lv < 3; ++lv) {
    const int c = h.level_channels(lv);
    const int cn = h.level_channels(std::min(lv + 1, 2));
    const std::string d = "d" + std::to_string(lv);
    add_res_block(add, d + ".res", c, c, tm);
    add_attn_block(add, d + ".attn", c, h.attn_dim, h.ctx_dim, with_ctx);
    add(d + ".down.w", cn, c * 4, InitKind::kUniformFan, c * 4);
    add(d + ".down.b", 1, cn, InitKind::kZero, 1);
  }
  add_res_block(add, "mid.res", h.level_channels(2), h.level_channels(2), tm);
  add_attn_block(add, "mid.attn", h.level_channels(2), h.attn_dim, h.ctx_dim, with_ctx);
  for (int lv = 2; lv >= 0; --lv) {
    const int c = h.level_channels(lv);
    const int cin = (lv == 2) ? c : h.level_channels(lv + 1);
    const std::string u = "u" + std::to_string(lv);
    add(u + ".conv.w", c, cin * 3, InitKind::kUniformFan, cin * 3);
    add(u + ".conv.b", 1, c, InitKind::kZero, 1);
    add_res_block(add, u + ".res", 2 * c, c, tm);
    add_attn_block(add, u + ".attn", c, h.attn_dim, h.ctx_dim, with_ctx);
  }
  add("head.ln.g", 1, h.level_channels(0), InitKind::kOne, 1);
  add("head.ln.b", 1, h.level_channels(0), InitKind::kZero, 1);
  // Zero-initialized output projection: a fresh model predicts exactly zero.
  add("head.w", h.input_channels, h.level_channels(0) * 3, InitKind::kZero, 1);
  add("head.b", 1, h.input_channels, InitKind::kZero, 1);
  if (h.modality == Modality::kAudio) {
    add("cond.audio.w", h.mel_bands, h.ctx_dim, InitKind::kUniformFan, h.mel_bands);
    add("cond.audio.b", 1, h.ctx_dim, InitKind::kZero, 1);
  } else if (h.modality == Modality::kText) {
    const int te = h.ctx_dim;
    add("cond.text.embed", h.vocab_size, te, InitKind::kUniformFan, te);
    for (int i = 0; i < h.text_layers; ++i) {
      const std::string p = "cond.text.e" + std::to_string(i);
      add(p + ".ln1.g", 1, te, InitKind::kOne, 1);
      add(p + ".ln1.b", 1, te, InitKind::kZero, 1);
      add(p + ".wq", te, te, InitKind::kUniformFan, te);
      add(p + ".wk", te, te, InitKind::kUniformFan, te);
      add(p + ".wv", te, te, InitKind::kUniformFan, te);
      add(p + ".wo", te, te, InitKind::kUniformFan, te);
      add(p + ".ln2.g", 1, te, InitKind::kOne, 1);
      add(p + ".ln2.b", 1, te, InitKind::kZero, 1);
      add(p + ".m1.w", te, 2 * te, InitKind::kUniformFan, te);
      add(p + ".m1.b", 1, 2 * te, InitKind::kZero, 1);
      add(p + ".m2.w", 2 * te, te, InitKind::kUniformFan, 2 * te);
      add(p + ".m2.b", 1, te, InitKind::kZero, 1);
    }
    add("cond.text.f1.w", te, te, InitKind::kUniformFan, te);
    add("cond.text.f1.b", 1, te, InitKind::kZero, 1);
    add("cond.text.f2.w", te, h.ctx_dim, InitKind::kUniformFan, te);
    add("cond.text.f2.b", 1, h.ctx_dim, InitKind::kZero, 1);
  }
}

}  // namespace detail
}  // namespace modiff
