#pragma once

#include <string>
#include <vector>

#include "modiff/denoiser.hpp"
#include "modiff/tensor.hpp"

namespace modiff {

// Whitespace/punctuation-splitting lowercase word tokenizer.
std::vector<std::string> tokenize_words(const std::string& text);

// Corpus-derived word vocabulary with reserved pad/unk slots. Persisted as a
// two-column TSV (id, token) alongside checkpoints.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  std::vector<std::string> tokens;  // index == id

  int size() const { return int(tokens.size()); }
  static Vocabulary build(const std::vector<std::string>& corpus);
  std::vector<int> encode(const std::string& text, int max_tokens) const;
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
};

// Conditioning input for one sequence; exactly one side is populated
// according to the modality.
struct ConditionInput {
  Modality modality = Modality::kNone;
  Tensor<double> mel;       // audio: frames x bands
  std::vector<int> tokens;  // text: token ids
};

// Audio context rows: log-Mel frames linearly projected to ctx_dim.
template <typename T>
typename Graph<T>::Ref audio_context(Graph<T>& g, const DenoiserHyper& h,
                                     const ParamRefs<T>& pr, const Tensor<double>& mel) {
  if (mel.cols != h.mel_bands)
    throw DimensionError("audio_context: mel has " + std::to_string(mel.cols) +
                         " bands, model wants " + std::to_string(h.mel_bands));
  if (mel.rows < 1) throw DimensionError("audio_context: empty mel map");
  auto m = g.constant(tensor_cast<T>(mel));
  return g.add_row_bias(g.matmul(m, pr.at("cond.audio.w")), pr.at("cond.audio.b"));
}

// Text context rows: embedding + sinusoidal positions through a small
// pre-norm self-attention encoder, then an MLP to ctx_dim rows.
template <typename T>
typename Graph<T>::Ref text_context(Graph<T>& g, const DenoiserHyper& h,
                                    const ParamRefs<T>& pr, const std::vector<int>& token_ids) {
  std::vector<int> ids = token_ids;
  if (ids.empty()) ids.push_back(Vocabulary::kPad);
  if (int(ids.size()) > h.text_max_tokens) ids.resize(size_t(h.text_max_tokens));
  for (int id : ids)
    if (id < 0 || id >= h.vocab_size) throw ParameterError("text token id out of vocabulary");
  const int te = h.ctx_dim;
  Tensor<T> pos(int(ids.size()), te);
  for (size_t r = 0; r < ids.size(); ++r) {
    const Tensor<T> e = time_embedding<T>(int(r), te);
    std::copy(e.v.begin(), e.v.end(), pos.row(int(r)));
  }
  auto x = g.add(g.gather_rows(pr.at("cond.text.embed"), ids), g.constant(pos));
  for (int i = 0; i < h.text_layers; ++i) {
    const std::string p = "cond.text.e" + std::to_string(i);
    auto u = g.layer_norm_rows(x, pr.at(p + ".ln1.g"), pr.at(p + ".ln1.b"));
    x = g.add(x, multihead_attention(g, u, u, pr.at(p + ".wq"), pr.at(p + ".wk"),
                                     pr.at(p + ".wv"), pr.at(p + ".wo"), h.heads));
    auto v = g.layer_norm_rows(x, pr.at(p + ".ln2.g"), pr.at(p + ".ln2.b"));
    v = g.silu(g.add_row_bias(g.matmul(v, pr.at(p + ".m1.w")), pr.at(p + ".m1.b")));
    x = g.add(x, g.add_row_bias(g.matmul(v, pr.at(p + ".m2.w")), pr.at(p + ".m2.b")));
  }
  auto f = g.silu(g.add_row_bias(g.matmul(x, pr.at("cond.text.f1.w")), pr.at("cond.text.f1.b")));
  return g.add_row_bias(g.matmul(f, pr.at("cond.text.f2.w")), pr.at("cond.text.f2.b"));
}

// Dispatches on modality. kNone yields an invalid ref (unconditional run,
// allowed for any model); otherwise the modality must match the model's.
template <typename T>
typename Graph<T>::Ref build_context(Graph<T>& g, const DenoiserModel<T>& model,
                                     const ParamRefs<T>& pr, const ConditionInput& cond) {
  if (cond.modality == Modality::kNone) return {};
  if (cond.modality != model.hyper.modality)
    throw ParameterError("conditioning modality does not match the model");
  if (cond.modality == Modality::kAudio) return audio_context(g, model.hyper, pr, cond.mel);
  return text_context(g, model.hyper, pr, cond.tokens);
}

}  // namespace modiff
