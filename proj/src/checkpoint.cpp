#include "modiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace modiff {

NoiseSchedule Checkpoint::schedule() const {
  return linear_schedule(schedule_steps, beta_start, beta_end);
}

namespace {

constexpr char kMagic[8] = {'M', 'O', 'D', 'I', 'F', 'F', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u16(std::ostream& out, uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return uint16_t(b[0] | (uint16_t(b[1]) << 8));
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
  return v;
}

void put_tensor(std::ostream& out, const std::string& name, const Tensor<float>& t) {
  if (name.size() > 0xffff) throw ParameterError("tensor name too long");
  put_u16(out, uint16_t(name.size()));
  out.write(name.data(), std::streamsize(name.size()));
  put_u32(out, uint32_t(t.rows));
  put_u32(out, uint32_t(t.cols));
  for (float x : t.v) put_u32(out, std::bit_cast<uint32_t>(x));
}

std::pair<std::string, Tensor<float>> get_tensor(std::istream& in) {
  const uint16_t name_len = get_u16(in);
  std::string name(name_len, '\0');
  in.read(name.data(), name_len);
  const auto rows = int(get_u32(in));
  const auto cols = int(get_u32(in));
  if (!in || rows < 0 || cols < 0) throw IoError("corrupt checkpoint tensor header");
  Tensor<float> t(rows, cols);
  for (auto& x : t.v) x = std::bit_cast<float>(get_u32(in));
  if (!in) throw IoError("truncated checkpoint tensor: " + name);
  return {std::move(name), std::move(t)};
}

nlohmann::json hyper_to_json(const DenoiserHyper& h) {
  return {{"input_channels", h.input_channels},
          {"base_channels", h.base_channels},
          {"channel_mults", {h.channel_mults[0], h.channel_mults[1], h.channel_mults[2]}},
          {"heads", h.heads},
          {"attn_dim", h.attn_dim},
          {"ctx_dim", h.ctx_dim},
          {"time_sin_dim", h.time_sin_dim},
          {"time_mlp_dim", h.time_mlp_dim},
          {"modality", modality_name(h.modality)},
          {"mel_bands", h.mel_bands},
          {"vocab_size", h.vocab_size},
          {"text_layers", h.text_layers},
          {"text_max_tokens", h.text_max_tokens}};
}

DenoiserHyper hyper_from_json(const nlohmann::json& j) {
  DenoiserHyper h;
  h.input_channels = j.at("input_channels").get<int>();
  h.base_channels = j.at("base_channels").get<int>();
  for (int i = 0; i < 3; ++i) h.channel_mults[size_t(i)] = j.at("channel_mults")[size_t(i)].get<int>();
  h.heads = j.at("heads").get<int>();
  h.attn_dim = j.at("attn_dim").get<int>();
  h.ctx_dim = j.at("ctx_dim").get<int>();
  h.time_sin_dim = j.at("time_sin_dim").get<int>();
  h.time_mlp_dim = j.at("time_mlp_dim").get<int>();
  h.modality = modality_from_name(j.at("modality").get<std::string>());
  h.mel_bands = j.at("mel_bands").get<int>();
  h.vocab_size = j.at("vocab_size").get<int>();
  h.text_layers = j.at("text_layers").get<int>();
  h.text_max_tokens = j.at("text_max_tokens").get<int>();
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json hdr;
  hdr["hyper"] = hyper_to_json(ckpt.model.hyper);
  hdr["schedule"] = {{"steps", ckpt.schedule_steps},
                     {"beta_start", ckpt.beta_start},
                     {"beta_end", ckpt.beta_end}};
  hdr["skeleton"] = {{"joint_names", ckpt.skeleton.joint_names},
                     {"parents", ckpt.skeleton.parents},
                     {"symmetry", ckpt.skeleton.symmetry}};
  hdr["fps"] = ckpt.fps;
  hdr["step"] = ckpt.step;
  hdr["seed"] = std::to_string(ckpt.seed);  // string: JSON numbers lose u64 precision
  hdr["has_optimizer"] = ckpt.optim.has_value();
  if (ckpt.vocab) hdr["vocab"] = ckpt.vocab->tokens;
  const std::string hdr_text = hdr.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  put_u32(out, uint32_t(hdr_text.size()));
  out.write(hdr_text.data(), std::streamsize(hdr_text.size()));

  uint32_t n_tensors = uint32_t(ckpt.model.params.entries.size());
  if (ckpt.optim) n_tensors *= 3;
  put_u32(out, n_tensors);
  for (const auto& e : ckpt.model.params.entries)
    put_tensor(out, e.name, ckpt.model.params.at(e.name));
  if (ckpt.optim) {
    for (const auto& e : ckpt.model.params.entries)
      put_tensor(out, "optim.m." + e.name, ckpt.optim->m.at(e.name));
    for (const auto& e : ckpt.model.params.entries)
      put_tensor(out, "optim.v." + e.name, ckpt.optim->v.at(e.name));
  }
  if (!out) throw IoError("short write to checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path);
  if (get_u32(in) != kVersion) throw IoError("unsupported checkpoint version: " + path);
  const uint32_t hdr_len = get_u32(in);
  std::string hdr_text(hdr_len, '\0');
  in.read(hdr_text.data(), hdr_len);
  if (!in) throw IoError("truncated checkpoint header: " + path);
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(hdr_text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint header: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  ckpt.model = build_denoiser<float>(hyper_from_json(hdr.at("hyper")));
  ckpt.schedule_steps = hdr.at("schedule").at("steps").get<int>();
  ckpt.beta_start = hdr.at("schedule").at("beta_start").get<double>();
  ckpt.beta_end = hdr.at("schedule").at("beta_end").get<double>();
  ckpt.skeleton.joint_names = hdr.at("skeleton").at("joint_names").get<std::vector<std::string>>();
  ckpt.skeleton.parents = hdr.at("skeleton").at("parents").get<std::vector<int>>();
  ckpt.skeleton.symmetry = hdr.at("skeleton").at("symmetry").get<std::vector<int>>();
  ckpt.skeleton.validate();
  ckpt.fps = hdr.at("fps").get<double>();
  ckpt.step = hdr.at("step").get<int64_t>();
  ckpt.seed = std::stoull(hdr.at("seed").get<std::string>());
  if (hdr.contains("vocab")) {
    Vocabulary v;
    v.tokens = hdr.at("vocab").get<std::vector<std::string>>();
    ckpt.vocab = std::move(v);
  }
  const bool has_optim = hdr.at("has_optimizer").get<bool>();
  if (has_optim) ckpt.optim.emplace();

  const uint32_t n_tensors = get_u32(in);
  size_t filled = 0;
  for (uint32_t i = 0; i < n_tensors; ++i) {
    auto [name, tensor] = get_tensor(in);
    std::map<std::string, Tensor<float>>* dst = &ckpt.model.params.tensors;
    std::string key = name;
    if (name.rfind("optim.m.", 0) == 0) {
      if (!ckpt.optim) throw IoError("unexpected optimizer tensor: " + name);
      dst = &ckpt.optim->m;
      key = name.substr(8);
      dst->emplace(key, Tensor<float>());
    } else if (name.rfind("optim.v.", 0) == 0) {
      if (!ckpt.optim) throw IoError("unexpected optimizer tensor: " + name);
      dst = &ckpt.optim->v;
      key = name.substr(8);
      dst->emplace(key, Tensor<float>());
    }
    auto it = dst->find(key);
    if (it == dst->end()) throw IoError("checkpoint tensor not in model: " + name);
    if (dst == &ckpt.model.params.tensors && !it->second.same_shape(tensor))
      throw IoError("checkpoint tensor shape mismatch: " + name);
    it->second = std::move(tensor);
    ++filled;
  }
  const size_t expected =
      ckpt.model.params.entries.size() * (has_optim ? 3 : 1);
  if (filled != expected) throw IoError("checkpoint is missing tensors");
  if (ckpt.optim)
    for (const auto& e : ckpt.model.params.entries) {
      const auto mi = ckpt.optim->m.find(e.name);
      const auto vi = ckpt.optim->v.find(e.name);
      const auto& p = ckpt.model.params.at(e.name);
      if (mi == ckpt.optim->m.end() || vi == ckpt.optim->v.end() ||
          !mi->second.same_shape(p) || !vi->second.same_shape(p))
        throw IoError("checkpoint optimizer state incomplete");
    }
  return ckpt;
}

}  // namespace modiff
