#include "modiff/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "modiff/audio.hpp"
#include "modiff/sampler.hpp"

namespace modiff {

namespace {

constexpr uint64_t kTagTrainStep = 0x7472796e;  // per-step noise/timesteps
constexpr uint64_t kTagShuffle = 0x73686666;    // per-epoch permutation

// Index of the c-th sample in the epoch-shuffled infinite stream.
int stream_index(uint64_t seed, int64_t counter, int n_items) {
  const auto epoch = uint64_t(counter / n_items);
  const auto offset = size_t(counter % n_items);
  std::mt19937_64 eng(mix_seed(seed, kTagShuffle, epoch));
  std::vector<int> perm(static_cast<size_t>(n_items));
  for (int i = 0; i < n_items; ++i) perm[size_t(i)] = i;
  for (size_t i = perm.size() - 1; i > 0; --i) {
    const size_t j = size_t(eng() % (i + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm[offset];
}

}  // namespace

void TrainConfig::validate() const {
  if (max_steps < 0) throw ParameterError("max_steps must be non-negative");
  if (batch_size < 1) throw ParameterError("batch_size must be positive");
  if (!(lr > 0)) throw ParameterError("lr must be positive");
  if (warmup_steps < 0) throw ParameterError("warmup_steps must be non-negative");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1))
    throw ParameterError("adam betas must lie in [0, 1)");
  if (!(adam_eps > 0)) throw ParameterError("adam_eps must be positive");
  if (weight_decay < 0) throw ParameterError("weight_decay must be non-negative");
  if (ckpt_every < 0 || log_every < 1) throw ParameterError("bad ckpt/log cadence");
}

AdamW::AdamW(const DenoiserModel<float>& model, const TrainConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  for (const auto& e : model.params.entries) {
    const auto& p = model.params.at(e.name);
    state_.m.emplace(e.name, Tensor<float>(p.rows, p.cols));
    state_.v.emplace(e.name, Tensor<float>(p.rows, p.cols));
  }
}

void AdamW::update(DenoiserModel<float>& model,
                   const std::map<std::string, Tensor<float>>& grads, int64_t k) {
  if (k < 1) throw ParameterError("AdamW: update count must be >= 1");
  const double warm =
      cfg_.warmup_steps > 0 ? std::min(1.0, double(k) / double(cfg_.warmup_steps)) : 1.0;
  const double lr_eff = cfg_.lr * warm;
  last_lr_eff_ = lr_eff;
  const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, double(k));
  const double bc2 = 1.0 - std::pow(b2, double(k));
  for (const auto& e : model.params.entries) {
    auto& p = model.params[e.name];
    auto& m = state_.m.at(e.name);
    auto& v = state_.v.at(e.name);
    const auto gi = grads.find(e.name);
    if (gi == grads.end()) throw ParameterError("AdamW: missing gradient for " + e.name);
    const auto& g = gi->second;
    if (!g.same_shape(p)) throw DimensionError("AdamW: gradient shape mismatch: " + e.name);
    for (size_t i = 0; i < p.v.size(); ++i) {
      const double gd = double(g.v[i]);
      const double md = b1 * double(m.v[i]) + (1.0 - b1) * gd;
      const double vd = b2 * double(v.v[i]) + (1.0 - b2) * gd * gd;
      m.v[i] = float(md);
      v.v[i] = float(vd);
      // Decoupled decay first, then the Adam step, both scaled by lr_eff.
      double theta = double(p.v[i]) * (1.0 - lr_eff * cfg_.weight_decay);
      theta -= lr_eff * (double(m.v[i]) / bc1) / (std::sqrt(double(v.v[i]) / bc2) + cfg_.adam_eps);
      p.v[i] = float(theta);
    }
  }
}

std::vector<ConditionInput> prepare_conditioning(const Dataset& data, Modality modality,
                                                 const Vocabulary* vocab) {
  std::vector<ConditionInput> conds;
  conds.reserve(data.items.size());
  const MelSpec mel_spec;
  for (const auto& item : data.items) {
    ConditionInput c;
    c.modality = modality;
    if (modality == Modality::kAudio) {
      if (item.audio_path.empty()) throw ParameterError("dataset item is missing audio");
      c.mel = mel_from_file(item.audio_path, mel_spec);
    } else if (modality == Modality::kText) {
      if (!vocab) throw ParameterError("text conditioning needs a vocabulary");
      c.tokens = vocab->encode(item.caption, 64);
    }
    conds.push_back(std::move(c));
  }
  return conds;
}

StepStats train_step(DenoiserModel<float>& model, AdamW& optim, const Dataset& data,
                     const std::vector<ConditionInput>& conds, Modality modality,
                     const NoiseSchedule& sched, const TrainConfig& cfg, int64_t step) {
  if (data.items.empty()) throw ParameterError("train_step: empty dataset");
  if (conds.size() != data.items.size())
    throw ParameterError("train_step: conditioning count mismatch");

  NormalSampler rng(mix_seed(cfg.seed, kTagTrainStep, uint64_t(step)));
  std::map<std::string, Tensor<float>> grads;
  for (const auto& e : model.params.entries) {
    const auto& p = model.params.at(e.name);
    grads.emplace(e.name, Tensor<float>(p.rows, p.cols));
  }

  StepStats stats;
  stats.step = step;
  const int n_items = int(data.items.size());
  for (int b = 0; b < cfg.batch_size; ++b) {
    const int item_idx = stream_index(cfg.seed, step * cfg.batch_size + b, n_items);
    const auto& item = data.items[size_t(item_idx)];
    const auto m0 = tensor_cast<float>(item.motion.frames);
    const int t = int(rng.engine()() % uint64_t(sched.steps));
    Tensor<float> eps(m0.rows, m0.cols);
    fill_normal(eps, rng);
    const Tensor<float> xt = q_sample(m0, t, eps, sched);

    Graph<float> g;
    auto pr = insert_params(g, model, true);
    auto ctx = (modality == Modality::kNone)
                   ? Graph<float>::Ref{}
                   : build_context(g, model, pr, conds[size_t(item_idx)]);
    auto eps_hat = denoiser_forward(g, model, pr, xt, t, ctx);
    const auto terms = total_loss_graph(g, eps_hat, eps, xt, m0, t, sched,
                                        data.skeleton, cfg.loss);

    const double total = double(g.val(terms.total).at(0, 0));
    if (!std::isfinite(total)) {
      const char* which = "loss.total";
      if (!std::isfinite(double(g.val(terms.data).at(0, 0)))) which = "loss.data";
      else if (!std::isfinite(double(g.val(terms.skeleton).at(0, 0)))) which = "loss.skeleton";
      else if (!std::isfinite(double(g.val(terms.symmetry).at(0, 0)))) which = "loss.symmetry";
      else if (!std::isfinite(double(g.val(terms.motion).at(0, 0)))) which = "loss.motion";
      throw NumericalError(std::string("non-finite training loss in ") + which + " at step " +
                           std::to_string(step));
    }
    stats.total += total;
    stats.data += double(g.val(terms.data).at(0, 0));
    stats.skeleton += double(g.val(terms.skeleton).at(0, 0));
    stats.symmetry += double(g.val(terms.symmetry).at(0, 0));
    stats.motion += double(g.val(terms.motion).at(0, 0));

    g.backward(terms.total);
    for (auto& [name, acc] : grads) {
      const Tensor<float> gp = g.grad(pr.at(name));
      for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += gp.v[i];
    }
  }
  const float inv_b = 1.0f / float(cfg.batch_size);
  for (auto& [name, acc] : grads)
    for (auto& x : acc.v) x *= inv_b;
  stats.total /= cfg.batch_size;
  stats.data /= cfg.batch_size;
  stats.skeleton /= cfg.batch_size;
  stats.symmetry /= cfg.batch_size;
  stats.motion /= cfg.batch_size;

  optim.update(model, grads, step + 1);
  stats.lr_eff = optim.last_lr_eff();
  return stats;
}

TrainResult train(Checkpoint& ckpt, const Dataset& data, const TrainConfig& cfg,
                  const std::string& out_dir,
                  const std::function<void(const StepStats&)>& on_stats) {
  cfg.validate();
  if (data.items.empty()) throw ParameterError("train: empty dataset");
  std::filesystem::create_directories(out_dir);

  const Modality modality = ckpt.model.hyper.modality;
  const auto conds =
      prepare_conditioning(data, modality, ckpt.vocab ? &*ckpt.vocab : nullptr);
  const NoiseSchedule sched = ckpt.schedule();

  AdamW optim(ckpt.model, cfg);
  if (ckpt.optim) optim.set_state(*ckpt.optim);

  if (ckpt.vocab) ckpt.vocab->save(out_dir + "/vocab.tsv");

  std::ofstream log(out_dir + "/loss_log.jsonl", std::ios::app);
  if (!log) throw IoError("cannot open loss log in " + out_dir);

  TrainResult result;
  StepStats stats;
  for (int64_t step = ckpt.step; step < cfg.max_steps; ++step) {
    stats = train_step(ckpt.model, optim, data, conds, modality, sched, cfg, step);
    if ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.max_steps) {
      nlohmann::json line = {{"step", step + 1},         {"lr_eff", stats.lr_eff},
                             {"total", stats.total},     {"data", stats.data},
                             {"skeleton", stats.skeleton}, {"symmetry", stats.symmetry},
                             {"motion", stats.motion}};
      log << line.dump() << '\n';
      log.flush();
      if (on_stats) on_stats(stats);
    }
    ckpt.step = step + 1;
    if (cfg.ckpt_every > 0 && (step + 1) % cfg.ckpt_every == 0 && step + 1 < cfg.max_steps) {
      ckpt.optim = optim.state();
      save_checkpoint(out_dir + "/ckpt_" + std::to_string(step + 1) + ".bin", ckpt);
    }
  }
  ckpt.optim = optim.state();
  save_checkpoint(out_dir + "/ckpt_final.bin", ckpt);
  result.final_step = ckpt.step;
  result.last = stats;
  return result;
}

}  // namespace modiff
