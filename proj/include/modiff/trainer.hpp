#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "modiff/checkpoint.hpp"
#include "modiff/dataset.hpp"
#include "modiff/losses.hpp"

namespace modiff {

struct TrainConfig {
  int max_steps = 2000;
  int batch_size = 8;
  double lr = 5e-4;
  int warmup_steps = 0;  // 0 disables warm-up (factor 1)
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  LossWeights loss;
  int ckpt_every = 500;  // 0 disables intermediate checkpoints
  int log_every = 50;
  uint64_t seed = 0;

  void validate() const;
};

struct StepStats {
  int64_t step = 0;
  double lr_eff = 0.0;
  double total = 0.0, data = 0.0, skeleton = 0.0, symmetry = 0.0, motion = 0.0;
};

// Decoupled-decay Adam with linear warm-up; update arithmetic runs in double
// on the float32 state so resumed runs stay bit-identical.
class AdamW {
 public:
  AdamW(const DenoiserModel<float>& model, const TrainConfig& cfg);

  // k is the 1-based update count (global step + 1).
  void update(DenoiserModel<float>& model,
              const std::map<std::string, Tensor<float>>& grads, int64_t k);

  OptimizerState& state() { return state_; }
  const OptimizerState& state() const { return state_; }
  void set_state(OptimizerState s) { state_ = std::move(s); }
  double last_lr_eff() const { return last_lr_eff_; }

 private:
  TrainConfig cfg_;
  OptimizerState state_;
  double last_lr_eff_ = 0.0;
};

// One optimization step over a mini-batch chosen by the deterministic
// epoch-shuffle stream. Returns averaged loss components.
StepStats train_step(DenoiserModel<float>& model, AdamW& optim, const Dataset& data,
                     const std::vector<ConditionInput>& conds, Modality modality,
                     const NoiseSchedule& sched, const TrainConfig& cfg, int64_t step);

struct TrainResult {
  int64_t final_step = 0;
  StepStats last;
};

// Full loop: precomputes conditioning inputs, steps from ckpt.step to
// cfg.max_steps, writes periodic + final checkpoints and a JSONL loss log.
// on_stats (optional) observes every logged step.
TrainResult train(Checkpoint& ckpt, const Dataset& data, const TrainConfig& cfg,
                  const std::string& out_dir,
                  const std::function<void(const StepStats&)>& on_stats = nullptr);

// Deterministic conditioning pre-pass (mel maps or token ids per item).
std::vector<ConditionInput> prepare_conditioning(const Dataset& data, Modality modality,
                                                 const Vocabulary* vocab);

}  // namespace modiff
