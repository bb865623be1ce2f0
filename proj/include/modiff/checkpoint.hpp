#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "modiff/conditioning.hpp"
#include "modiff/denoiser.hpp"
#include "modiff/diffusion.hpp"
#include "modiff/motion.hpp"

namespace modiff {

// First-moment / second-moment tensors per parameter, stored float32 so a
// resumed run is bit-identical to an uninterrupted one.
struct OptimizerState {
  std::map<std::string, Tensor<float>> m, v;
};

// Everything needed to continue training or to sample: model geometry and
// weights, schedule constants, skeleton, and (optionally) optimizer moments
// and the text vocabulary.
struct Checkpoint {
  DenoiserModel<float> model;
  int schedule_steps = 1000;
  double beta_start = 1e-4, beta_end = 0.02;
  Skeleton skeleton;
  double fps = 0.0;
  int64_t step = 0;
  uint64_t seed = 0;
  std::optional<OptimizerState> optim;
  std::optional<Vocabulary> vocab;

  NoiseSchedule schedule() const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace modiff
