#pragma once

#include <cstdint>
#include <optional>

#include "modiff/conditioning.hpp"
#include "modiff/denoiser.hpp"
#include "modiff/diffusion.hpp"

namespace modiff {

// RNG stream tags for the sampling loops; pinned so trajectories are a pure
// function of (seed, step).
namespace rng_tag {
constexpr uint64_t kSampleInit = 0x73616d70;   // initial noise
constexpr uint64_t kSampleStep = 0x73746570;   // per-step reverse noise
constexpr uint64_t kMaskNoise = 0x6d61736b;    // per-step seed re-diffusion
}  // namespace rng_tag

// Ancestral sampling: start from standard normal, run the reverse chain
// t = steps-1 .. 0. Deterministic given (model, cond, n_frames, seed).
template <typename T>
Tensor<T> sample(const DenoiserModel<T>& model, const ConditionInput& cond, int n_frames,
                 const NoiseSchedule& sched, uint64_t seed) {
  if (n_frames < 1) throw ParameterError("sample: need at least one frame");
  Tensor<T> x(n_frames, model.hyper.input_channels);
  {
    NormalSampler init(mix_seed(seed, rng_tag::kSampleInit));
    fill_normal(x, init);
  }
  for (int t = sched.steps - 1; t >= 0; --t) {
    Graph<T> g;
    auto pr = insert_params(g, model, false);
    auto ctx = build_context(g, model, pr, cond);
    const Tensor<T> eps_hat = g.val(denoiser_forward(g, model, pr, x, t, ctx));
    Tensor<T> noise(n_frames, model.hyper.input_channels);
    if (t > 0) {
      NormalSampler step_rng(mix_seed(seed, rng_tag::kSampleStep, uint64_t(t)));
      fill_normal(noise, step_rng);
    }
    x = reverse_step(x, t, eps_hat, noise, sched);
  }
  return x;
}

// Mask-conditioned sampling: at every step the kept frames are replaced by a
// fresh forward-diffusion of the seed motion at the current noise level; after
// the last step kept frames are set to the seed exactly.
template <typename T>
Tensor<T> masked_sample(const DenoiserModel<T>& model, const ConditionInput& cond,
                        const Tensor<T>& seed_motion, const FrameMask& mask,
                        const NoiseSchedule& sched, uint64_t seed) {
  const int n = seed_motion.rows;
  if (n < 1) throw ParameterError("masked_sample: empty seed motion");
  if (mask.size() != n) throw DimensionError("masked_sample: mask/seed length mismatch");
  if (seed_motion.cols != model.hyper.input_channels)
    throw DimensionError("masked_sample: seed motion channel mismatch");
  Tensor<T> x(n, model.hyper.input_channels);
  {
    NormalSampler init(mix_seed(seed, rng_tag::kSampleInit));
    fill_normal(x, init);
  }
  for (int t = sched.steps - 1; t >= 0; --t) {
    if (mask.any()) {
      NormalSampler mask_rng(mix_seed(seed, rng_tag::kMaskNoise, uint64_t(t)));
      Tensor<T> eps(n, x.cols);
      for (int r = 0; r < n; ++r)
        if (mask.keep[size_t(r)])
          for (int c = 0; c < x.cols; ++c) eps.at(r, c) = T(mask_rng.next());
      const Tensor<T> diffused = q_sample(seed_motion, t, eps, sched);
      for (int r = 0; r < n; ++r)
        if (mask.keep[size_t(r)])
          for (int c = 0; c < x.cols; ++c) x.at(r, c) = diffused.at(r, c);
    }
    Graph<T> g;
    auto pr = insert_params(g, model, false);
    auto ctx = build_context(g, model, pr, cond);
    const Tensor<T> eps_hat = g.val(denoiser_forward(g, model, pr, x, t, ctx));
    Tensor<T> noise(n, x.cols);
    if (t > 0) {
      NormalSampler step_rng(mix_seed(seed, rng_tag::kSampleStep, uint64_t(t)));
      fill_normal(noise, step_rng);
    }
    x = reverse_step(x, t, eps_hat, noise, sched);
  }
  for (int r = 0; r < n; ++r)
    if (mask.keep[size_t(r)])
      for (int c = 0; c < x.cols; ++c) x.at(r, c) = seed_motion.at(r, c);
  return x;
}

}  // namespace modiff
