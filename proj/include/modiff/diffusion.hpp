#pragma once

#include <cstdint>
#include <vector>

#include "modiff/rng.hpp"
#include "modiff/tensor.hpp"

namespace modiff {

// Linear-beta noise schedule with cached per-step constants. Timesteps are
// zero-indexed: t = 0 is the least-noised step, t = steps-1 the most.
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> beta;       // beta_t
  std::vector<double> alpha;      // 1 - beta_t
  std::vector<double> alpha_bar;  // prod_{s<=t} alpha_s

  void check_t(int t) const {
    if (t < 0 || t >= steps) throw ParameterError("timestep out of range");
  }
};

NoiseSchedule linear_schedule(int steps = 1000, double beta_start = 1e-4,
                              double beta_end = 0.02);

// Closed-form forward diffusion: x_t = sqrt(abar_t) m0 + sqrt(1-abar_t) eps.
template <typename T>
Tensor<T> q_sample(const Tensor<T>& m0, int t, const Tensor<T>& eps,
                   const NoiseSchedule& sched) {
  sched.check_t(t);
  if (!m0.same_shape(eps)) throw DimensionError("q_sample: m0/eps shape mismatch");
  const double ab = sched.alpha_bar[size_t(t)];
  const T a = T(std::sqrt(ab)), b = T(std::sqrt(1.0 - ab));
  Tensor<T> out(m0.rows, m0.cols);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a * m0.v[i] + b * eps.v[i];
  return out;
}

// Inverts the forward closed form from a noise estimate:
// m0_hat = (x_t - sqrt(1-abar_t) eps_hat) / sqrt(abar_t).
template <typename T>
Tensor<T> estimate_m0(const Tensor<T>& xt, int t, const Tensor<T>& eps_hat,
                      const NoiseSchedule& sched) {
  sched.check_t(t);
  if (!xt.same_shape(eps_hat)) throw DimensionError("estimate_m0: shape mismatch");
  const double ab = sched.alpha_bar[size_t(t)];
  const T inv = T(1.0 / std::sqrt(ab)), b = T(std::sqrt(1.0 - ab));
  Tensor<T> out(xt.rows, xt.cols);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = inv * (xt.v[i] - b * eps_hat.v[i]);
  return out;
}

// One ancestral reverse step x_t -> x_{t-1} with the posterior variance
// beta_tilde_t = beta_t (1-abar_{t-1}) / (1-abar_t); sigma is 0 at t = 0.
template <typename T>
Tensor<T> reverse_step(const Tensor<T>& xt, int t, const Tensor<T>& eps_hat,
                       const Tensor<T>& noise, const NoiseSchedule& sched) {
  sched.check_t(t);
  if (!xt.same_shape(eps_hat) || !xt.same_shape(noise))
    throw DimensionError("reverse_step: shape mismatch");
  const double a = sched.alpha[size_t(t)];
  const double ab = sched.alpha_bar[size_t(t)];
  const double mean_x = 1.0 / std::sqrt(a);
  const double mean_e = -sched.beta[size_t(t)] / (std::sqrt(a) * std::sqrt(1.0 - ab));
  double sigma = 0.0;
  if (t > 0) {
    const double ab_prev = sched.alpha_bar[size_t(t) - 1];
    sigma = std::sqrt(sched.beta[size_t(t)] * (1.0 - ab_prev) / (1.0 - ab));
  }
  const T mx = T(mean_x), me = T(mean_e), s = T(sigma);
  Tensor<T> out(xt.rows, xt.cols);
  for (size_t i = 0; i < out.v.size(); ++i)
    out.v[i] = mx * xt.v[i] + me * eps_hat.v[i] + s * noise.v[i];
  return out;
}

// Per-frame binary mask for conditioned sampling; true = frame is pinned to
// the seed motion, false = frame is synthesized.
struct FrameMask {
  std::vector<bool> keep;

  int size() const { return int(keep.size()); }
  bool any() const;
  static FrameMask none(int n);
  static FrameMask prefix(int n, int s);               // first s frames kept
  static FrameMask keyframes(int n, const std::vector<int>& frames);
};

}  // namespace modiff
