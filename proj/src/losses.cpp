#include "modiff/losses.hpp"

#include "modiff/diffusion.hpp"

namespace modiff {

NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 2) throw ParameterError("schedule needs at least 2 steps");
  if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end)
    throw ParameterError("schedule needs 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.steps = steps;
  s.beta.resize(size_t(steps));
  s.alpha.resize(size_t(steps));
  s.alpha_bar.resize(size_t(steps));
  double prod = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double b = beta_start + (beta_end - beta_start) * double(t) / double(steps - 1);
    s.beta[size_t(t)] = b;
    s.alpha[size_t(t)] = 1.0 - b;
    prod *= s.alpha[size_t(t)];
    s.alpha_bar[size_t(t)] = prod;
  }
  return s;
}

bool FrameMask::any() const {
  for (bool b : keep)
    if (b) return true;
  return false;
}

FrameMask FrameMask::none(int n) {
  if (n < 1) throw ParameterError("mask length must be positive");
  FrameMask m;
  m.keep.assign(size_t(n), false);
  return m;
}

FrameMask FrameMask::prefix(int n, int s) {
  if (n < 1) throw ParameterError("mask length must be positive");
  if (s < 0 || s > n) throw ParameterError("prefix length out of range");
  FrameMask m;
  m.keep.assign(size_t(n), false);
  for (int i = 0; i < s; ++i) m.keep[size_t(i)] = true;
  return m;
}

FrameMask FrameMask::keyframes(int n, const std::vector<int>& frames) {
  if (n < 1) throw ParameterError("mask length must be positive");
  FrameMask m;
  m.keep.assign(size_t(n), false);
  for (int f : frames) {
    if (f < 0 || f >= n) throw ParameterError("keyframe index out of range");
    m.keep[size_t(f)] = true;
  }
  return m;
}

double loss_skeleton_plain(const Tensor<double>& bone_len) {
  const int n = bone_len.rows, b_count = bone_len.cols;
  if (n < 2) throw ParameterError("loss_skeleton: need at least 2 frames");
  double acc = 0.0;
  for (int b = 0; b < b_count; ++b) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += bone_len.at(i, b);
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = bone_len.at(i, b) - mean;
      var += d * d;
    }
    acc += var / (n - 1);
  }
  return acc / b_count;
}

double loss_symmetry_plain(const Tensor<double>& bone_len, const Skeleton& skel) {
  const auto pairs = skel.symmetric_bone_pairs();
  if (pairs.empty()) return 0.0;
  double acc = 0.0;
  for (int i = 0; i < bone_len.rows; ++i)
    for (const auto& [a, b] : pairs) {
      const double d = bone_len.at(i, a) - bone_len.at(i, b);
      acc += d * d;
    }
  return std::sqrt(acc / (double(bone_len.rows) * double(pairs.size())));
}

}  // namespace modiff
