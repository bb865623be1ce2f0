#pragma once

#include "modiff/diffusion.hpp"
#include "modiff/graph.hpp"
#include "modiff/motion.hpp"

namespace modiff {

struct LossWeights {
  double lambda_a = 1.0;  // symmetry weight
  double lambda_m = 1.0;  // clean-motion weight
  bool use_skeleton = true;
  bool use_symmetry = true;
  bool use_motion = true;
};

// Noise-prediction data term: MSE(eps_hat, eps).
template <typename T>
typename Graph<T>::Ref loss_data_graph(Graph<T>& g, typename Graph<T>::Ref eps_hat,
                                       typename Graph<T>::Ref eps) {
  auto d = g.sub(eps_hat, eps);
  return g.mean_all(g.mul(d, d));
}

// Per-frame bone lengths of a frames x channels motion node: frames x bones.
template <typename T>
typename Graph<T>::Ref bone_lengths_graph(Graph<T>& g, typename Graph<T>::Ref frames,
                                          const Skeleton& skel) {
  if (g.val(frames).cols != skel.channel_count())
    throw DimensionError("bone_lengths_graph: channel mismatch");
  std::vector<typename Graph<T>::Ref> cols;
  for (const auto& [child, parent] : skel.bones()) {
    // Root channels carry translation; bones off the root measure the child's
    // root-relative position against the origin.
    auto c = g.slice_cols(frames, 3 * child, 3);
    auto d = parent == 0 ? c : g.sub(c, g.slice_cols(frames, 3 * parent, 3));
    cols.push_back(g.sqrt_elem(g.sum_cols(g.mul(d, d))));
  }
  return cols.size() == 1 ? cols[0] : g.concat_cols(cols);
}

// Mean over bones of the unbiased temporal variance of bone length.
template <typename T>
typename Graph<T>::Ref loss_skeleton_graph(Graph<T>& g, typename Graph<T>::Ref bl) {
  const int n = g.val(bl).rows;
  if (n < 2) throw ParameterError("loss_skeleton: need at least 2 frames");
  auto centered = g.add_row_bias(bl, g.scale(g.mean_rows(bl), -1.0));
  auto msq = g.mean_all(g.mul(centered, centered));
  return g.scale(msq, double(n) / double(n - 1));
}

// RMS of left/right bone-length differences over symmetric pairs and frames.
// Zero (with zero gradient) when the skeleton has no symmetric pairs.
template <typename T>
typename Graph<T>::Ref loss_symmetry_graph(Graph<T>& g, typename Graph<T>::Ref bl,
                                           const Skeleton& skel) {
  const auto pairs = skel.symmetric_bone_pairs();
  if (pairs.empty()) return g.constant(Tensor<T>(1, 1));
  std::vector<int> left, right;
  for (const auto& [a, b] : pairs) {
    left.push_back(a);
    right.push_back(b);
  }
  auto d = g.sub(g.gather_cols(bl, left), g.gather_cols(bl, right));
  return g.sqrt_elem(g.mean_all(g.mul(d, d)));
}

// MSE between the reconstructed clean motion and ground truth.
template <typename T>
typename Graph<T>::Ref loss_motion_graph(Graph<T>& g, typename Graph<T>::Ref m0_hat,
                                         typename Graph<T>::Ref m0) {
  auto d = g.sub(m0_hat, m0);
  return g.mean_all(g.mul(d, d));
}

template <typename T>
struct LossTerms {
  typename Graph<T>::Ref total, data, skeleton, symmetry, motion;
  double abar = 0.0;
};

// Scheduled composite: L = L_da + abar_t * (L_s + lambda_a L_a + lambda_m L_m).
// Kinematic terms act on the clean-motion estimate recovered from eps_hat.
template <typename T>
LossTerms<T> total_loss_graph(Graph<T>& g, typename Graph<T>::Ref eps_hat,
                              const Tensor<T>& eps, const Tensor<T>& xt,
                              const Tensor<T>& m0, int t, const NoiseSchedule& sched,
                              const Skeleton& skel, const LossWeights& w) {
  sched.check_t(t);
  LossTerms<T> terms;
  terms.abar = sched.alpha_bar[size_t(t)];
  terms.data = loss_data_graph(g, eps_hat, g.constant(eps));

  const double ab = terms.abar;
  auto m0_hat = g.scale(
      g.sub(g.constant(xt), g.scale(eps_hat, std::sqrt(1.0 - ab))), 1.0 / std::sqrt(ab));
  const bool any_bone = w.use_skeleton || w.use_symmetry;
  typename Graph<T>::Ref bl;
  if (any_bone) bl = bone_lengths_graph(g, m0_hat, skel);
  terms.skeleton = w.use_skeleton ? loss_skeleton_graph(g, bl) : g.constant(Tensor<T>(1, 1));
  terms.symmetry = w.use_symmetry ? loss_symmetry_graph(g, bl, skel) : g.constant(Tensor<T>(1, 1));
  terms.motion = w.use_motion ? loss_motion_graph(g, m0_hat, g.constant(m0))
                              : g.constant(Tensor<T>(1, 1));

  auto kin = g.add(terms.skeleton, g.add(g.scale(terms.symmetry, w.lambda_a),
                                         g.scale(terms.motion, w.lambda_m)));
  terms.total = g.add(terms.data, g.scale(kin, ab));
  return terms;
}

// Plain scalar versions for monitoring and tests.
double loss_skeleton_plain(const Tensor<double>& bone_len);
double loss_symmetry_plain(const Tensor<double>& bone_len, const Skeleton& skel);

}  // namespace modiff
