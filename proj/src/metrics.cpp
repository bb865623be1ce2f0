#include "modiff/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace modiff {

std::vector<int> music_beats(const Tensor<double>& mel, const MelSpec& spec,
                             double motion_fps) {
  if (!(motion_fps > 0)) throw ParameterError("music_beats: motion fps must be positive");
  if (mel.rows < 3) throw ParameterError("music_beats: need at least 3 mel frames");
  // Onset strength: band-summed positive spectral flux.
  std::vector<double> onset(size_t(mel.rows) - 1, 0.0);
  for (int f = 1; f < mel.rows; ++f) {
    double acc = 0.0;
    for (int b = 0; b < mel.cols; ++b) acc += std::max(0.0, mel.at(f, b) - mel.at(f - 1, b));
    onset[size_t(f) - 1] = acc;
  }
  double mean = 0.0;
  for (double x : onset) mean += x;
  mean /= double(onset.size());
  double var = 0.0;
  for (double x : onset) var += (x - mean) * (x - mean);
  const double thresh = mean + std::sqrt(var / double(onset.size()));

  const double to_motion = double(spec.hop) * motion_fps / double(spec.sample_rate);
  std::vector<int> beats;
  for (size_t i = 1; i + 1 < onset.size(); ++i) {
    if (onset[i] > onset[i - 1] && onset[i] > onset[i + 1] && onset[i] > thresh) {
      // onset[i] measures the rise into mel frame i+1
      const int frame = int(std::lround(double(i + 1) * to_motion));
      if (beats.empty() || frame != beats.back()) beats.push_back(frame);
    }
  }
  return beats;
}

double beat_alignment_score(const std::vector<int>& kinematic, const std::vector<int>& music,
                            double sigma) {
  if (music.empty()) throw ParameterError("beat_alignment_score: no music beats");
  if (!(sigma > 0)) throw ParameterError("beat_alignment_score: sigma must be positive");
  if (kinematic.empty()) return 0.0;
  double acc = 0.0;
  for (int mb : music) {
    double best = std::numeric_limits<double>::infinity();
    for (int kb : kinematic) best = std::min(best, double(kb - mb) * double(kb - mb));
    acc += std::exp(-best / (2.0 * sigma * sigma));
  }
  return acc / double(music.size());
}

std::vector<double> kinetic_features(const MotionSequence& motion) {
  const Tensor<double>& fr = motion.frames;
  if (fr.rows < 3) throw ParameterError("kinetic_features: need at least 3 frames");
  if (fr.cols % 3 != 0) throw DimensionError("kinetic_features: channels not a multiple of 3");
  if (!(motion.fps > 0)) throw ParameterError("kinetic_features: fps must be positive");
  const int j_count = fr.cols / 3;
  const double v_scale = motion.fps * motion.fps;          // (dp * fps)^2
  const double a_scale = v_scale * v_scale;                // (d2p * fps^2)^2
  std::vector<double> out(size_t(2 * j_count), 0.0);
  for (int j = 0; j < j_count; ++j) {
    double vel = 0.0;
    for (int n = 0; n + 1 < fr.rows; ++n) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = fr.at(n + 1, 3 * j + c) - fr.at(n, 3 * j + c);
        s += d * d;
      }
      vel += s;
    }
    out[size_t(j)] = v_scale * vel / double(fr.rows - 1);
    double acc = 0.0;
    for (int n = 0; n + 2 < fr.rows; ++n) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = fr.at(n + 2, 3 * j + c) - 2.0 * fr.at(n + 1, 3 * j + c) +
                         fr.at(n, 3 * j + c);
        s += d * d;
      }
      acc += s;
    }
    out[size_t(j_count + j)] = a_scale * acc / double(fr.rows - 2);
  }
  return out;
}

namespace {

void gaussian_fit(const std::vector<std::vector<double>>& feats, Eigen::VectorXd& mu,
                  Eigen::MatrixXd& cov) {
  const int n = int(feats.size()), d = int(feats[0].size());
  mu = Eigen::VectorXd::Zero(d);
  for (const auto& f : feats)
    for (int i = 0; i < d; ++i) mu[i] += f[size_t(i)];
  mu /= double(n);
  cov = Eigen::MatrixXd::Zero(d, d);
  if (n < 2) return;
  for (const auto& f : feats) {
    Eigen::VectorXd c(d);
    for (int i = 0; i < d; ++i) c[i] = f[size_t(i)] - mu[i];
    cov += c * c.transpose();
  }
  cov /= double(n - 1);
}

}  // namespace

double frechet_distance(const std::vector<std::vector<double>>& a,
                        const std::vector<std::vector<double>>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw ParameterError("frechet_distance: each population needs at least 2 members");
  const size_t d = a[0].size();
  for (const auto& f : a)
    if (f.size() != d) throw DimensionError("frechet_distance: ragged features");
  for (const auto& f : b)
    if (f.size() != d) throw DimensionError("frechet_distance: ragged features");

  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd cov_a, cov_b;
  gaussian_fit(a, mu_a, cov_a);
  gaussian_fit(b, mu_b, cov_b);
  const auto dim = Eigen::Index(d);
  cov_a += 1e-6 * Eigen::MatrixXd::Identity(dim, dim);
  cov_b += 1e-6 * Eigen::MatrixXd::Identity(dim, dim);

  // Tr sqrtm(cov_a cov_b) via the symmetric route: with S = sqrtm(cov_a),
  // the product S cov_b S is symmetric PSD and shares the trace of the
  // geometric-mean term.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_a(cov_a);
  Eigen::VectorXd ev_a = es_a.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd s_a =
      es_a.eigenvectors() * ev_a.cwiseSqrt().asDiagonal() * es_a.eigenvectors().transpose();
  Eigen::MatrixXd inner = s_a * cov_b * s_a;
  inner = 0.5 * (inner + inner.transpose());  // symmetrize against roundoff
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_i(inner);
  const double tr_sqrt = es_i.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double mean_term = (mu_a - mu_b).squaredNorm();
  return mean_term + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
}

double diversity(const std::vector<std::vector<double>>& feats) {
  if (feats.size() < 2) throw ParameterError("diversity: need at least 2 feature vectors");
  const size_t d = feats[0].size();
  double acc = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < feats.size(); ++i) {
    if (feats[i].size() != d) throw DimensionError("diversity: ragged features");
    for (size_t j = i + 1; j < feats.size(); ++j) {
      double s = 0.0;
      for (size_t k = 0; k < d; ++k) {
        const double diff = feats[i][k] - feats[j][k];
        s += diff * diff;
      }
      acc += std::sqrt(s);
      ++pairs;
    }
  }
  return acc / double(pairs);
}

double multi_modality(const std::function<MotionSequence(uint64_t)>& sample_fn,
                      const std::vector<uint64_t>& seeds) {
  if (seeds.size() < 2) throw ParameterError("multi_modality: need at least 2 seeds");
  std::vector<std::vector<double>> feats;
  feats.reserve(seeds.size());
  for (uint64_t s : seeds) feats.push_back(kinetic_features(sample_fn(s)));
  return diversity(feats);
}

}  // namespace modiff
