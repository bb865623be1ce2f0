#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "modiff/audio.hpp"
#include "modiff/motion.hpp"
#include "modiff/tensor.hpp"

namespace modiff {

// Beat frames (in motion-frame units) detected from a log-Mel map: onset
// strength is the band-summed positive first difference; beats are strict
// local maxima above mean + 1 stddev, converted to motion frames via the
// fps ratio.
std::vector<int> music_beats(const Tensor<double>& mel, const MelSpec& spec, double motion_fps);

// Mean over music beats of exp(-d^2 / (2 sigma^2)), d = distance (in frames)
// to the nearest kinematic beat. Empty kinematic set scores 0; empty music
// set is a parameter error.
double beat_alignment_score(const std::vector<int>& kinematic, const std::vector<int>& music,
                            double sigma = 3.0);

// Per-joint mean squared velocity and acceleration magnitudes: a 2J vector.
std::vector<double> kinetic_features(const MotionSequence& motion);

// Frechet distance between Gaussian fits of two feature populations.
double frechet_distance(const std::vector<std::vector<double>>& a,
                        const std::vector<std::vector<double>>& b);

// Mean pairwise Euclidean distance between feature vectors.
double diversity(const std::vector<std::vector<double>>& feats);

// Diversity of the kinetic features of one motion sampled per seed, all
// sharing the same context. sample_fn maps a seed to the sampled motion.
double multi_modality(const std::function<MotionSequence(uint64_t)>& sample_fn,
                      const std::vector<uint64_t>& seeds);

}  // namespace modiff
