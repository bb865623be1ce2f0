#pragma once

#include <string>
#include <utility>
#include <vector>

#include "modiff/tensor.hpp"

namespace modiff {

// Kinematic tree with optional left/right symmetry map. Joint 0 is the root;
// its parent is the sentinel -1. Channels in a motion tensor are grouped as
// (x, y, z) per joint in joint order, so joint j owns columns 3j..3j+2 and the
// root columns carry global translation.
struct Skeleton {
  std::vector<std::string> joint_names;
  std::vector<int> parents;    // parents[0] == -1
  std::vector<int> symmetry;   // involution; symmetry[j] == j for midline joints

  int joint_count() const { return int(parents.size()); }
  int channel_count() const { return 3 * joint_count(); }

  // One bone per non-root joint, ordered by child index: (child, parent).
  std::vector<std::pair<int, int>> bones() const;

  // Symmetric bone pairs (i, j) with i < j, where bone identity follows the
  // child joint; self-symmetric bones are excluded.
  std::vector<std::pair<int, int>> symmetric_bone_pairs() const;

  void validate() const;  // throws ParameterError on malformed trees
};

Skeleton skeleton_toy8();     // 8 joints: root/spine/neck/head + L/R arm + L/R leg
Skeleton skeleton_biped24();  // 24-joint humanoid

struct MotionSequence {
  Tensor<double> frames;  // N x 3J joint positions
  double fps = 0.0;

  int frame_count() const { return frames.rows; }
};

// Per-frame bone lengths, N x B with B = J-1, bone order per Skeleton::bones().
template <typename T>
Tensor<T> bone_lengths(const Tensor<T>& frames, const Skeleton& skel) {
  const int j_count = skel.joint_count();
  if (frames.cols != 3 * j_count)
    throw DimensionError("bone_lengths: frames have " + std::to_string(frames.cols) +
                         " channels, skeleton wants " + std::to_string(3 * j_count));
  const auto bones = skel.bones();
  Tensor<T> out(frames.rows, int(bones.size()));
  for (int n = 0; n < frames.rows; ++n) {
    const T* f = frames.row(n);
    for (size_t b = 0; b < bones.size(); ++b) {
      const int c = bones[b].first * 3, p = bones[b].second * 3;
      // Root channels carry translation, not a position: bones hanging off the
      // root measure against the origin of the root-relative frame.
      const bool root = bones[b].second == 0;
      const T px = root ? T(0) : f[p], py = root ? T(0) : f[p + 1], pz = root ? T(0) : f[p + 2];
      const T dx = f[c] - px, dy = f[c + 1] - py, dz = f[c + 2] - pz;
      out.at(n, int(b)) = std::sqrt(dx * dx + dy * dy + dz * dz);
    }
  }
  return out;
}

// Mean joint speed in m/s: v[n] = fps * mean_j ||p_j[n] - p_j[n-1]|| for n >= 1;
// entry 0 duplicates entry 1 so the vector stays frame-aligned with length N.
std::vector<double> kinetic_velocity(const MotionSequence& motion);

// Frames that are strict local minima of the velocity curve (candidate "stops").
// A beat at frame n means v[n-1] > v[n] < v[n+1] over interior samples.
std::vector<int> kinematic_beats(const std::vector<double>& velocity);

// Reads a motion file; when skel_out is non-null the embedded skeleton
// (names, parents, symmetry) is validated and returned through it.
MotionSequence read_motion_json(const std::string& path, Skeleton* skel_out = nullptr);
void write_motion_json(const std::string& path, const MotionSequence& motion,
                       const Skeleton& skel);

}  // namespace modiff
