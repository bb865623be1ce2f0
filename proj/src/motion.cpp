#include "modiff/motion.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace modiff {

std::vector<std::pair<int, int>> Skeleton::bones() const {
  std::vector<std::pair<int, int>> out;
  for (int j = 1; j < joint_count(); ++j) out.emplace_back(j, parents[j]);
  return out;
}

std::vector<std::pair<int, int>> Skeleton::symmetric_bone_pairs() const {
  // Bone b is identified by its child joint (index b+1 in joint space).
  std::vector<std::pair<int, int>> out;
  for (int j = 1; j < joint_count(); ++j) {
    const int m = symmetry[j];
    if (m > j && m >= 1) out.emplace_back(j - 1, m - 1);
  }
  return out;
}

void Skeleton::validate() const {
  const int j_count = joint_count();
  if (j_count < 2) throw ParameterError("skeleton needs at least 2 joints");
  if (int(joint_names.size()) != j_count || int(symmetry.size()) != j_count)
    throw ParameterError("skeleton field lengths disagree");
  if (parents[0] != -1) throw ParameterError("joint 0 must be the root (parent -1)");
  for (int j = 1; j < j_count; ++j) {
    if (parents[j] < 0 || parents[j] >= j_count || parents[j] == j)
      throw ParameterError("joint " + std::to_string(j) + " has invalid parent");
  }
  // Acyclic: walking up from any joint must reach the root within J steps.
  for (int j = 1; j < j_count; ++j) {
    int cur = j, hops = 0;
    while (cur != 0) {
      cur = parents[cur];
      if (cur < 0 || ++hops > j_count) throw ParameterError("skeleton parent graph has a cycle");
    }
  }
  for (int j = 0; j < j_count; ++j) {
    const int m = symmetry[j];
    if (m < 0 || m >= j_count || symmetry[m] != j)
      throw ParameterError("symmetry map is not an involution");
  }
}

Skeleton skeleton_toy8() {
  Skeleton s;
  s.joint_names = {"root", "spine", "neck", "head", "l_arm", "r_arm", "l_leg", "r_leg"};
  s.parents = {-1, 0, 1, 2, 2, 2, 0, 0};
  s.symmetry = {0, 1, 2, 3, 5, 4, 7, 6};
  s.validate();
  return s;
}

Skeleton skeleton_biped24() {
  Skeleton s;
  s.joint_names = {"root",       "l_hip",      "r_hip",      "spine1",    "l_knee",
                   "r_knee",     "spine2",     "l_ankle",    "r_ankle",   "spine3",
                   "l_foot",     "r_foot",     "neck",       "l_collar",  "r_collar",
                   "head",       "l_shoulder", "r_shoulder", "l_elbow",   "r_elbow",
                   "l_wrist",    "r_wrist",    "l_hand",     "r_hand"};
  s.parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
  s.symmetry = {0, 2, 1, 3, 5, 4, 6, 8, 7, 9, 11, 10, 12, 14, 13, 15, 17, 16, 19, 18, 21, 20, 23, 22};
  s.validate();
  return s;
}

std::vector<double> kinetic_velocity(const MotionSequence& motion) {
  const Tensor<double>& frames = motion.frames;
  if (frames.rows < 2) throw ParameterError("kinetic_velocity: need at least 2 frames");
  if (frames.cols % 3 != 0)
    throw DimensionError("kinetic_velocity: channels not a multiple of 3");
  const int j_count = frames.cols / 3;
  std::vector<double> v(static_cast<size_t>(frames.rows), 0.0);
  for (int n = 1; n < frames.rows; ++n) {
    const double* a = frames.row(n - 1);
    const double* b = frames.row(n);
    double acc = 0.0;
    for (int j = 0; j < j_count; ++j) {
      const double dx = b[3 * j] - a[3 * j];
      const double dy = b[3 * j + 1] - a[3 * j + 1];
      const double dz = b[3 * j + 2] - a[3 * j + 2];
      acc += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    v[size_t(n)] = acc * motion.fps / j_count;
  }
  v[0] = v[1];
  return v;
}

std::vector<int> kinematic_beats(const std::vector<double>& velocity) {
  if (velocity.size() < 3) throw ParameterError("kinematic_beats: need at least 3 entries");
  std::vector<int> beats;
  for (size_t i = 1; i + 1 < velocity.size(); ++i)
    if (velocity[i] < velocity[i - 1] && velocity[i] < velocity[i + 1]) beats.push_back(int(i));
  return beats;
}

MotionSequence read_motion_json(const std::string& path, Skeleton* skel_out) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open motion file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed motion JSON in " + path + ": " + e.what());
  }
  for (const char* key : {"fps", "joint_count", "joint_names", "parents", "symmetry", "frames"})
    if (!j.contains(key)) throw IoError("motion JSON missing field '" + std::string(key) + "'");
  MotionSequence m;
  try {
    m.fps = j["fps"].get<double>();
    if (!(m.fps > 0)) throw ParameterError("motion fps must be positive");
    const int j_count = j["joint_count"].get<int>();
    if (j_count < 1) throw ParameterError("joint_count must be positive");
    if (skel_out) {
      skel_out->joint_names = j["joint_names"].get<std::vector<std::string>>();
      skel_out->parents = j["parents"].get<std::vector<int>>();
      skel_out->symmetry = j["symmetry"].get<std::vector<int>>();
      if (skel_out->joint_count() != j_count)
        throw ParameterError("joint_count disagrees with parents length");
      skel_out->validate();
    }
    const auto& fr = j["frames"];
    if (!fr.is_array()) throw IoError("frames must be an array");
    m.frames = Tensor<double>(int(fr.size()), 3 * j_count);
    for (size_t n = 0; n < fr.size(); ++n) {
      if (!fr[n].is_array() || int(fr[n].size()) != 3 * j_count)
        throw DimensionError("frame " + std::to_string(n) + " has wrong channel count");
      for (int c = 0; c < 3 * j_count; ++c) m.frames.at(int(n), c) = fr[n][c].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed motion JSON in " + path + ": " + e.what());
  }
  return m;
}

// Hand-rolled writer: field order is pinned and floats carry 17 significant
// digits so a re-read reproduces every value bit-exactly.
void write_motion_json(const std::string& path, const MotionSequence& motion,
                       const Skeleton& skel) {
  skel.validate();
  if (motion.frames.cols != skel.channel_count())
    throw DimensionError("write_motion_json: frames do not match skeleton channels");
  std::ostringstream out;
  char buf[64];
  out << "{\n  \"fps\": ";
  std::snprintf(buf, sizeof buf, "%.17g", motion.fps);
  out << buf << ",\n  \"joint_count\": " << skel.joint_count() << ",\n  \"joint_names\": [";
  for (int i = 0; i < skel.joint_count(); ++i)
    out << (i ? ", " : "") << nlohmann::json(skel.joint_names[size_t(i)]).dump();
  out << "],\n  \"parents\": [";
  for (int i = 0; i < skel.joint_count(); ++i) out << (i ? ", " : "") << skel.parents[size_t(i)];
  out << "],\n  \"symmetry\": [";
  for (int i = 0; i < skel.joint_count(); ++i) out << (i ? ", " : "") << skel.symmetry[size_t(i)];
  out << "],\n  \"frames\": [";
  for (int n = 0; n < motion.frames.rows; ++n) {
    out << (n ? ",\n    [" : "\n    [");
    for (int c = 0; c < motion.frames.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", motion.frames.at(n, c));
      out << (c ? ", " : "") << buf;
    }
    out << "]";
  }
  out << "\n  ]\n}\n";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write motion file: " + path);
  f << out.str();
}

}  // namespace modiff
