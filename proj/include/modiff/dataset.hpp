#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modiff/conditioning.hpp"
#include "modiff/motion.hpp"

namespace modiff {

// Generation recipe for the synthetic beat-locked corpus. Every sequence
// shares the beat grid (period fps/beat_hz frames, which must be integral);
// amplitudes, directions, click timbre, and captions vary per sequence.
struct SyntheticSpec {
  int n_sequences = 8;
  double seconds = 2.0;
  double fps = 20.0;
  double beat_hz = 2.0;
  std::string skeleton = "toy8";  // "toy8" or "biped24"
  int sample_rate = 16000;
  uint64_t seed = 0;

  void validate() const;
  int frame_count() const { return int(fps * seconds + 0.5); }
  int beat_period_frames() const { return int(fps / beat_hz + 0.5); }
};

// Writes seq_%04d.motion.json / .wav / .txt plus manifest.json into dir.
// Same spec (including seed) -> byte-identical files.
void gen_data(const std::string& dir, const SyntheticSpec& spec);

struct DatasetItem {
  MotionSequence motion;
  std::string audio_path;
  std::string caption;
};

struct Dataset {
  Skeleton skeleton;
  double fps = 0.0;
  std::vector<DatasetItem> items;
};

Dataset load_dataset(const std::string& dir);

}  // namespace modiff
