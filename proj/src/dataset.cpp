#include "modiff/dataset.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "modiff/audio.hpp"
#include "modiff/rng.hpp"

namespace modiff {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr uint64_t kTagData = 0x64617461;

struct Preset {
  Skeleton skel;
  std::vector<double> rest;  // 3J absolute joint positions
};

Preset preset_for(const std::string& name) {
  Preset p;
  if (name == "toy8") {
    p.skel = skeleton_toy8();
    p.rest = {0.0, 1.0,  0.0,   // root
              0.0, 1.5,  0.0,   // spine
              0.0, 1.9,  0.0,   // neck
              0.0, 2.15, 0.0,   // head
              0.5, 1.8,  0.0,   // l_arm
              -0.5, 1.8, 0.0,   // r_arm
              0.25, 0.4, 0.0,   // l_leg
              -0.25, 0.4, 0.0}; // r_leg
  } else if (name == "biped24") {
    p.skel = skeleton_biped24();
    p.rest = {
        0.0,   1.0,  0.0,    // root
        0.12,  0.95, 0.0,    // l_hip
        -0.12, 0.95, 0.0,    // r_hip
        0.0,   1.15, 0.0,    // spine1
        0.13,  0.55, 0.0,    // l_knee
        -0.13, 0.55, 0.0,    // r_knee
        0.0,   1.3,  0.0,    // spine2
        0.14,  0.15, 0.0,    // l_ankle
        -0.14, 0.15, 0.0,    // r_ankle
        0.0,   1.45, 0.0,    // spine3
        0.15,  0.05, 0.12,   // l_foot
        -0.15, 0.05, 0.12,   // r_foot
        0.0,   1.6,  0.0,    // neck
        0.1,   1.55, 0.0,    // l_collar
        -0.1,  1.55, 0.0,    // r_collar
        0.0,   1.75, 0.0,    // head
        0.22,  1.55, 0.0,    // l_shoulder
        -0.22, 1.55, 0.0,    // r_shoulder
        0.28,  1.28, 0.0,    // l_elbow
        -0.28, 1.28, 0.0,    // r_elbow
        0.3,   1.02, 0.0,    // l_wrist
        -0.3,  1.02, 0.0,    // r_wrist
        0.31,  0.92, 0.02,   // l_hand
        -0.31, 0.92, 0.02};  // r_hand
  } else {
    throw ParameterError("unknown skeleton preset: " + name);
  }
  return p;
}

std::array<double, 3> random_unit(NormalSampler& rng) {
  while (true) {
    const double x = rng.next(), y = rng.next(), z = rng.next();
    const double n = std::sqrt(x * x + y * y + z * z);
    if (n > 1e-6) return {x / n, y / n, z / n};
  }
}

// Rodrigues rotation of v around unit axis u.
std::array<double, 3> rotate(const std::array<double, 3>& v, const std::array<double, 3>& u,
                             double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
  const std::array<double, 3> cross = {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
                                       u[0] * v[1] - u[1] * v[0]};
  std::array<double, 3> out;
  for (int i = 0; i < 3; ++i) out[size_t(i)] = v[size_t(i)] * c + cross[size_t(i)] * s + u[size_t(i)] * dot * (1.0 - c);
  return out;
}

std::string caption_for(const SyntheticSpec& spec, int s, double mean_amp) {
  static const std::array<const char*, 8> dirs = {"leftward", "rightward", "forward",
                                                  "backward", "upward",   "downward",
                                                  "inward",   "outward"};
  static const std::array<const char*, 8> flavors = {"gentle", "sharp", "loose", "tight",
                                                     "light",  "heavy", "smooth", "jerky"};
  const char* verb = mean_amp < 0.33 ? "sways" : (mean_amp < 0.42 ? "rocks" : "swings");
  const char* tempo = spec.beat_hz < 1.5 ? "slowly" : (spec.beat_hz < 3.0 ? "steadily" : "briskly");
  std::string cap = "a figure ";
  cap += verb;
  cap += " ";
  cap += tempo;
  cap += " ";
  cap += dirs[size_t(s) % dirs.size()];
  cap += " with ";
  cap += flavors[(size_t(s) / dirs.size()) % flavors.size()];
  cap += " accents";
  return cap;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_sequences < 0) throw ParameterError("n_sequences must be non-negative");
  if (!(seconds > 0) || !(fps > 0) || !(beat_hz > 0))
    throw ParameterError("seconds, fps, and beat_hz must be positive");
  if (sample_rate < 4000) throw ParameterError("sample_rate must be at least 4000");
  const double frames = fps * seconds;
  if (std::abs(frames - std::round(frames)) > 1e-9)
    throw ParameterError("fps * seconds must be an integral frame count");
  const double period = fps / beat_hz;
  if (std::abs(period - std::round(period)) > 1e-9 || std::round(period) < 2)
    throw ParameterError("fps / beat_hz must be an integral beat period >= 2 frames");
  if (frame_count() < 4) throw ParameterError("sequence too short (need >= 4 frames)");
  preset_for(skeleton);
}

void gen_data(const std::string& dir, const SyntheticSpec& spec) {
  spec.validate();
  std::filesystem::create_directories(dir);
  const Preset preset = preset_for(spec.skeleton);
  const int j_count = preset.skel.joint_count();
  const int n_frames = spec.frame_count();
  const int period = spec.beat_period_frames();

  nlohmann::json files = nlohmann::json::array();
  for (int s = 0; s < spec.n_sequences; ++s) {
    NormalSampler rng(mix_seed(spec.seed, kTagData, uint64_t(s)));

    // Per-joint rotation axis and amplitude; one shared oscillation phase so
    // every joint stops on the beat frame exactly.
    std::vector<std::array<double, 3>> axes(static_cast<size_t>(j_count));
    std::vector<double> amps(static_cast<size_t>(j_count));
    double amp_acc = 0.0;
    for (int j = 0; j < j_count; ++j) {
      axes[size_t(j)] = random_unit(rng);
      amps[size_t(j)] = 0.2 + 0.4 * rng.uniform_open();
      amp_acc += amps[size_t(j)];
    }
    const std::array<double, 3> root_off = {0.8 * (2.0 * rng.uniform_open() - 1.0), 0.0,
                                            0.8 * (2.0 * rng.uniform_open() - 1.0)};
    const std::array<double, 3> drift = {0.01 * (2.0 * rng.uniform_open() - 1.0), 0.0,
                                         0.01 * (2.0 * rng.uniform_open() - 1.0)};
    const double root_amp = 0.05 + 0.05 * rng.uniform_open();
    const std::array<double, 3> root_dir = random_unit(rng);

    MotionSequence motion;
    motion.fps = spec.fps;
    motion.frames = Tensor<double>(n_frames, 3 * j_count);
    for (int n = 0; n < n_frames; ++n) {
      const double phase = std::cos(kPi * (double(n) + 0.25) / double(period));
      double* f = motion.frames.row(n);
      // Root: rest + static offset + linear drift + small shared-phase sway.
      for (int c = 0; c < 3; ++c)
        f[c] = preset.rest[size_t(c)] + root_off[size_t(c)] + drift[size_t(c)] * n +
               root_amp * phase * root_dir[size_t(c)];
      // Children (root-relative): rotate the rest bone about the joint axis by
      // a phase-locked angle and chain from the parent's relative position, so
      // bone lengths stay exact and the root translation never leaks in.
      for (int j = 1; j < j_count; ++j) {
        const int p = preset.skel.parents[size_t(j)];
        const std::array<double, 3> bone = {
            preset.rest[size_t(3 * j)] - preset.rest[size_t(3 * p)],
            preset.rest[size_t(3 * j + 1)] - preset.rest[size_t(3 * p + 1)],
            preset.rest[size_t(3 * j + 2)] - preset.rest[size_t(3 * p + 2)]};
        const auto r = rotate(bone, axes[size_t(j)], amps[size_t(j)] * phase);
        for (int c = 0; c < 3; ++c)
          f[3 * j + c] = (p == 0 ? 0.0 : f[3 * p + c]) + r[size_t(c)];
      }
    }

    // Click track: one short decaying tone burst per beat frame; the carrier
    // frequency is sequence-specific so audio identifies the sequence.
    WavData wav;
    wav.sample_rate = spec.sample_rate;
    wav.samples.assign(size_t(std::llround(spec.seconds * spec.sample_rate)), 0.0);
    const double carrier = 600.0 + 150.0 * double(s % 20);
    const int click_len = std::min(int(wav.samples.size()), spec.sample_rate / 40);
    for (int k = 0; k * period < n_frames; ++k) {
      const auto start = size_t(std::llround(double(k) * period / spec.fps * spec.sample_rate));
      for (int i = 0; i < click_len && start + size_t(i) < wav.samples.size(); ++i) {
        const double env = std::exp(-5.0 * double(i) / double(click_len));
        wav.samples[start + size_t(i)] +=
            0.6 * env * std::sin(2.0 * kPi * carrier * double(i) / spec.sample_rate);
      }
    }

    char stem[32];
    std::snprintf(stem, sizeof stem, "seq_%04d", s);
    const std::string motion_name = std::string(stem) + ".motion.json";
    const std::string wav_name = std::string(stem) + ".wav";
    const std::string txt_name = std::string(stem) + ".txt";
    write_motion_json(dir + "/" + motion_name, motion, preset.skel);
    write_wav(dir + "/" + wav_name, wav);
    {
      std::ofstream txt(dir + "/" + txt_name, std::ios::binary);
      if (!txt) throw IoError("cannot write caption: " + txt_name);
      txt << caption_for(spec, s, amp_acc / j_count) << '\n';
    }
    files.push_back({{"motion", motion_name}, {"audio", wav_name}, {"caption", txt_name}});
  }

  nlohmann::json manifest = {{"n_sequences", spec.n_sequences},
                             {"seconds", spec.seconds},
                             {"fps", spec.fps},
                             {"beat_hz", spec.beat_hz},
                             {"skeleton", spec.skeleton},
                             {"sample_rate", spec.sample_rate},
                             {"seed", std::to_string(spec.seed)},
                             {"files", files}};
  std::ofstream mf(dir + "/manifest.json", std::ios::binary);
  if (!mf) throw IoError("cannot write manifest in " + dir);
  mf << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.json");
  if (!mf) throw IoError("no manifest.json in " + dir);
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest: " + std::string(e.what()));
  }
  Dataset data;
  bool first = true;
  for (const auto& entry : manifest.at("files")) {
    DatasetItem item;
    Skeleton skel;
    item.motion = read_motion_json(dir + "/" + entry.at("motion").get<std::string>(), &skel);
    if (entry.contains("audio")) item.audio_path = dir + "/" + entry.at("audio").get<std::string>();
    if (entry.contains("caption")) {
      std::ifstream txt(dir + "/" + entry.at("caption").get<std::string>());
      if (!txt) throw IoError("cannot open caption file for " + entry.dump());
      std::getline(txt, item.caption);
    }
    if (first) {
      data.skeleton = skel;
      data.fps = item.motion.fps;
      first = false;
    } else {
      if (skel.parents != data.skeleton.parents || skel.symmetry != data.skeleton.symmetry)
        throw ParameterError("dataset mixes skeletons");
      if (item.motion.fps != data.fps) throw ParameterError("dataset mixes frame rates");
    }
    data.items.push_back(std::move(item));
  }
  return data;
}

}  // namespace modiff
