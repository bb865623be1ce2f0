#pragma once

#include <string>
#include <vector>

#include "modiff/tensor.hpp"

namespace modiff {

struct WavData {
  int sample_rate = 0;
  std::vector<double> samples;  // mono, in [-1, 1]
};

WavData read_wav(const std::string& path);                    // 16-bit PCM mono
void write_wav(const std::string& path, const WavData& wav);  // 16-bit PCM mono

// Windowed-sinc resampler (Hann-windowed, 32 zero crossings, kernel
// normalized per output sample).
std::vector<double> resample_sinc(const std::vector<double>& x, int sr_in, int sr_out);

struct MelSpec {
  int sample_rate = 16000;
  int n_fft = 1024;  // also the analysis window length
  int hop = 512;
  int bands = 80;
  double fmin = 0.0;
  double fmax = 8000.0;

  void validate() const;
};

// Log-Mel spectrogram, frames x bands. Frames are centered via reflection
// padding; frame count is 1 + floor(len/hop); log is natural with a 1e-10
// power floor.
Tensor<double> mel_spectrogram(const std::vector<double>& samples, const MelSpec& spec);

// Triangular filter center frequencies in Hz (length spec.bands).
std::vector<double> mel_filter_centers_hz(const MelSpec& spec);

// Reads a WAV, resamples to spec.sample_rate if needed, returns the log-Mel map.
Tensor<double> mel_from_file(const std::string& path, const MelSpec& spec);

}  // namespace modiff
