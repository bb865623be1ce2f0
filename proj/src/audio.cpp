#include "modiff/audio.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <fftw3.h>

namespace modiff {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return uint16_t(uint32_t(b[0]) | uint32_t(b[1]) << 8);
}

void write_u32(std::ostream& out, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u16(std::ostream& out, uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

// Reflection index without edge repetition (period 2(n-1)).
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path);
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw IoError("not a RIFF file: " + path);
  read_u32(in);  // riff size
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw IoError("not a WAVE file: " + path);

  WavData wav;
  int channels = 0, bits = 0;
  uint16_t fmt = 0;
  bool have_fmt = false;
  while (in.read(tag, 4)) {
    const uint32_t chunk_size = read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      fmt = read_u16(in);
      channels = read_u16(in);
      wav.sample_rate = int(read_u32(in));
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
      const bool pcm16 = fmt == 1 && bits == 16;
      const bool f32 = fmt == 3 && bits == 32;
      if (!pcm16 && !f32) throw IoError("wav must be 16-bit PCM or 32-bit float: " + path);
      if (channels < 1) throw IoError("wav has no channels: " + path);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw IoError("wav data chunk before fmt: " + path);
      const size_t bytes_per = size_t(bits) / 8;
      const size_t frames = chunk_size / (bytes_per * size_t(channels));
      std::vector<char> raw(chunk_size);
      in.read(raw.data(), std::streamsize(chunk_size));
      if (!in) throw IoError("truncated wav data: " + path);
      wav.samples.resize(frames);
      for (size_t i = 0; i < frames; ++i) {
        double acc = 0.0;  // multi-channel input averages to mono
        for (size_t ch = 0; ch < size_t(channels); ++ch) {
          const char* p = raw.data() + (i * size_t(channels) + ch) * bytes_per;
          if (fmt == 1) {
            const int16_t s =
                int16_t(uint16_t(uint8_t(p[0])) | (uint16_t(uint8_t(p[1])) << 8));
            acc += double(s) / 32768.0;
          } else {
            uint32_t u = uint32_t(uint8_t(p[0])) | uint32_t(uint8_t(p[1])) << 8 |
                         uint32_t(uint8_t(p[2])) << 16 | uint32_t(uint8_t(p[3])) << 24;
            float f;
            std::memcpy(&f, &u, 4);
            acc += double(f);
          }
        }
        wav.samples[i] = acc / double(channels);
      }
      return wav;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw IoError("wav file has no data chunk: " + path);
}

void write_wav(const std::string& path, const WavData& wav) {
  if (wav.sample_rate < 1) throw ParameterError("wav sample rate must be positive");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write wav file: " + path);
  const uint32_t data_bytes = uint32_t(wav.samples.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, uint32_t(wav.sample_rate));
  write_u32(out, uint32_t(wav.sample_rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (double x : wav.samples) {
    const double c = std::clamp(x, -1.0, 1.0);
    const auto s = int16_t(std::lround(c * 32767.0));
    write_u16(out, uint16_t(s));
  }
  if (!out) throw IoError("short write to wav file: " + path);
}

std::vector<double> resample_sinc(const std::vector<double>& x, int sr_in, int sr_out) {
  if (sr_in < 1 || sr_out < 1) throw ParameterError("sample rates must be positive");
  if (sr_in == sr_out || x.empty()) return x;
  const double ratio = double(sr_out) / double(sr_in);
  const auto n_out = size_t(std::ceil(double(x.size()) * ratio));
  // Low-pass at the smaller Nyquist; width = 32 zero crossings of the sinc.
  const double cutoff = std::min(1.0, ratio);
  const int half_width = int(std::ceil(32.0 / cutoff));
  std::vector<double> y(n_out, 0.0);
  for (size_t o = 0; o < n_out; ++o) {
    const double center = double(o) / ratio;
    const int lo = std::max(0, int(std::floor(center)) - half_width);
    const int hi = std::min(int(x.size()) - 1, int(std::floor(center)) + half_width + 1);
    double acc = 0.0, wsum = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double d = (double(i) - center) * cutoff;
      double w;
      if (std::abs(d) < 1e-12) {
        w = 1.0;
      } else if (std::abs(d) >= 32.0) {
        continue;
      } else {
        const double s = std::sin(kPi * d) / (kPi * d);
        const double hann = 0.5 * (1.0 + std::cos(kPi * d / 32.0));
        w = s * hann;
      }
      acc += w * x[size_t(i)];
      wsum += w;
    }
    y[o] = wsum > 0.0 ? acc / wsum : 0.0;
  }
  return y;
}

void MelSpec::validate() const {
  if (sample_rate < 1) throw ParameterError("mel: sample_rate must be positive");
  if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0)
    throw ParameterError("mel: n_fft must be a power of two");
  if (hop < 1) throw ParameterError("mel: hop must be positive");
  if (bands < 1) throw ParameterError("mel: bands must be positive");
  if (fmin < 0.0 || fmax <= fmin || fmax > sample_rate / 2.0)
    throw ParameterError("mel: need 0 <= fmin < fmax <= sr/2");
}

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular filters, linear in Hz between mel-spaced break frequencies.
std::vector<double> filter_points_hz(const MelSpec& spec) {
  std::vector<double> pts(size_t(spec.bands) + 2);
  const double m_lo = hz_to_mel(spec.fmin), m_hi = hz_to_mel(spec.fmax);
  for (size_t i = 0; i < pts.size(); ++i)
    pts[i] = mel_to_hz(m_lo + (m_hi - m_lo) * double(i) / double(spec.bands + 1));
  return pts;
}

}  // namespace

std::vector<double> mel_filter_centers_hz(const MelSpec& spec) {
  const auto pts = filter_points_hz(spec);
  return std::vector<double>(pts.begin() + 1, pts.end() - 1);
}

Tensor<double> mel_spectrogram(const std::vector<double>& samples, const MelSpec& spec) {
  spec.validate();
  if (samples.empty()) throw ParameterError("mel: empty signal");
  const int n = int(samples.size());
  const int n_fft = spec.n_fft, hop = spec.hop;
  const int n_frames = 1 + n / hop;
  const int n_bins = n_fft / 2 + 1;

  std::vector<double> window(static_cast<size_t>(n_fft));
  for (int i = 0; i < n_fft; ++i)
    window[size_t(i)] = 0.5 * (1.0 - std::cos(2.0 * kPi * double(i) / double(n_fft)));

  const auto pts = filter_points_hz(spec);
  // weights[b][bin], stored sparse as (first_bin, coeffs).
  std::vector<std::pair<int, std::vector<double>>> filters(static_cast<size_t>(spec.bands));
  for (int b = 0; b < spec.bands; ++b) {
    const double left = pts[size_t(b)], center = pts[size_t(b) + 1], right = pts[size_t(b) + 2];
    int first = -1;
    std::vector<double> coeffs;
    for (int k = 0; k < n_bins; ++k) {
      const double f = double(k) * spec.sample_rate / double(n_fft);
      double w = 0.0;
      if (f > left && f < right)
        w = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
      if (w > 0.0) {
        if (first < 0) first = k;
        coeffs.push_back(w);
      } else if (first >= 0) {
        break;
      }
    }
    if (first < 0) first = 0;  // band narrower than one bin: no support
    filters[size_t(b)] = {first, std::move(coeffs)};
  }

  std::vector<double> fft_in(static_cast<size_t>(n_fft));
  std::vector<fftw_complex> fft_out(static_cast<size_t>(n_bins));
  fftw_plan plan = fftw_plan_dft_r2c_1d(n_fft, fft_in.data(), fft_out.data(), FFTW_ESTIMATE);

  Tensor<double> mel(n_frames, spec.bands);
  const int half = n_fft / 2;
  for (int f = 0; f < n_frames; ++f) {
    const int start = f * hop - half;
    for (int i = 0; i < n_fft; ++i)
      fft_in[size_t(i)] = samples[size_t(reflect_index(start + i, n))] * window[size_t(i)];
    fftw_execute(plan);
    for (int b = 0; b < spec.bands; ++b) {
      const auto& [first, coeffs] = filters[size_t(b)];
      double acc = 0.0;
      for (size_t k = 0; k < coeffs.size(); ++k) {
        const auto& c = fft_out[size_t(first) + k];
        acc += coeffs[k] * (c[0] * c[0] + c[1] * c[1]);
      }
      mel.at(f, b) = std::log(std::max(acc, 1e-10));
    }
  }
  fftw_destroy_plan(plan);
  return mel;
}

Tensor<double> mel_from_file(const std::string& path, const MelSpec& spec) {
  WavData wav = read_wav(path);
  if (wav.samples.empty()) throw ParameterError("mel: wav file has no samples: " + path);
  if (wav.sample_rate != spec.sample_rate)
    wav.samples = resample_sinc(wav.samples, wav.sample_rate, spec.sample_rate);
  return mel_spectrogram(wav.samples, spec);
}

}  // namespace modiff
