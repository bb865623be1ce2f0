#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "modiff/audio.hpp"
#include "modiff/metrics.hpp"
#include "modiff/motion.hpp"
#include "modiff/rng.hpp"

using namespace modiff;

namespace {

std::vector<double> randf(int n, uint64_t seed) {
  std::vector<double> v(static_cast<size_t>(n));
  NormalSampler rng(seed);
  for (auto& x : v) x = rng.next();
  return v;
}

MotionSequence random_motion(int frames, int joints, double fps, uint64_t seed) {
  MotionSequence m;
  m.frames = Tensor<double>(frames, 3 * joints);
  m.fps = fps;
  NormalSampler rng(seed);
  fill_normal(m.frames, rng);
  return m;
}

}  // namespace

TEST_CASE("silence produces no music beats") {
  MelSpec spec;
  const auto mel = mel_spectrogram(std::vector<double>(16000, 0.0), spec);
  CHECK(music_beats(mel, spec, 20.0).empty());
}

TEST_CASE("a constant tone produces no music beats") {
  MelSpec spec;
  std::vector<double> x(16000);
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = 0.5 * std::sin(2.0 * 3.141592653589793 * 440.0 * double(i) / 16000.0);
  const auto mel = mel_spectrogram(x, spec);
  CHECK(music_beats(mel, spec, 20.0).empty());
}

TEST_CASE("a 2 Hz click track lands beats on multiples of ten motion frames") {
  MelSpec spec;
  const int sr = 16000, seconds = 4;
  std::vector<double> x(size_t(sr) * seconds, 0.0);
  for (int k = 0; k * sr / 2 < int(x.size()); ++k)
    for (int i = 0; i < 32 && k * sr / 2 + i < int(x.size()); ++i)
      x[size_t(k * sr / 2 + i)] = (i % 2 == 0) ? 0.9 : -0.9;

  const auto beats = music_beats(mel_spectrogram(x, spec), spec, 20.0);
  REQUIRE(int(beats.size()) >= 5);
  for (int b : beats) {
    const int nearest = 10 * int(std::lround(double(b) / 10.0));
    CHECK(std::abs(b - nearest) <= 1);
  }
}

TEST_CASE("music beat extraction validates its inputs") {
  MelSpec spec;
  Tensor<double> tiny(2, spec.bands);
  CHECK_THROWS_AS(music_beats(tiny, spec, 20.0), ParameterError);
  Tensor<double> ok(10, spec.bands);
  CHECK_THROWS_AS(music_beats(ok, spec, 0.0), ParameterError);
}

TEST_CASE("coincident beat sets score a perfect alignment") {
  const std::vector<int> beats = {5, 17, 40};
  CHECK(beat_alignment_score(beats, beats) == 1.0);
}

TEST_CASE("a three-frame offset scores exp(-1/2)") {
  // One music beat, nearest kinematic beat 3 frames away, sigma = 3:
  // exp(-9 / 18) = exp(-0.5).
  const double got = beat_alignment_score({13}, {10});
  CHECK(got == doctest::Approx(0.6065306597126334).epsilon(1e-14));
}

TEST_CASE("beat alignment conventions and errors") {
  CHECK(beat_alignment_score({}, {10, 20}) == 0.0);
  CHECK_THROWS_AS(beat_alignment_score({10}, {}), ParameterError);
  CHECK_THROWS_AS(beat_alignment_score({10}, {10}, 0.0), ParameterError);
  CHECK_THROWS_AS(beat_alignment_score({10}, {10}, -1.0), ParameterError);
}

TEST_CASE("beat alignment is shift-invariant and rewards extra kinematic beats") {
  const std::vector<int> music = {3, 9, 20};
  const std::vector<int> kin = {4, 11, 19};
  std::vector<int> music_s, kin_s;
  for (int b : music) music_s.push_back(b + 17);
  for (int b : kin) kin_s.push_back(b + 17);
  CHECK(beat_alignment_score(kin, music) == beat_alignment_score(kin_s, music_s));

  std::vector<int> more = kin;
  more.push_back(21);
  CHECK(beat_alignment_score(more, music) >= beat_alignment_score(kin, music));

  const double s = beat_alignment_score(kin, music);
  CHECK(s >= 0.0);
  CHECK(s <= 1.0);
}

TEST_CASE("static motion has zero kinetic features") {
  MotionSequence m;
  m.frames = Tensor<double>(10, 6);
  m.frames.fill(2.5);
  m.fps = 20.0;
  for (double f : kinetic_features(m)) CHECK(f == 0.0);
}

TEST_CASE("uniform linear motion yields velocity energy but no acceleration") {
  // Joint 0 advances 0.25 per frame at 20 fps: speed 5, energy 25.
  MotionSequence m;
  m.frames = Tensor<double>(8, 6);
  m.fps = 20.0;
  for (int n = 0; n < 8; ++n) m.frames.at(n, 0) = 0.25 * n;
  const auto f = kinetic_features(m);
  REQUIRE(f.size() == 4);
  CHECK(f[0] == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(f[2] == 0.0);  // joint 0 acceleration
  CHECK(f[1] == 0.0);  // joint 1 static
  CHECK(f[3] == 0.0);
}

TEST_CASE("kinetic features match a brute-force finite-difference oracle") {
  const auto m = random_motion(12, 3, 30.0, 42);
  const auto got = kinetic_features(m);
  REQUIRE(got.size() == 6);

  const double fps2 = 30.0 * 30.0;
  for (int j = 0; j < 3; ++j) {
    double vel = 0.0;
    for (int n = 0; n + 1 < 12; ++n) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = m.frames.at(n + 1, 3 * j + c) - m.frames.at(n, 3 * j + c);
        s += d * d;
      }
      vel += s;
    }
    CHECK(got[size_t(j)] == doctest::Approx(fps2 * vel / 11.0).epsilon(1e-12));
    double acc = 0.0;
    for (int n = 0; n + 2 < 12; ++n) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = m.frames.at(n + 2, 3 * j + c) - 2.0 * m.frames.at(n + 1, 3 * j + c) +
                         m.frames.at(n, 3 * j + c);
        s += d * d;
      }
      acc += s;
    }
    CHECK(got[size_t(3 + j)] == doctest::Approx(fps2 * fps2 * acc / 10.0).epsilon(1e-12));
  }
}

TEST_CASE("kinetic features ignore constant joint offsets") {
  auto m = random_motion(9, 2, 25.0, 7);
  const auto before = kinetic_features(m);
  for (int n = 0; n < 9; ++n)
    for (int c = 0; c < 3; ++c) m.frames.at(n, 3 + c) += 3.7;
  const auto after = kinetic_features(m);
  for (size_t i = 0; i < before.size(); ++i)
    CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-12));
}

TEST_CASE("kinetic feature validation") {
  MotionSequence m;
  m.frames = Tensor<double>(2, 6);
  m.fps = 20.0;
  CHECK_THROWS_AS(kinetic_features(m), ParameterError);
  m.frames = Tensor<double>(5, 6);
  m.fps = 0.0;
  CHECK_THROWS_AS(kinetic_features(m), ParameterError);
  m.frames = Tensor<double>(5, 7);
  m.fps = 20.0;
  CHECK_THROWS_AS(kinetic_features(m), DimensionError);
}

TEST_CASE("frechet distance of a set against itself is negligible") {
  std::vector<std::vector<double>> a;
  NormalSampler rng(11);
  for (int i = 0; i < 20; ++i) a.push_back(randf(4, 100 + uint64_t(i)));
  CHECK(frechet_distance(a, a) <= 1e-6);
}

TEST_CASE("a pure mean shift contributes its squared norm") {
  std::vector<std::vector<double>> a, b;
  const std::vector<double> v = {1.0, -2.0, 0.5, 0.25};
  for (int i = 0; i < 30; ++i) {
    a.push_back(randf(4, 200 + uint64_t(i)));
    auto shifted = a.back();
    for (int k = 0; k < 4; ++k) shifted[size_t(k)] += v[size_t(k)];
    b.push_back(shifted);
  }
  double want = 0.0;
  for (double x : v) want += x * x;
  CHECK(frechet_distance(a, b) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("frechet distance matches the closed form on known gaussians") {
  // A ~ N((0,0), diag(1,4)), B ~ N((3,-1), diag(2,1)): diagonal covariances
  // commute, so the population value is |mu|^2 + sum (sqrt(s1)-sqrt(s2))^2.
  const int n = 10000;
  std::vector<std::vector<double>> a, b;
  NormalSampler rng_a(301), rng_b(302);
  for (int i = 0; i < n; ++i) {
    a.push_back({rng_a.next(), 2.0 * rng_a.next()});
    b.push_back({3.0 + std::sqrt(2.0) * rng_b.next(), -1.0 + rng_b.next()});
  }
  const double want = 10.0 + (1.0 - std::sqrt(2.0)) * (1.0 - std::sqrt(2.0)) + 1.0;
  const double got = frechet_distance(a, b);
  CHECK(std::abs(got - want) <= 0.05 * want);

  const double flipped = frechet_distance(b, a);
  CHECK(std::abs(got - flipped) <= 1e-9 * (1.0 + got));
}

TEST_CASE("frechet distance validation") {
  std::vector<std::vector<double>> one = {{1.0, 2.0}};
  std::vector<std::vector<double>> two = {{1.0, 2.0}, {3.0, 4.0}};
  CHECK_THROWS_AS(frechet_distance(one, two), ParameterError);
  CHECK_THROWS_AS(frechet_distance(two, one), ParameterError);
  std::vector<std::vector<double>> ragged = {{1.0, 2.0}, {3.0}};
  CHECK_THROWS_AS(frechet_distance(ragged, two), DimensionError);
}

TEST_CASE("diversity basics") {
  std::vector<std::vector<double>> same = {{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}};
  CHECK(diversity(same) == 0.0);
  std::vector<std::vector<double>> pair = {{0.0, 0.0}, {3.0, 4.0}};
  CHECK(diversity(pair) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK_THROWS_AS(diversity({{1.0}}), ParameterError);
}

TEST_CASE("diversity matches a double-loop oracle and scales linearly") {
  std::vector<std::vector<double>> feats;
  for (int i = 0; i < 5; ++i) feats.push_back(randf(3, 400 + uint64_t(i)));

  double acc = 0.0;
  int pairs = 0;
  for (size_t i = 0; i < feats.size(); ++i)
    for (size_t j = i + 1; j < feats.size(); ++j) {
      double s = 0.0;
      for (size_t k = 0; k < 3; ++k) {
        const double d = feats[i][k] - feats[j][k];
        s += d * d;
      }
      acc += std::sqrt(s);
      ++pairs;
    }
  const double want = acc / double(pairs);
  const double got = diversity(feats);
  CHECK(got == doctest::Approx(want).epsilon(1e-12));

  auto scaled = feats;
  for (auto& f : scaled)
    for (auto& x : f) x *= 3.0;
  CHECK(diversity(scaled) == doctest::Approx(3.0 * got).epsilon(1e-12));

  auto permuted = feats;
  std::swap(permuted[0], permuted[3]);
  std::swap(permuted[1], permuted[4]);
  CHECK(diversity(permuted) == doctest::Approx(got).epsilon(1e-12));
}

TEST_CASE("multi-modality over identical seeds is zero") {
  const auto sample_fn = [](uint64_t seed) { return random_motion(8, 2, 20.0, seed); };
  CHECK(multi_modality(sample_fn, {7, 7, 7, 7}) == 0.0);
  CHECK(multi_modality(sample_fn, {1, 2, 3, 4}) > 0.0);
  CHECK_THROWS_AS(multi_modality(sample_fn, {1}), ParameterError);
}
