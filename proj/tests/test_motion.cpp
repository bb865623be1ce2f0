#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "modiff/motion.hpp"
#include "modiff/rng.hpp"

using namespace modiff;

namespace {

Skeleton chain3() {
  Skeleton s;
  s.joint_names = {"root", "a", "b"};
  s.parents = {-1, 0, 1};
  s.symmetry = {0, 1, 2};
  s.validate();
  return s;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("skeleton presets validate and expose the advertised topology") {
  const Skeleton toy = skeleton_toy8();
  CHECK(toy.joint_count() == 8);
  CHECK(toy.channel_count() == 24);
  CHECK(toy.bones().size() == 7);
  CHECK(toy.parents[0] == -1);
  for (int j = 0; j < 8; ++j) CHECK(toy.symmetry[size_t(toy.symmetry[size_t(j)])] == j);

  const Skeleton biped = skeleton_biped24();
  CHECK(biped.joint_count() == 24);
  CHECK(biped.bones().size() == 23);
  for (int j = 0; j < 24; ++j) CHECK(biped.symmetry[size_t(biped.symmetry[size_t(j)])] == j);
}

TEST_CASE("skeleton validation rejects malformed trees") {
  Skeleton s = chain3();
  s.parents = {-1, 2, 1};  // 1 <-> 2 cycle
  CHECK_THROWS_AS(s.validate(), ParameterError);

  s = chain3();
  s.parents = {-1, 0, -1};  // two roots
  CHECK_THROWS_AS(s.validate(), ParameterError);

  s = chain3();
  s.symmetry = {0, 2, 1};  // fine: involution swapping 1 and 2
  CHECK_NOTHROW(s.validate());
  s.symmetry = {1, 1, 2};  // not an involution
  CHECK_THROWS_AS(s.validate(), ParameterError);
}

TEST_CASE("bone_lengths: 3-4-5 bone and coincident joints") {
  Skeleton s;
  s.joint_names = {"root", "tip"};
  s.parents = {-1, 0};
  s.symmetry = {0, 1};
  s.validate();

  Tensor<double> f(1, 6);
  f.at(0, 3) = 3.0;
  f.at(0, 4) = 4.0;
  const auto bl = bone_lengths(f, s);
  CHECK(bl.rows == 1);
  CHECK(bl.cols == 1);
  CHECK(bl.at(0, 0) == 5.0);

  Tensor<double> zeros(3, 6);
  const auto bz = bone_lengths(zeros, s);
  for (auto x : bz.v) CHECK(x == 0.0);

  Tensor<double> wrong(1, 9);
  CHECK_THROWS_AS(bone_lengths(wrong, s), DimensionError);
}

TEST_CASE("bone_lengths matches a brute-force per-frame distance loop") {
  const Skeleton s = chain3();
  Tensor<double> f(10, 9);
  NormalSampler rng(2024);
  fill_normal(f, rng);
  const auto bl = bone_lengths(f, s);
  CHECK(bl.rows == 10);
  CHECK(bl.cols == 2);
  for (int n = 0; n < 10; ++n) {
    // bone 0: joint1 vs root-as-origin; bone 1: joint2 vs joint1
    double d0 = 0.0, d1 = 0.0;
    for (int c = 0; c < 3; ++c) {
      d0 += f.at(n, 3 + c) * f.at(n, 3 + c);
      const double d = f.at(n, 6 + c) - f.at(n, 3 + c);
      d1 += d * d;
    }
    CHECK(bl.at(n, 0) == doctest::Approx(std::sqrt(d0)).epsilon(1e-12));
    CHECK(bl.at(n, 1) == doctest::Approx(std::sqrt(d1)).epsilon(1e-12));
  }
}

TEST_CASE("bone_lengths is invariant under a global rotation of relative positions") {
  const Skeleton s = chain3();
  Tensor<double> f(6, 9);
  NormalSampler rng(77);
  fill_normal(f, rng);

  // Rodrigues rotation by a fixed axis/angle applied to every joint position
  // (root translation channels included; they do not enter bone geometry).
  const double ct = std::cos(1.1), st = std::sin(1.1);
  const std::array<double, 3> u = {1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0};  // unit
  auto rot = [&](double x, double y, double z) {
    const double dot = u[0] * x + u[1] * y + u[2] * z;
    return std::array<double, 3>{
        x * ct + (u[1] * z - u[2] * y) * st + u[0] * dot * (1 - ct),
        y * ct + (u[2] * x - u[0] * z) * st + u[1] * dot * (1 - ct),
        z * ct + (u[0] * y - u[1] * x) * st + u[2] * dot * (1 - ct)};
  };
  Tensor<double> fr(6, 9);
  for (int n = 0; n < 6; ++n)
    for (int j = 0; j < 3; ++j) {
      const auto r = rot(f.at(n, 3 * j), f.at(n, 3 * j + 1), f.at(n, 3 * j + 2));
      for (int c = 0; c < 3; ++c) fr.at(n, 3 * j + c) = r[size_t(c)];
    }
  const auto a = bone_lengths(f, s), b = bone_lengths(fr, s);
  for (size_t i = 0; i < a.numel(); ++i) CHECK(a.v[i] == doctest::Approx(b.v[i]).epsilon(1e-9));
}

TEST_CASE("mirrored poses give symmetric bone lengths") {
  const Skeleton toy = skeleton_toy8();
  Tensor<double> f(4, toy.channel_count());
  NormalSampler rng(55);
  fill_normal(f, rng);
  // Build a mirrored pose: joint j's position is the x-flip of joint sym(j).
  for (int n = 0; n < 4; ++n)
    for (int j = 0; j < toy.joint_count(); ++j) {
      const int m = toy.symmetry[size_t(j)];
      if (m < j) continue;
      if (m == j) continue;
      f.at(n, 3 * m) = -f.at(n, 3 * j);
      f.at(n, 3 * m + 1) = f.at(n, 3 * j + 1);
      f.at(n, 3 * m + 2) = f.at(n, 3 * j + 2);
    }
  // Midline joints must sit on the mirror plane for a fully symmetric pose.
  for (int n = 0; n < 4; ++n)
    for (int j = 0; j < toy.joint_count(); ++j)
      if (toy.symmetry[size_t(j)] == j) f.at(n, 3 * j) = 0.0;

  const auto bl = bone_lengths(f, toy);
  for (const auto& [a, b] : toy.symmetric_bone_pairs())
    for (int n = 0; n < 4; ++n) CHECK(bl.at(n, a) == doctest::Approx(bl.at(n, b)).epsilon(1e-12));
}

TEST_CASE("kinetic_velocity: static, single mover, and reference loop") {
  MotionSequence still;
  still.fps = 20.0;
  still.frames = Tensor<double>::full(5, 12, 3.3);
  for (double v : kinetic_velocity(still)) CHECK(v == 0.0);

  // One joint moving 0.1 m per frame at fps 20, J=4 -> 0.1*20/4 = 0.5.
  MotionSequence mover;
  mover.fps = 20.0;
  mover.frames = Tensor<double>(6, 12);
  for (int n = 0; n < 6; ++n) mover.frames.at(n, 3) = 0.1 * n;
  const auto v = kinetic_velocity(mover);
  CHECK(v.size() == 6);
  for (double x : v) CHECK(x == doctest::Approx(0.5).epsilon(1e-12));

  // Random walk vs a direct finite-difference loop.
  MotionSequence walk;
  walk.fps = 12.5;
  walk.frames = Tensor<double>(9, 9);
  NormalSampler rng(451);
  fill_normal(walk.frames, rng);
  const auto vw = kinetic_velocity(walk);
  CHECK(vw.size() == 9);
  CHECK(vw[0] == vw[1]);
  for (int n = 1; n < 9; ++n) {
    double acc = 0.0;
    for (int j = 0; j < 3; ++j) {
      double d2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = walk.frames.at(n, 3 * j + c) - walk.frames.at(n - 1, 3 * j + c);
        d2 += d * d;
      }
      acc += std::sqrt(d2);
    }
    CHECK(vw[size_t(n)] == doctest::Approx(acc * 12.5 / 3.0).epsilon(1e-12));
  }

  MotionSequence tiny;
  tiny.fps = 10.0;
  tiny.frames = Tensor<double>(1, 12);
  CHECK_THROWS_AS(kinetic_velocity(tiny), ParameterError);
}

TEST_CASE("kinematic_beats finds strict local minima") {
  CHECK(kinematic_beats({2, 1, 2}) == std::vector<int>{1});
  CHECK(kinematic_beats(std::vector<double>(8, 1.0)).empty());
  CHECK(kinematic_beats({3, 1, 2, 0.5, 4, 4, 1, 2}) == std::vector<int>{1, 3, 6});
  CHECK_THROWS_AS(kinematic_beats({1, 2}), ParameterError);

  // Invariance to a constant offset.
  const std::vector<double> v = {3, 1, 2, 0.5, 4, 4, 1, 2};
  std::vector<double> shifted = v;
  for (auto& x : shifted) x += 17.5;
  CHECK(kinematic_beats(v) == kinematic_beats(shifted));
}

TEST_CASE("motion JSON round-trips bit-exactly with the skeleton") {
  const Skeleton toy = skeleton_toy8();
  MotionSequence m;
  m.fps = 20.0;
  m.frames = Tensor<double>(7, toy.channel_count());
  NormalSampler rng(99);
  fill_normal(m.frames, rng);
  m.frames.at(0, 0) = 0.1;  // not exactly representable; stresses serialization
  m.frames.at(0, 1) = 1e-300;

  const auto path = temp_file("modiff_motion_rt.json");
  write_motion_json(path.string(), m, toy);
  Skeleton back_skel;
  const MotionSequence back = read_motion_json(path.string(), &back_skel);

  CHECK(back.fps == m.fps);
  CHECK(back.frames.rows == m.frames.rows);
  CHECK(back.frames.cols == m.frames.cols);
  CHECK(back.frames.v == m.frames.v);  // bit-exact
  CHECK(back_skel.parents == toy.parents);
  CHECK(back_skel.symmetry == toy.symmetry);
  CHECK(back_skel.joint_names == toy.joint_names);
  std::filesystem::remove(path);
}

TEST_CASE("read_motion_json rejects missing and malformed files") {
  CHECK_THROWS_AS(read_motion_json("/nonexistent/nope.json"), IoError);

  const auto path = temp_file("modiff_motion_bad.json");
  {
    FILE* fp = std::fopen(path.string().c_str(), "w");
    std::fputs("{\"fps\": 20.0, \"joint_count\": 2", fp);  // truncated
    std::fclose(fp);
  }
  CHECK_THROWS_AS(read_motion_json(path.string()), IoError);
  std::filesystem::remove(path);
}
