#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "support.hpp"
#include "unbend/error.hpp"
#include "unbend/synth.hpp"
#include "unbend/volume.hpp"

using namespace unbend;
using unbend::test::TempDir;

namespace {

void write_meta(const std::filesystem::path& p, const std::string& json) { test::write_file(p, json); }

ErrorCode load_error(const std::filesystem::path& data, const std::filesystem::path& meta) {
  try {
    (void)load_volume(data, meta);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

// Set-based dilation with no shared code, used as the oracle.
int dilations_to_connect(std::set<std::array<int, 3>> cells, const Dims& d) {
  auto connected = [&](const std::set<std::array<int, 3>>& s) {
    std::set<std::array<int, 3>> seen{*s.begin()};
    std::vector<std::array<int, 3>> stack{*s.begin()};
    while (!stack.empty()) {
      const auto c = stack.back();
      stack.pop_back();
      for (int a = 0; a < 3; ++a)
        for (int sgn : {-1, 1}) {
          auto n = c;
          n[a] += sgn;
          if (s.count(n) && seen.insert(n).second) stack.push_back(n);
        }
    }
    return seen.size() == s.size();
  };
  int steps = 0;
  while (!connected(cells)) {
    auto grown = cells;
    for (const auto& c : cells)
      for (int a = 0; a < 3; ++a)
        for (int sgn : {-1, 1}) {
          auto n = c;
          n[a] += sgn;
          if (n[a] >= 0 && n[a] < d[a]) grown.insert(n);
        }
    cells = std::move(grown);
    ++steps;
  }
  return steps;
}

}  // namespace

TEST_CASE("u8 volume normalizes to the full range") {
  TempDir dir;
  std::string bytes{char(0), char(10), char(20), char(30), char(40), char(50), char(60), char(255)};
  test::write_file(dir / "v.raw", bytes);
  write_meta(dir / "v.json", R"({"dims":[2,2,2],"spacing":[1,1,1],"dtype":"u8"})");
  const ScalarVolume v = load_volume(dir / "v.raw", dir / "v.json");
  const auto data = v.data();
  CHECK(*std::min_element(data.begin(), data.end()) == 0.0f);
  CHECK(*std::max_element(data.begin(), data.end()) == 1.0f);
  CHECK(v.origin() == Vec3::Zero());
  CHECK(v.at(1, 0, 0) == doctest::Approx(10.0 / 255.0));
}

TEST_CASE("u16 and f32 loads") {
  TempDir dir;
  std::string u16{char(0xff), char(0xff), char(0x00), char(0x80)};
  test::write_file(dir / "a.raw", u16);
  write_meta(dir / "a.json", R"({"dims":[2,1,1],"spacing":[1,2,3],"origin":[1,2,3],"dtype":"u16","endianness":"little"})");
  const ScalarVolume a = load_volume(dir / "a.raw", dir / "a.json");
  CHECK(a.at(0, 0, 0) == 1.0f);
  CHECK(a.at(1, 0, 0) == doctest::Approx(32768.0 / 65535.0));
  CHECK(a.spacing() == Vec3(1, 2, 3));
  CHECK(a.origin() == Vec3(1, 2, 3));

  const float f[2] = {-0.5f, 2.0f};
  test::write_file(dir / "b.raw", std::string(reinterpret_cast<const char*>(f), sizeof f));
  write_meta(dir / "b.json", R"({"dims":[1,2,1],"spacing":[1,1,1],"dtype":"f32"})");
  const ScalarVolume b = load_volume(dir / "b.raw", dir / "b.json");
  CHECK(b.at(0, 0, 0) == 0.0f);
  CHECK(b.at(0, 1, 0) == 1.0f);
}

TEST_CASE("load errors") {
  TempDir dir;
  test::write_file(dir / "v.raw", std::string(7, '\0'));
  write_meta(dir / "v.json", R"({"dims":[2,2,2],"spacing":[1,1,1],"dtype":"u8"})");
  CHECK(load_error(dir / "v.raw", dir / "v.json") == ErrorCode::SizeMismatch);

  CHECK(load_error(dir / "v.raw", dir / "missing.json") == ErrorCode::MetadataMissing);
  write_meta(dir / "nodims.json", R"({"spacing":[1,1,1],"dtype":"u8"})");
  CHECK(load_error(dir / "v.raw", dir / "nodims.json") == ErrorCode::MetadataMissing);
  write_meta(dir / "i32.json", R"({"dims":[7,1,1],"spacing":[1,1,1],"dtype":"i32"})");
  CHECK(load_error(dir / "v.raw", dir / "i32.json") == ErrorCode::UnsupportedScalarType);
  write_meta(dir / "big.json", R"({"dims":[7,1,1],"spacing":[1,1,1],"dtype":"u8","endianness":"big"})");
  CHECK(load_error(dir / "v.raw", dir / "big.json") == ErrorCode::UnsupportedScalarType);
}

TEST_CASE("generator output survives export and reload") {
  TempDir dir;
  CylinderSpec spec;
  spec.dims = {40, 40, 48};
  spec.radius = 5;
  spec.amplitude = 4;
  const SynthResult r = make_bent_cylinder(spec);
  export_volume(r.bent, dir / "b.raw", dir / "b.json");
  const ScalarVolume back = load_volume(dir / "b.raw", dir / "b.json");
  REQUIRE(back.dims() == r.bent.dims());
  double worst = 0.0;
  for (std::size_t i = 0; i < back.data().size(); ++i)
    worst = std::max(worst, static_cast<double>(std::abs(back.data()[i] - r.bent.data()[i])));
  CHECK(worst <= 1e-6);

  write_volume(r.bent, ScalarType::U16, dir / "q.raw", dir / "q.json");
  const ScalarVolume q = load_volume(dir / "q.raw", dir / "q.json");
  for (std::size_t i = 0; i < q.data().size(); ++i) REQUIRE(std::abs(q.data()[i] - r.bent.data()[i]) <= 0.5 / 65535 + 1e-7);
}

TEST_CASE("trilinear sampling") {
  const ScalarVolume v = test::volume_from({2, 1, 1}, {0.0f, 1.0f}, Vec3(2, 1, 1), Vec3(1, 0, 0));
  CHECK(trilinear_sample(v, Vec3(1, 0, 0)) == 0.0);
  CHECK(trilinear_sample(v, Vec3(3, 0, 0)) == 1.0);
  CHECK(trilinear_sample(v, Vec3(2, 0, 0)) == doctest::Approx(0.5));
  CHECK(trilinear_sample(v, Vec3(100, 0, 0)) == 0.0);
  CHECK(trilinear_sample(v, Vec3(0.5, 0, 0)) == 0.0);
  CHECK(trilinear_sample_clamped(v, Vec3(0.5, 0, 0)) == 0.0);
  CHECK(trilinear_sample_clamped(v, Vec3(3.9, 0.4, -0.4)) == 1.0);
  CHECK(trilinear_sample_clamped(v, Vec3(4.1, 0, 0)) == 0.0);
}

TEST_CASE("trilinear stays within its 8 neighbours and matches the multilinear formula") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> val(0.0f, 1.0f);
  std::vector<float> data(5 * 6 * 7);
  for (auto& x : data) x = val(rng);
  const ScalarVolume v = test::volume_from({5, 6, 7}, data, Vec3(0.5, 1.0, 2.0), Vec3(-1, 2, 3));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 1000; ++n) {
    const Vec3 q(u(rng) * 4, u(rng) * 5, u(rng) * 6);
    const Vec3 p = v.origin() + v.spacing().cwiseProduct(q);
    const int i = std::min(3, int(q.x())), j = std::min(4, int(q.y())), k = std::min(5, int(q.z()));
    double lo = 1, hi = 0, expect = 0;
    for (int c = 0; c < 8; ++c) {
      const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
      const double x = v.at(i + di, j + dj, k + dk);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      expect += x * (di ? q.x() - i : 1 - (q.x() - i)) * (dj ? q.y() - j : 1 - (q.y() - j)) * (dk ? q.z() - k : 1 - (q.z() - k));
    }
    const double s = trilinear_sample(v, p);
    REQUIRE(s >= lo - 1e-7);
    REQUIRE(s <= hi + 1e-7);
    REQUIRE(s == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("cubic sampling interpolates and stays in range") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> val(0.0f, 1.0f);
  std::vector<float> data(6 * 6 * 6);
  for (auto& x : data) x = val(rng);
  const ScalarVolume v = test::volume_from({6, 6, 6}, data);
  for (int k = 0; k < 6; ++k)
    for (int j = 0; j < 6; ++j)
      for (int i = 0; i < 6; ++i) REQUIRE(cubic_sample_clamped(v, Vec3(i, j, k)) == doctest::Approx(v.at(i, j, k)));
  std::uniform_real_distribution<double> u(-0.5, 5.5);
  for (int n = 0; n < 500; ++n) {
    const double s = cubic_sample_clamped(v, Vec3(u(rng), u(rng), u(rng)));
    REQUIRE(s >= 0.0);
    REQUIRE(s <= 1.0);
  }
  CHECK(cubic_sample_clamped(v, Vec3(-0.6, 2, 2)) == 0.0);

  // Catmull-Rom reproduces linear data away from the border.
  std::vector<float> ramp(8 * 8 * 8);
  const ScalarVolume r0 = test::volume_from({8, 8, 8}, ramp);
  ScalarVolume r = r0;
  for (int k = 0; k < 8; ++k)
    for (int j = 0; j < 8; ++j)
      for (int i = 0; i < 8; ++i) r.at(i, j, k) = static_cast<float>((i + 2 * j + 3 * k) / 42.0);
  CHECK(cubic_sample_clamped(r, Vec3(3.3, 2.6, 4.1)) == doctest::Approx((3.3 + 5.2 + 12.3) / 42.0).epsilon(1e-6));
}

TEST_CASE("downsample") {
  const ScalarVolume c = test::volume_from({5, 3, 4}, std::vector<float>(60, 0.25f));
  const ScalarVolume cd = downsample(c, 10);
  for (float x : cd.data()) CHECK(x == doctest::Approx(0.25));

  std::vector<float> checker(64);
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) checker[i + 4 * (j + 4 * k)] = static_cast<float>((i + j + k) % 2);
  const ScalarVolume ch = test::volume_from({4, 4, 4}, checker);
  CHECK(downsample_factor(ch.dims(), 8) == 2);
  const ScalarVolume d = downsample(ch, 8);
  CHECK(d.dims() == Dims{2, 2, 2});
  CHECK(d.spacing() == Vec3(2, 2, 2));
  for (float x : d.data()) CHECK(x == 0.5f);
  CHECK(downsample(ch, 64).dims() == Dims{4, 4, 4});
  CHECK_THROWS_AS((void)downsample(ch, 7), Error);
}

TEST_CASE("downsample then replicate keeps the mean") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<float> val(0.0f, 1.0f);
  std::vector<float> data(8 * 6 * 4);
  for (auto& x : data) x = val(rng);
  const ScalarVolume v = test::volume_from({8, 6, 4}, data);
  const ScalarVolume d = downsample_by(v, 2);
  double mean_in = 0, mean_out = 0;
  for (float x : v.data()) mean_in += x;
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 6; ++j)
      for (int i = 0; i < 8; ++i) mean_out += d.at(i / 2, j / 2, k / 2);
  CHECK(std::abs(mean_in - mean_out) / data.size() <= 1e-6);
}

TEST_CASE("threshold occupancy") {
  const ScalarVolume v = test::volume_from({3, 1, 1}, {0.0f, 0.04f, 0.8f});
  const OccupancyMask m = threshold_occupancy(v, 0.5);
  CHECK(m.occupied_count() == 1);
  CHECK(m.occupied(2, 0, 0));
  CHECK(threshold_occupancy(v, 0.0).occupied_count() == 2);
  CHECK_THROWS_AS((void)threshold_occupancy(v, 0.9), Error);

  std::mt19937 rng(5);
  std::uniform_real_distribution<float> val(0.0f, 1.0f);
  std::vector<float> data(512);
  for (auto& x : data) x = val(rng);
  const ScalarVolume r = test::volume_from({8, 8, 8}, data);
  const OccupancyMask lo = threshold_occupancy(r, 0.3), hi = threshold_occupancy(r, 0.6);
  for (std::size_t i = 0; i < data.size(); ++i)
    if (hi.bits()[i]) REQUIRE(lo.bits()[i]);
}

TEST_CASE("threshold of a generator cylinder matches its analytic volume") {
  CylinderSpec spec;
  spec.dims = {64, 64, 64};
  spec.radius = 10;
  spec.amplitude = 0;
  const SynthResult r = make_bent_cylinder(spec);
  const double analytic = std::numbers::pi * spec.radius * spec.radius * SineAxis(spec).length();
  const double counted = static_cast<double>(threshold_occupancy(r.bent, 0.5).occupied_count());
  CHECK(std::abs(counted - analytic) / analytic <= 0.05);
}

TEST_CASE("component counting uses 6-connectivity") {
  CHECK(test::mask_from({3, 3, 1}, {{0, 0, 0}, {1, 1, 0}}).component_count() == 2);
  CHECK(test::mask_from({3, 3, 1}, {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}}).component_count() == 1);
}

TEST_CASE("dilate until connected") {
  const OccupancyMask blob = test::mask_from({4, 4, 4}, {{1, 1, 1}, {1, 2, 1}, {2, 2, 1}});
  const auto [same, zero] = dilate_until_connected(blob);
  CHECK(zero == 0);
  CHECK(std::equal(same.bits().begin(), same.bits().end(), blob.bits().begin()));

  const Dims d{9, 3, 3};
  const auto [m1, one] = dilate_until_connected(test::mask_from(d, {{2, 1, 1}, {4, 1, 1}}));
  CHECK(one == 1);
  CHECK(m1.component_count() == 1);

  const Dims d5{11, 3, 3};
  const int oracle = dilations_to_connect({{1, 1, 1}, {7, 1, 1}}, d5);
  CHECK(oracle == 3);
  const OccupancyMask gap5 = test::mask_from(d5, {{1, 1, 1}, {7, 1, 1}});
  const auto [m5, three] = dilate_until_connected(gap5);
  CHECK(three == oracle);
  CHECK(m5.component_count() == 1);
  for (std::size_t i = 0; i < gap5.bits().size(); ++i)
    if (gap5.bits()[i]) REQUIRE(m5.bits()[i]);
}

TEST_CASE("dilate until connected agrees with a set-based oracle on random pairs") {
  std::mt19937 rng(21);
  const Dims d{12, 10, 8};
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> x(0, d[0] - 1), y(0, d[1] - 1), z(0, d[2] - 1);
    const std::array<int, 3> a{x(rng), y(rng), z(rng)}, b{x(rng), y(rng), z(rng)};
    if (a == b) continue;
    const auto [m, steps] = dilate_until_connected(test::mask_from(d, {a, b}));
    CHECK(steps == dilations_to_connect({a, b}, d));
    CHECK(m.component_count() == 1);
  }
}
