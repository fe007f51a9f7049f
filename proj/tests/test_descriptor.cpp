#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "affkit/descriptor.hpp"
#include "affkit/synth.hpp"
#include "oracles.hpp"

using namespace affkit;

namespace {

Patch patch_from(const GrayImage& img) {
  Patch p;
  p.size = img.width;
  p.values = img.pixels;
  return p;
}

Patch ramp_patch(int s, double kx, double ky, double base = 0.3) {
  Patch p;
  p.size = s;
  p.values.resize(static_cast<size_t>(s) * s);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x)
      p.at(x, y) = static_cast<float>(base + kx * x + ky * y);
  return p;
}

Patch random_patch(int s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Patch p;
  p.size = s;
  for (int i = 0; i < s * s; ++i) p.values.push_back(static_cast<float>(u(rng)));
  return p;
}

}  // namespace

TEST_CASE("sift of a constant patch is the zero vector") {
  Patch p;
  p.size = 32;
  p.values.assign(32 * 32, 0.5f);
  const Descriptor d = sift_descriptor(p);
  REQUIRE(d.values.size() == 128);
  for (double v : d.values) CHECK(v == 0.0);
}

TEST_CASE("sift of a vertical edge concentrates votes in horizontal-gradient bins") {
  // smooth vertical edge: gradient points in +x everywhere
  Patch p;
  p.size = 32;
  p.values.resize(32 * 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      p.at(x, y) = static_cast<float>(1.0 / (1.0 + std::exp(-(x - 15.5))));
  const Descriptor d = sift_descriptor(p);
  double total = 0.0, horiz = 0.0;
  for (int cell = 0; cell < 16; ++cell)
    for (int b = 0; b < 8; ++b) {
      const double v = d.values[cell * 8 + b];
      total += v;
      if (b == 0 || b == 4) horiz += v;  // theta = 0 and pi bins
    }
  REQUIRE(total > 0.0);
  for (int cell = 0; cell < 16; ++cell)
    for (int b = 1; b < 8; ++b) {
      if (b == 4) continue;
      CHECK(d.values[cell * 8 + b] < 0.05 * total);
    }
  CHECK(horiz > 0.9 * total);
}

TEST_CASE("sift is invariant to constant intensity shifts") {
  std::mt19937_64 rng(5);
  Patch p = random_patch(32, rng);
  Patch shifted = p;
  for (float& v : shifted.values) v += 0.3f;
  const Descriptor a = sift_descriptor(p);
  const Descriptor b = sift_descriptor(shifted);
  // equality up to float32 rounding of the shifted patch values
  for (size_t i = 0; i < a.values.size(); ++i)
    CHECK(a.values[i] == Catch::Approx(b.values[i]).margin(1e-5));
}

TEST_CASE("sift is invariant to affine intensity changes") {
  std::mt19937_64 rng(6);
  Patch p = random_patch(32, rng);
  Patch t = p;
  for (float& v : t.values) v = 1.7f * v + 0.1f;
  const Descriptor a = sift_descriptor(p);
  const Descriptor b = sift_descriptor(t);
  for (size_t i = 0; i < a.values.size(); ++i)
    CHECK(a.values[i] == Catch::Approx(b.values[i]).margin(1e-5));
}

TEST_CASE("sift values are non-negative and clamped") {
  std::mt19937_64 rng(7);
  const Descriptor d = sift_descriptor(random_patch(32, rng));
  double norm = 0.0;
  for (double v : d.values) {
    CHECK(v >= 0.0);
    norm += v * v;
  }
  CHECK(norm == Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("rootsift basics") {
  Descriptor zero{DescriptorKind::SIFT, std::vector<double>(128, 0.0)};
  const Descriptor rz = rootsift(zero);
  for (double v : rz.values) CHECK(v == 0.0);

  Descriptor onehot{DescriptorKind::SIFT, std::vector<double>(128, 0.0)};
  onehot.values[17] = 0.73;
  const Descriptor r1 = rootsift(onehot);
  CHECK(r1.values[17] == Catch::Approx(1.0));
  for (size_t i = 0; i < 128; ++i)
    if (i != 17) CHECK(r1.values[i] == 0.0);

  Descriptor uniform{DescriptorKind::SIFT, std::vector<double>(128, 3.0)};
  const Descriptor ru = rootsift(uniform);
  double norm = 0.0;
  for (double v : ru.values) {
    CHECK(v == Catch::Approx(std::sqrt(1.0 / 128.0)));
    norm += v * v;
  }
  CHECK(norm == Catch::Approx(1.0).epsilon(1e-12));

  Descriptor raw{DescriptorKind::RawPixels, {1.0, -1.0}};
  CHECK_THROWS_AS(rootsift(raw), KindMismatch);
}

TEST_CASE("rootsift distance equals the Hellinger-kernel-induced distance") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Descriptor a{DescriptorKind::SIFT, {}}, b{DescriptorKind::SIFT, {}};
    for (int i = 0; i < 128; ++i) {
      a.values.push_back(u(rng));
      b.values.push_back(u(rng));
    }
    const double d = distance(rootsift(a), rootsift(b));
    double l1a = 0.0, l1b = 0.0;
    for (int i = 0; i < 128; ++i) {
      l1a += a.values[i];
      l1b += b.values[i];
    }
    double bc = 0.0;  // Bhattacharyya coefficient of L1-normalized vectors
    for (int i = 0; i < 128; ++i)
      bc += std::sqrt((a.values[i] / l1a) * (b.values[i] / l1b));
    const double hellinger = std::sqrt(std::max(0.0, 2.0 - 2.0 * bc));
    CHECK(oracle::rel_err(d, hellinger, 1e-9) < 1e-9);
  }
}

TEST_CASE("raw pixel descriptor") {
  Patch p;
  p.size = 2;
  p.values = {-1.0f, 1.0f, 1.0f, -1.0f};
  CHECK_THROWS_AS(raw_pixel_descriptor(p), PreconditionError);
  p.normalized = true;
  p.norm_std = 1.0;
  const Descriptor d = raw_pixel_descriptor(p);
  REQUIRE(d.values.size() == 4);
  CHECK(d.values[0] == -1.0);
  CHECK(d.values[1] == 1.0);
  CHECK(distance(d, d) == 0.0);
}

TEST_CASE("raw pixel chain rule matches finite differences") {
  const GrayImage img = make_texture(96, 96, 15, 120);
  const Mat2 a{4.0, 0.6, -0.4, 3.6};
  const int s = 12;
  const double mr = 3.0;

  // pick a center whose sample grid stays clear of bilinear cell boundaries,
  // so small probes cannot straddle a derivative jump
  Vec2 c{48.1, 47.6};
  {
    std::mt19937_64 crng(99);
    std::uniform_real_distribution<double> jit(-0.5, 0.5);
    auto clear_of_boundaries = [&](const Vec2& cand) {
      const Mat2 g = a * mr;
      for (int iy = 0; iy < s; ++iy)
        for (int ix = 0; ix < s; ++ix) {
          const double ux = -1.0 + 2.0 * ix / (s - 1);
          const double uy = -1.0 + 2.0 * iy / (s - 1);
          const double px = cand.x + g.m11 * ux + g.m12 * uy;
          const double py = cand.y + g.m21 * ux + g.m22 * uy;
          auto border = [](double v) {
            const double fr = v - std::floor(v);
            return std::min(fr, 1.0 - fr);
          };
          if (border(px) < 2e-3 || border(py) < 2e-3) return false;
        }
      return true;
    };
    while (!clear_of_boundaries(c)) c = {48.1 + jit(crng), 47.6 + jit(crng)};
  }

  // fixed target descriptor
  const Patch tgt_raw =
      sample_patch(img, AffineFrame::from({52.0, 44.0}, Mat2::identity() * 4.0), s, mr);
  const Descriptor target = raw_pixel_descriptor(normalize_patch(tgt_raw));

  // double-precision oracle of the whole chain: warp, normalize, distance
  auto value = [&](const Mat2& m) {
    const Mat2 g = m * mr;
    std::vector<double> vals;
    for (int iy = 0; iy < s; ++iy)
      for (int ix = 0; ix < s; ++ix) {
        const double ux = -1.0 + 2.0 * ix / (s - 1);
        const double uy = -1.0 + 2.0 * iy / (s - 1);
        vals.push_back(affkit::detail::bilinear(img, c.x + g.m11 * ux + g.m12 * uy,
                                                c.y + g.m21 * ux + g.m22 * uy)
                           .value);
      }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= vals.size();
    const double sd = std::sqrt(var);
    double acc = 0.0;
    for (size_t i = 0; i < vals.size(); ++i) {
      const double d = (vals[i] - mean) / sd - target.values[i];
      acc += d * d;
    }
    return std::sqrt(acc);
  };

  const auto [raw0, jac] = sample_patch_with_jacobian(img, AffineFrame::from(c, a), s, mr);
  const Patch n0 = normalize_patch(raw0);
  const Descriptor d0 = raw_pixel_descriptor(n0);
  const double dist0 = distance(d0, target);
  REQUIRE(dist0 > 1e-6);
  std::vector<double> dl_ds(d0.values.size());
  for (size_t i = 0; i < dl_ds.size(); ++i)
    dl_ds[i] = (d0.values[i] - target.values[i]) / dist0;
  const std::vector<double> draw = normalize_backward(n0, dl_ds);
  double analytic[4] = {0, 0, 0, 0};
  for (size_t p = 0; p < draw.size(); ++p)
    for (int k = 0; k < 4; ++k) analytic[k] += draw[p] * jac.d_a[p * 4 + k];

  const Mat2 probes[4] = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
  for (int k = 0; k < 4; ++k) {
    const double h = 5e-5;  // probes move samples by < 2e-4 px, inside cells
    const double fd = (value(a + probes[k] * h) - value(a + probes[k] * (-h))) / (2.0 * h);
    CHECK(oracle::rel_err(analytic[k], fd, 1e-4) < 1e-3);
  }
}

TEST_CASE("dominant orientation basics") {
  Patch constant;
  constant.size = 32;
  constant.values.assign(32 * 32, 0.4f);
  const DominantOrientation d0 = dominant_orientation(constant);
  CHECK(d0.degenerate);
  CHECK(d0.angle == 0.0);

  const DominantOrientation ramp = dominant_orientation(ramp_patch(32, 0.01, 0.0));
  CHECK_FALSE(ramp.degenerate);
  CHECK(std::abs(ramp.angle) <= std::numbers::pi / 18.0);
}

TEST_CASE("dominant orientation shifts by pi/2 under patch rotation") {
  GrayImage img(32, 32);
  // content with a single strong gradient direction plus mild structure
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      img.at(x, y) = static_cast<float>(0.02 * x + 0.002 * std::sin(0.7 * y));
  const Patch p = patch_from(img);
  const Patch r = patch_from(oracle::rotate90(img));
  const DominantOrientation a = dominant_orientation(p);
  const DominantOrientation b = dominant_orientation(r);
  REQUIRE_FALSE(a.degenerate);
  REQUIRE_FALSE(b.degenerate);
  double diff = b.angle - a.angle - std::numbers::pi / 2.0;
  while (diff > std::numbers::pi) diff -= 2.0 * std::numbers::pi;
  while (diff < -std::numbers::pi) diff += 2.0 * std::numbers::pi;
  CHECK(std::abs(diff) <= std::numbers::pi / 18.0);
}

TEST_CASE("descriptor distance") {
  Descriptor a{DescriptorKind::SIFT, std::vector<double>(128, 0.0)};
  Descriptor b = a;
  a.values[3] = 1.0;
  b.values[9] = 1.0;
  CHECK(distance(a, a) == 0.0);
  CHECK(distance(a, b) == Catch::Approx(std::sqrt(2.0)));

  Descriptor wrong{DescriptorKind::RootSIFT, std::vector<double>(128, 0.0)};
  CHECK_THROWS_AS(distance(a, wrong), KindMismatch);
  Descriptor shorter{DescriptorKind::SIFT, std::vector<double>(64, 0.0)};
  CHECK_THROWS_AS(distance(a, shorter), KindMismatch);

  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Descriptor x{DescriptorKind::SIFT, {}}, y{DescriptorKind::SIFT, {}},
        z{DescriptorKind::SIFT, {}};
    for (int i = 0; i < 16; ++i) {
      x.values.push_back(u(rng));
      y.values.push_back(u(rng));
      z.values.push_back(u(rng));
    }
    // direct summation oracle
    double acc = 0.0;
    for (int i = 0; i < 16; ++i)
      acc += (x.values[i] - y.values[i]) * (x.values[i] - y.values[i]);
    CHECK(oracle::rel_err(distance(x, y), std::sqrt(acc), 1e-12) < 1e-9);
    // triangle inequality
    CHECK(distance(x, z) <= distance(x, y) + distance(y, z) + 1e-12);
  }
}
