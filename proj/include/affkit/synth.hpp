#pragma once

// Deterministic synthetic test imagery: blob textures, illumination changes,
// and affine warps with their ground-truth homographies.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "affkit/geometry.hpp"
#include "affkit/image.hpp"
#include "affkit/patch.hpp"

namespace affkit {

// Adds exp(-((x-cx)^2/(2*sx^2) + (y-cy)^2/(2*sy^2))) rotated by theta.
inline void add_gaussian_blob(GrayImage& img, double cx, double cy, double sx, double sy,
                              double theta, double amplitude) {
  const double c = std::cos(theta), s = std::sin(theta);
  const int r = static_cast<int>(std::ceil(3.5 * std::max(sx, sy)));
  const int x0 = std::max(0, static_cast<int>(cx) - r);
  const int x1 = std::min(img.width - 1, static_cast<int>(cx) + r);
  const int y0 = std::max(0, static_cast<int>(cy) - r);
  const int y1 = std::min(img.height - 1, static_cast<int>(cy) + r);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = c * dx + s * dy;
      const double v = -s * dx + c * dy;
      img.at(x, y) += static_cast<float>(
          amplitude * std::exp(-0.5 * (u * u / (sx * sx) + v * v / (sy * sy))));
    }
  }
}

// Textured image built from seeded random blobs, values in [0.05, 0.95].
inline GrayImage make_texture(int width, int height, std::uint64_t seed, int n_blobs = 300,
                              double sigma_min = 2.0, double sigma_max = 10.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, width - 1.0);
  std::uniform_real_distribution<double> uy(0.0, height - 1.0);
  std::uniform_real_distribution<double> usigma(sigma_min, sigma_max);
  std::uniform_real_distribution<double> uamp(0.15, 0.5);
  std::uniform_real_distribution<double> utheta(0.0, std::numbers::pi);
  std::uniform_real_distribution<double> uaspect(1.0, 2.0);
  std::bernoulli_distribution usign(0.5);

  GrayImage img(width, height, 0.5f);
  for (int i = 0; i < n_blobs; ++i) {
    const double cx = ux(rng), cy = uy(rng);
    const double s = usigma(rng);
    const double aspect = uaspect(rng);
    const double amp = uamp(rng) * (usign(rng) ? 1.0 : -1.0);
    add_gaussian_blob(img, cx, cy, s * aspect, s, utheta(rng), amp);
  }
  float lo = img.pixels[0], hi = img.pixels[0];
  for (float v : img.pixels) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const float span = std::max(1e-6f, hi - lo);
  for (float& v : img.pixels) v = 0.05f + 0.9f * (v - lo) / span;
  return img;
}

// Nonlinear illumination change: gamma curve plus a smooth multiplicative
// field of the given wavelength. Locally non-affine, so per-patch normalized
// descriptors cannot undo it.
inline GrayImage apply_illumination(const GrayImage& img, double gamma = 1.8,
                                    double gain_strength = 0.35,
                                    double wavelength = 48.0, double phase = 0.7) {
  GrayImage out(img.width, img.height);
  const double k = 2.0 * std::numbers::pi / wavelength;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double gain =
          1.0 - gain_strength * 0.5 *
                    (std::sin(k * x + phase) + std::cos(k * 0.77 * y - 2.0 * phase));
      const double v = std::pow(static_cast<double>(img.at(x, y)), gamma) * gain;
      out.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

// Warps the image by x2 = M (x1 - c) + c about the image center and returns
// the homography that maps image-1 coordinates to image-2 coordinates.
inline std::pair<GrayImage, Homography> warp_affine(const GrayImage& img, const Mat2& m) {
  const Vec2 c{0.5 * (img.width - 1), 0.5 * (img.height - 1)};
  const Mat2 minv = m.inverse();
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Vec2 src = minv * (Vec2{static_cast<double>(x), static_cast<double>(y)} - c) + c;
      out.at(x, y) = static_cast<float>(detail::bilinear(img, src.x, src.y).value);
    }
  }
  const Vec2 t = c - m * c;
  Homography h;
  h.h = {m.m11, m.m12, t.x, m.m21, m.m22, t.y, 0.0, 0.0, 1.0};
  return {std::move(out), h};
}

// Isotropic or anisotropic Gaussian blob test image on a flat background.
inline GrayImage make_blob_image(int width, int height, double cx, double cy, double sx,
                                 double sy, double theta = 0.0, double amplitude = 0.8) {
  GrayImage img(width, height, 0.1f);
  add_gaussian_blob(img, cx, cy, sx, sy, theta, amplitude);
  return img;
}

}  // namespace affkit
