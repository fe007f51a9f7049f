#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "affkit/errors.hpp"

namespace affkit {

// Row-major single-channel float image with values in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

  float at(int x, int y) const {
    return pixels[static_cast<size_t>(y) * width + x];
  }
  float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }

  // Edge-clamped access.
  float at_clamped(int x, int y) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return at(x, y);
  }
};

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1, 1.0);
  if (radius == 0) return k;
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[i + radius] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace detail

// Separable Gaussian blur, kernel radius ceil(3*sigma), edge-clamped borders.
inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  if (sigma < 0.0) throw PreconditionError("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0) return img;
  const std::vector<double> k = detail::gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);

  GrayImage tmp(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[i + radius] * img.at_clamped(x + i, y);
      tmp.at(x, y) = static_cast<float>(acc);
    }
  }
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[i + radius] * tmp.at_clamped(x, y + i);
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

// Central-difference gradients, borders clamped.
inline std::pair<GrayImage, GrayImage> gradients(const GrayImage& img) {
  GrayImage gx(img.width, img.height);
  GrayImage gy(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      gx.at(x, y) = 0.5f * (img.at_clamped(x + 1, y) - img.at_clamped(x - 1, y));
      gy.at(x, y) = 0.5f * (img.at_clamped(x, y + 1) - img.at_clamped(x, y - 1));
    }
  }
  return {std::move(gx), std::move(gy)};
}

struct ScaleLevel {
  GrayImage image;
  double sigma = 0.0;  // blur relative to this octave's sampling
  int octave = 0;
  int level = 0;
};

// Gaussian pyramid: octaves halve resolution, levels within an octave follow
// sigma_k = initial_sigma * 2^(k / levels_per_octave).
struct ScaleSpace {
  int levels_per_octave = 3;
  double initial_sigma = 1.6;
  std::vector<std::vector<ScaleLevel>> octaves;

  // Scale factor from octave-local coordinates to original-image coordinates.
  static double octave_scale(int octave) {
    return static_cast<double>(1 << octave);
  }
};

namespace detail {

inline GrayImage downsample2(const GrayImage& img) {
  GrayImage out((img.width + 1) / 2, (img.height + 1) / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(x, y) = img.at(2 * x, 2 * y);
  return out;
}

}  // namespace detail

inline ScaleSpace build_pyramid(const GrayImage& img, int levels_per_octave = 3,
                                double initial_sigma = 1.6) {
  if (levels_per_octave < 1)
    throw PreconditionError("build_pyramid: levels_per_octave must be >= 1");
  ScaleSpace ss;
  ss.levels_per_octave = levels_per_octave;
  ss.initial_sigma = initial_sigma;

  const int min_dim = 32;
  GrayImage base = gaussian_blur(img, initial_sigma);
  if (std::min(img.width, img.height) < min_dim) {
    // Degenerate single-level pyramid for tiny inputs.
    ss.octaves.push_back({ScaleLevel{std::move(base), initial_sigma, 0, 0}});
    return ss;
  }

  for (int octave = 0; std::min(base.width, base.height) >= min_dim; ++octave) {
    std::vector<ScaleLevel> levels;
    levels.push_back(ScaleLevel{base, initial_sigma, octave, 0});
    for (int k = 1; k < levels_per_octave; ++k) {
      const double sk = initial_sigma * std::pow(2.0, double(k) / levels_per_octave);
      const double sk_prev = initial_sigma * std::pow(2.0, double(k - 1) / levels_per_octave);
      const double delta = std::sqrt(sk * sk - sk_prev * sk_prev);
      levels.push_back(
          ScaleLevel{gaussian_blur(levels.back().image, delta), sk, octave, k});
    }
    // Next octave base: blur the current base to 2*initial_sigma, then halve.
    const double to_double = std::sqrt(4.0 * initial_sigma * initial_sigma -
                                       initial_sigma * initial_sigma);
    GrayImage next = detail::downsample2(gaussian_blur(base, to_double));
    ss.octaves.push_back(std::move(levels));
    base = std::move(next);
  }
  return ss;
}

}  // namespace affkit
