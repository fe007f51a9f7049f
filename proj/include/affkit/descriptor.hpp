#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "affkit/errors.hpp"
#include "affkit/patch.hpp"

namespace affkit {

enum class DescriptorKind { SIFT, RootSIFT, RawPixels };

inline const char* to_string(DescriptorKind k) {
  switch (k) {
    case DescriptorKind::SIFT: return "sift";
    case DescriptorKind::RootSIFT: return "rootsift";
    case DescriptorKind::RawPixels: return "rawpixels";
  }
  return "?";
}

struct Descriptor {
  DescriptorKind kind = DescriptorKind::SIFT;
  std::vector<double> values;
};

// Euclidean distance between descriptors of the same kind and length.
inline double distance(const Descriptor& a, const Descriptor& b) {
  if (a.kind != b.kind || a.values.size() != b.values.size())
    throw KindMismatch("distance: descriptor kind/length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Lowe's 4x4x8 histogram-of-gradients descriptor over a fixed patch:
// bilinear spatial and linear orientation vote splatting, Gaussian weighting
// (sigma = S/2), L2 normalization, clamp at 0.2, renormalization.
inline Descriptor sift_descriptor(const Patch& p) {
  constexpr int kCells = 4;
  constexpr int kOriBins = 8;
  const int s = p.size;
  if (s < 16) throw PreconditionError("sift_descriptor: patch must be >= 16 px");

  std::vector<double> hist(kCells * kCells * kOriBins, 0.0);
  const double two_pi = 2.0 * std::numbers::pi;
  const double center = 0.5 * (s - 1);
  const double gsigma = 0.5 * s;
  const double cell = static_cast<double>(s) / kCells;

  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double gx = 0.5 * (p.at(std::min(x + 1, s - 1), y) - p.at(std::max(x - 1, 0), y));
      const double gy = 0.5 * (p.at(x, std::min(y + 1, s - 1)) - p.at(x, std::max(y - 1, 0)));
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += two_pi;

      const double dxc = x - center;
      const double dyc = y - center;
      const double w = std::exp(-0.5 * (dxc * dxc + dyc * dyc) / (gsigma * gsigma));

      const double bx = (x + 0.5) / cell - 0.5;
      const double by = (y + 0.5) / cell - 0.5;
      const int bx0 = static_cast<int>(std::floor(bx));
      const int by0 = static_cast<int>(std::floor(by));
      const double fx = bx - bx0;
      const double fy = by - by0;

      const double ob = theta * kOriBins / two_pi;
      const int ob0 = static_cast<int>(std::floor(ob)) % kOriBins;
      const double fo = ob - std::floor(ob);

      for (int dy = 0; dy <= 1; ++dy) {
        const int cy = by0 + dy;
        if (cy < 0 || cy >= kCells) continue;
        const double wy = dy == 0 ? 1.0 - fy : fy;
        for (int dx = 0; dx <= 1; ++dx) {
          const int cx = bx0 + dx;
          if (cx < 0 || cx >= kCells) continue;
          const double wx = dx == 0 ? 1.0 - fx : fx;
          for (int d_o = 0; d_o <= 1; ++d_o) {
            const int co = (ob0 + d_o) % kOriBins;
            const double wo = d_o == 0 ? 1.0 - fo : fo;
            hist[(cy * kCells + cx) * kOriBins + co] += mag * w * wy * wx * wo;
          }
        }
      }
    }
  }

  auto l2norm = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
  };
  double norm = l2norm(hist);
  if (norm > 0.0) {
    for (double& v : hist) v = std::min(v / norm, 0.2);
    norm = l2norm(hist);
    if (norm > 0.0)
      for (double& v : hist) v /= norm;
  }
  return {DescriptorKind::SIFT, std::move(hist)};
}

// L1-normalize then take the elementwise square root (Hellinger mapping).
inline Descriptor rootsift(const Descriptor& d) {
  if (d.kind != DescriptorKind::SIFT)
    throw KindMismatch("rootsift: input must be a SIFT descriptor");
  double l1 = 0.0;
  for (double v : d.values) l1 += std::abs(v);
  Descriptor out{DescriptorKind::RootSIFT, d.values};
  if (l1 > 0.0)
    for (double& v : out.values) v = std::sqrt(v / l1);
  return out;
}

// Flattened normalized patch values; the Jacobian with respect to the patch
// is the identity.
inline Descriptor raw_pixel_descriptor(const Patch& p) {
  if (!p.normalized)
    throw PreconditionError("raw_pixel_descriptor: patch must be normalized");
  Descriptor d;
  d.kind = DescriptorKind::RawPixels;
  d.values.assign(p.values.begin(), p.values.end());
  return d;
}

struct DominantOrientation {
  double angle = 0.0;  // radians in (-pi, pi]
  bool degenerate = false;
};

// Peak of the 36-bin Gaussian-weighted gradient-orientation histogram,
// box-smoothed twice, with parabolic sub-bin refinement.
inline DominantOrientation dominant_orientation(const Patch& p) {
  constexpr int kBins = 36;
  const int s = p.size;
  if (s < 16) throw PreconditionError("dominant_orientation: patch must be >= 16 px");

  const double two_pi = 2.0 * std::numbers::pi;
  const double center = 0.5 * (s - 1);
  const double gsigma = 0.5 * s;
  std::vector<double> hist(kBins, 0.0);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double gx = 0.5 * (p.at(std::min(x + 1, s - 1), y) - p.at(std::max(x - 1, 0), y));
      const double gy = 0.5 * (p.at(x, std::min(y + 1, s - 1)) - p.at(x, std::max(y - 1, 0)));
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += two_pi;
      const double dxc = x - center;
      const double dyc = y - center;
      const double w = std::exp(-0.5 * (dxc * dxc + dyc * dyc) / (gsigma * gsigma));
      // bins centered at i * (2pi/36)
      const int bin =
          static_cast<int>(std::floor(theta * kBins / two_pi + 0.5)) % kBins;
      hist[bin] += mag * w;
    }
  }

  double total = 0.0;
  for (double v : hist) total += v;
  if (total <= 0.0) return {0.0, true};

  // Two passes of a circular 3-tap box filter.
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<double> smoothed(kBins);
    for (int i = 0; i < kBins; ++i)
      smoothed[i] = (hist[(i + kBins - 1) % kBins] + hist[i] + hist[(i + 1) % kBins]) / 3.0;
    hist = std::move(smoothed);
  }

  int peak = 0;
  for (int i = 1; i < kBins; ++i)
    if (hist[i] > hist[peak]) peak = i;

  const double hm = hist[(peak + kBins - 1) % kBins];
  const double h0 = hist[peak];
  const double hp = hist[(peak + 1) % kBins];
  const double denom = hm - 2.0 * h0 + hp;
  const double offset = denom == 0.0 ? 0.0 : std::clamp(0.5 * (hm - hp) / denom, -0.5, 0.5);
  double angle = (peak + offset) * two_pi / kBins;
  if (angle > std::numbers::pi) angle -= two_pi;
  if (angle <= -std::numbers::pi) angle += two_pi;
  return {angle, false};
}

}  // namespace affkit
