#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "affkit/geometry.hpp"
#include "affkit/image.hpp"
#include "affkit/patch.hpp"

namespace affkit {

struct Keypoint {
  double x = 0.0;       // original-image coordinates
  double y = 0.0;
  double sigma = 0.0;   // detection scale in original-image pixels
  double response = 0.0;
  int octave = 0;
  int level = 0;
};

struct DetectorParams {
  double threshold = 1e-6;
  int max_keypoints = 0;  // 0 = unlimited; otherwise keep strongest
};

namespace detail {

// sigma^4 * det(Hessian) response at a pixel of a blurred level.
inline double hessian_response(const GrayImage& img, int x, int y, double sigma) {
  const double ixx = img.at_clamped(x + 1, y) - 2.0 * img.at(x, y) + img.at_clamped(x - 1, y);
  const double iyy = img.at_clamped(x, y + 1) - 2.0 * img.at(x, y) + img.at_clamped(x, y - 1);
  const double ixy = 0.25 * (img.at_clamped(x + 1, y + 1) - img.at_clamped(x + 1, y - 1) -
                             img.at_clamped(x - 1, y + 1) + img.at_clamped(x - 1, y - 1));
  const double s2 = sigma * sigma;
  return s2 * s2 * (ixx * iyy - ixy * ixy);
}

}  // namespace detail

// Scale-space Hessian detector: strict 3x3x3 local maxima of the
// sigma^4 * det(Hessian) response, above threshold, with per-axis parabolic
// sub-pixel refinement. Keypoints are reported in original-image coordinates,
// strongest first.
inline std::vector<Keypoint> hessian_detect(const ScaleSpace& ss,
                                            const DetectorParams& par = {}) {
  std::vector<Keypoint> kps;
  for (const auto& octave : ss.octaves) {
    const int n_levels = static_cast<int>(octave.size());
    if (n_levels < 3) continue;
    // Response stack for the whole octave.
    std::vector<std::vector<double>> resp(n_levels);
    for (int k = 0; k < n_levels; ++k) {
      const GrayImage& img = octave[k].image;
      resp[k].assign(static_cast<size_t>(img.width) * img.height, 0.0);
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
          resp[k][static_cast<size_t>(y) * img.width + x] =
              detail::hessian_response(img, x, y, octave[k].sigma);
    }
    const int w = octave[0].image.width;
    const int h = octave[0].image.height;
    auto r = [&](int k, int x, int y) { return resp[k][static_cast<size_t>(y) * w + x]; };

    for (int k = 1; k + 1 < n_levels; ++k) {
      for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
          const double v = r(k, x, y);
          if (v <= par.threshold) continue;
          bool is_max = true;
          for (int dk = -1; dk <= 1 && is_max; ++dk)
            for (int dy = -1; dy <= 1 && is_max; ++dy)
              for (int dx = -1; dx <= 1 && is_max; ++dx) {
                if (dk == 0 && dy == 0 && dx == 0) continue;
                if (r(k + dk, x + dx, y + dy) >= v) is_max = false;
              }
          if (!is_max) continue;

          // Per-axis parabolic refinement.
          auto refine = [](double rm, double r0, double rp) {
            const double denom = rm - 2.0 * r0 + rp;
            if (denom == 0.0) return 0.0;
            return std::clamp(0.5 * (rm - rp) / denom, -0.5, 0.5);
          };
          const double dx = refine(r(k, x - 1, y), v, r(k, x + 1, y));
          const double dy = refine(r(k, x, y - 1), v, r(k, x, y + 1));
          const double scale = ScaleSpace::octave_scale(octave[k].octave);
          Keypoint kp;
          kp.x = (x + dx) * scale;
          kp.y = (y + dy) * scale;
          kp.sigma = octave[k].sigma * scale;
          kp.response = v;
          kp.octave = octave[k].octave;
          kp.level = k;
          kps.push_back(kp);
        }
      }
    }
  }
  std::sort(kps.begin(), kps.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.octave != b.octave) return a.octave < b.octave;
    if (a.level != b.level) return a.level < b.level;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (par.max_keypoints > 0 && kps.size() > static_cast<size_t>(par.max_keypoints))
    kps.resize(par.max_keypoints);
  return kps;
}

// Gaussian-weighted outer-product matrix of the window gradients, normalized
// by the total weight. A zero-gradient window yields the zero matrix.
inline Mat2 second_moment_matrix(const GrayImage& window, double weight_sigma) {
  const auto [gx, gy] = gradients(window);
  const double cx = 0.5 * (window.width - 1);
  const double cy = 0.5 * (window.height - 1);
  double m11 = 0.0, m12 = 0.0, m22 = 0.0, wsum = 0.0;
  for (int y = 0; y < window.height; ++y) {
    for (int x = 0; x < window.width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double w = std::exp(-0.5 * (dx * dx + dy * dy) / (weight_sigma * weight_sigma));
      const double vx = gx.at(x, y);
      const double vy = gy.at(x, y);
      m11 += w * vx * vx;
      m12 += w * vx * vy;
      m22 += w * vy * vy;
      wsum += w;
    }
  }
  if (wsum <= 0.0) return Mat2::zero();
  return {m11 / wsum, m12 / wsum, m12 / wsum, m22 / wsum};
}

enum class AdaptationOutcome {
  Converged,
  RejectedElongation,
  RejectedBoundary,
  RejectedNonConvergence,
};

struct AdaptationResult {
  AdaptationOutcome outcome = AdaptationOutcome::RejectedNonConvergence;
  AffineFrame frame;   // valid only when outcome == Converged
  int iterations = 0;

  bool converged() const { return outcome == AdaptationOutcome::Converged; }
};

struct AdaptParams {
  int max_iter = 16;
  double convergence_ratio = 1.05;  // eigenvalue ratio of mu at convergence
  int window_size = 19;             // samples across the measurement window
  double window_radius = 3.0;       // window half-extent in units of sigma
  double max_elongation = 6.0;
};

// Baumberg affine adaptation: iteratively whitens the second-moment matrix of
// the shape-normalized window until it is isotropic. The converged frame is
// sigma * A in original-image coordinates. Rejection rules: shapes running
// past the elongation limit, windows touching the image boundary, and
// non-convergence within max_iter.
inline AdaptationResult baumberg_adapt(const ScaleSpace& ss, const Keypoint& kp,
                                       const AdaptParams& par = {}) {
  AdaptationResult res;
  const auto& octave = ss.octaves.at(static_cast<size_t>(kp.octave));
  const ScaleLevel& lvl = octave.at(static_cast<size_t>(kp.level));
  const double inv_scale = 1.0 / ScaleSpace::octave_scale(kp.octave);
  const double local_sigma = kp.sigma * inv_scale;
  const Vec2 local_center{kp.x * inv_scale, kp.y * inv_scale};

  Mat2 shape = Mat2::identity();  // det-1 shape accumulated over iterations
  const double weight_sigma = par.window_size / 3.0;

  for (int iter = 1; iter <= par.max_iter; ++iter) {
    // Boundary check: the sampling window must stay inside the level image.
    const Mat2 m = shape * (par.window_radius * local_sigma);
    const double ext_x = std::abs(m.m11) + std::abs(m.m12);
    const double ext_y = std::abs(m.m21) + std::abs(m.m22);
    if (local_center.x - ext_x < 0.0 || local_center.y - ext_y < 0.0 ||
        local_center.x + ext_x > lvl.image.width - 1.0 ||
        local_center.y + ext_y > lvl.image.height - 1.0) {
      res.outcome = AdaptationOutcome::RejectedBoundary;
      res.iterations = iter;
      return res;
    }

    const AffineFrame window_frame =
        AffineFrame::from(local_center, shape * local_sigma);
    const Patch window =
        sample_patch(lvl.image, window_frame, par.window_size, par.window_radius);
    const Mat2 mu = second_moment_matrix(window.as_image(), weight_sigma);
    const SymEig2 eig = sym_eig(mu);
    if (!(eig.eig2 > 0.0)) {
      res.outcome = AdaptationOutcome::RejectedNonConvergence;
      res.iterations = iter;
      return res;
    }
    if (eig.eig1 / eig.eig2 <= par.convergence_ratio) {
      res.outcome = AdaptationOutcome::Converged;
      res.iterations = iter;
      res.frame = AffineFrame::from({kp.x, kp.y}, shape * kp.sigma);
      return res;
    }

    Mat2 next = shape * inv_sqrt_sym(mu);
    next = next * (1.0 / std::sqrt(next.det()));
    shape = next;
    if (elongation(shape) > par.max_elongation) {
      res.outcome = AdaptationOutcome::RejectedElongation;
      res.iterations = iter;
      return res;
    }
  }
  res.outcome = AdaptationOutcome::RejectedNonConvergence;
  res.iterations = par.max_iter;
  return res;
}

struct AdaptationStats {
  int converged = 0;
  int rejected_elongation = 0;
  int rejected_boundary = 0;
  int rejected_nonconvergence = 0;

  int total() const {
    return converged + rejected_elongation + rejected_boundary + rejected_nonconvergence;
  }
};

// Order-preserving filter-map of baumberg_adapt over a keypoint list.
inline std::pair<std::vector<AffineFrame>, AdaptationStats> adapt_all(
    const ScaleSpace& ss, const std::vector<Keypoint>& kps, const AdaptParams& par = {}) {
  std::vector<AffineFrame> frames;
  AdaptationStats stats;
  for (const Keypoint& kp : kps) {
    const AdaptationResult r = baumberg_adapt(ss, kp, par);
    switch (r.outcome) {
      case AdaptationOutcome::Converged:
        frames.push_back(r.frame);
        ++stats.converged;
        break;
      case AdaptationOutcome::RejectedElongation:
        ++stats.rejected_elongation;
        break;
      case AdaptationOutcome::RejectedBoundary:
        ++stats.rejected_boundary;
        break;
      case AdaptationOutcome::RejectedNonConvergence:
        ++stats.rejected_nonconvergence;
        break;
    }
  }
  return {std::move(frames), stats};
}

}  // namespace affkit
