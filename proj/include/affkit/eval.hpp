#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include "affkit/descriptor.hpp"
#include "affkit/errors.hpp"
#include "affkit/geometry.hpp"

namespace affkit {

struct Match {
  size_t index_a = 0;
  size_t index_b = 0;
  double dist_first = 0.0;
  double dist_second = 0.0;
  double ratio = 0.0;
};

// One-directional first-to-second-nearest-neighbor matching; a match is kept
// when ratio < ratio_threshold (strict).
inline std::vector<Match> match_ratio_test(const std::vector<Descriptor>& desc_a,
                                           const std::vector<Descriptor>& desc_b,
                                           double ratio_threshold = 0.8,
                                           bool mutual = false) {
  if (desc_b.size() < 2)
    throw BatchTooSmall("match_ratio_test: need at least 2 candidates for a ratio");
  std::vector<Match> matches;
  for (size_t ia = 0; ia < desc_a.size(); ++ia) {
    size_t best = 0;
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();
    for (size_t ib = 0; ib < desc_b.size(); ++ib) {
      const double d = distance(desc_a[ia], desc_b[ib]);
      if (d < d1) {
        d2 = d1;
        d1 = d;
        best = ib;
      } else if (d < d2) {
        d2 = d;
      }
    }
    const double ratio = d2 == 0.0 ? 1.0 : d1 / d2;
    if (ratio < ratio_threshold) matches.push_back({ia, best, d1, d2, ratio});
  }
  if (mutual) {
    // Keep a match only if its b index prefers this a index back.
    std::vector<Match> kept;
    for (const Match& m : matches) {
      size_t best_a = 0;
      double d1 = std::numeric_limits<double>::infinity();
      for (size_t ia = 0; ia < desc_a.size(); ++ia) {
        const double d = distance(desc_a[ia], desc_b[m.index_b]);
        if (d < d1) {
          d1 = d;
          best_a = ia;
        }
      }
      if (best_a == m.index_a) kept.push_back(m);
    }
    return kept;
  }
  return matches;
}

// A match is correct when the reprojected center of frame_a lies within
// px_threshold (inclusive) of frame_b's center.
inline int count_correct_matches(const std::vector<Match>& matches,
                                 const std::vector<AffineFrame>& frames_a,
                                 const std::vector<AffineFrame>& frames_b,
                                 const Homography& h, double px_threshold = 3.0) {
  int correct = 0;
  for (const Match& m : matches) {
    Vec2 p;
    try {
      p = h.apply(frames_a[m.index_a].center());
    } catch (const ReprojectionError&) {
      continue;
    }
    const Vec2 q = frames_b[m.index_b].center();
    if ((p - q).norm() <= px_threshold) ++correct;
  }
  return correct;
}

struct RepeatabilityReport {
  int n_correspondences = 0;
  double repeatability = 0.0;
  int n_common_a = 0;
  int n_common_b = 0;
};

namespace detail {

inline bool center_inside(const Vec2& p, int width, int height) {
  return p.x >= 0.0 && p.x <= width - 1.0 && p.y >= 0.0 && p.y <= height - 1.0;
}

}  // namespace detail

// Mikolajczyk-style repeatability: frames of a are reprojected into image b,
// the common part of the scene is defined by center-inside-image after
// (back-)projection, and candidate pairs with overlap error < threshold
// (strict) are assigned greedily one-to-one by increasing overlap error.
inline RepeatabilityReport repeatability(const std::vector<AffineFrame>& frames_a,
                                         const std::vector<AffineFrame>& frames_b,
                                         const Homography& h, int width_b, int height_b,
                                         int width_a, int height_a,
                                         double overlap_threshold = 0.4,
                                         const OverlapOptions& overlap_opts = {}) {
  RepeatabilityReport rep;
  const Homography h_inv = h.inverse();

  std::vector<AffineFrame> proj_a;  // a-frames reprojected into image b
  for (const AffineFrame& f : frames_a) {
    try {
      const AffineFrame g = reproject_frame(f, h);
      if (detail::center_inside(g.center(), width_b, height_b) && g.shape().det() > 0.0)
        proj_a.push_back(g);
    } catch (const ReprojectionError&) {
    }
  }
  std::vector<AffineFrame> common_b;
  for (const AffineFrame& f : frames_b) {
    try {
      if (detail::center_inside(h_inv.apply(f.center()), width_a, height_a) &&
          f.shape().det() > 0.0)
        common_b.push_back(f);
    } catch (const ReprojectionError&) {
    }
  }
  rep.n_common_a = static_cast<int>(proj_a.size());
  rep.n_common_b = static_cast<int>(common_b.size());

  // Candidate pairs below the overlap threshold, cheapest error first.
  std::vector<std::tuple<double, size_t, size_t>> candidates;
  for (size_t ia = 0; ia < proj_a.size(); ++ia) {
    for (size_t ib = 0; ib < common_b.size(); ++ib) {
      const double err = overlap_error(proj_a[ia], common_b[ib], overlap_opts);
      if (err < overlap_threshold) candidates.emplace_back(err, ia, ib);
    }
  }
  std::sort(candidates.begin(), candidates.end());

  std::vector<bool> used_a(proj_a.size(), false);
  std::vector<bool> used_b(common_b.size(), false);
  for (const auto& [err, ia, ib] : candidates) {
    if (used_a[ia] || used_b[ib]) continue;
    used_a[ia] = true;
    used_b[ib] = true;
    ++rep.n_correspondences;
  }
  const int denom = std::min(rep.n_common_a, rep.n_common_b);
  rep.repeatability = denom > 0 ? static_cast<double>(rep.n_correspondences) / denom : 0.0;
  return rep;
}

// Correct ratio-test matches over the smaller common-region detection count.
inline double matching_score(const std::vector<AffineFrame>& frames_a,
                             const std::vector<AffineFrame>& frames_b,
                             const std::vector<Descriptor>& desc_a,
                             const std::vector<Descriptor>& desc_b, const Homography& h,
                             int width_b, int height_b, int width_a, int height_a,
                             double ratio_threshold = 0.8, double px_threshold = 3.0) {
  int common_a = 0;
  for (const AffineFrame& f : frames_a) {
    try {
      if (detail::center_inside(h.apply(f.center()), width_b, height_b)) ++common_a;
    } catch (const ReprojectionError&) {
    }
  }
  const Homography h_inv = h.inverse();
  int common_b = 0;
  for (const AffineFrame& f : frames_b) {
    try {
      if (detail::center_inside(h_inv.apply(f.center()), width_a, height_a)) ++common_b;
    } catch (const ReprojectionError&) {
    }
  }
  const int denom = std::min(common_a, common_b);
  if (denom <= 0) return 0.0;
  const std::vector<Match> matches = match_ratio_test(desc_a, desc_b, ratio_threshold);
  const int correct = count_correct_matches(matches, frames_a, frames_b, h, px_threshold);
  return static_cast<double>(correct) / denom;
}

}  // namespace affkit
