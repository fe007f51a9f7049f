#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "affkit/errors.hpp"
#include "affkit/mat2.hpp"

namespace affkit {

// A local feature: center in pixels plus the 2x2 matrix A that maps the unit
// circle onto the feature ellipse. det(A) > 0 for any valid frame.
struct AffineFrame {
  double cx = 0.0, cy = 0.0;
  double a11 = 1.0, a12 = 0.0, a21 = 0.0, a22 = 1.0;

  Vec2 center() const { return {cx, cy}; }
  Mat2 shape() const { return {a11, a12, a21, a22}; }
  void set_shape(const Mat2& m) {
    a11 = m.m11;
    a12 = m.m12;
    a21 = m.m21;
    a22 = m.m22;
  }

  static AffineFrame from(const Vec2& c, const Mat2& m) {
    AffineFrame f;
    f.cx = c.x;
    f.cy = c.y;
    f.set_shape(m);
    return f;
  }
};

// A = lambda * R(alpha) * A', with A' lower-triangular, det 1, positive
// diagonal. A'' = A' - I is the residual shape.
struct FrameDecomposition {
  double lambda = 1.0;  // isotropic scale, sqrt(det A)
  double alpha = 0.0;   // rotation angle in (-pi, pi]
  Mat2 aprime = Mat2::identity();
  Mat2 adoubleprime = Mat2::zero();
};

inline FrameDecomposition decompose(const Mat2& a) {
  const double det = a.det();
  if (!(det > 0.0) || !a.finite())
    throw DegenerateFrame("decompose: matrix determinant must be positive");
  const double lambda = std::sqrt(det);
  const Mat2 m = a * (1.0 / lambda);  // det 1
  // R(-alpha) * m must have a zero upper-right entry.
  double alpha = std::atan2(m.m12, m.m22);
  if (alpha <= -std::numbers::pi) alpha = std::numbers::pi;
  Mat2 aprime = rotation(-alpha) * m;
  aprime.m12 = 0.0;  // zero by construction; drop rounding residue
  FrameDecomposition d;
  d.lambda = lambda;
  d.alpha = alpha;
  // store the residual and rebuild A' from it so A' = I + A'' holds bit-exactly
  d.adoubleprime = aprime - Mat2::identity();
  d.aprime = Mat2::identity() + d.adoubleprime;
  return d;
}

inline FrameDecomposition decompose(const AffineFrame& f) {
  return decompose(f.shape());
}

inline Mat2 compose(const FrameDecomposition& d) {
  return (rotation(d.alpha) * d.aprime) * d.lambda;
}

inline Mat2 residual_shape(const Mat2& aprime) {
  return aprime - Mat2::identity();
}

// Long-to-short axis ratio of the frame ellipse (ratio of singular values).
inline double elongation(const Mat2& a) {
  if (!(a.det() > 0.0))
    throw DegenerateFrame("elongation: matrix determinant must be positive");
  const auto [s1, s2] = singular_values(a);
  return s1 / s2;
}

// Determinant-normalized squared Frobenius error summed over frame pairs.
inline double geometric_error(const std::vector<std::pair<Mat2, Mat2>>& pairs) {
  double e = 0.0;
  for (const auto& [a, adot] : pairs) {
    const double denom = a.det() + adot.det();
    if (denom <= 0.0) continue;
    e += 2.0 * (a - adot).frobenius_sq() / denom;
  }
  return e;
}

// 3x3 projective transform, stored row-major, normalized so h33 = 1.
struct Homography {
  std::array<double, 9> h = {1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Homography identity() { return {}; }

  static Homography from_array(const std::array<double, 9>& raw) {
    Homography hg;
    hg.h = raw;
    hg.normalize();
    return hg;
  }

  void normalize() {
    const double w = h[8];
    if (w == 0.0 || !std::isfinite(w))
      throw DegenerateFrame("homography: bottom-right entry must be nonzero");
    for (double& v : h) v /= w;
  }

  double det() const {
    return h[0] * (h[4] * h[8] - h[5] * h[7]) -
           h[1] * (h[3] * h[8] - h[5] * h[6]) +
           h[2] * (h[3] * h[7] - h[4] * h[6]);
  }

  Homography inverse() const {
    const double d = det();
    if (d == 0.0 || !std::isfinite(d))
      throw DegenerateFrame("homography: singular matrix has no inverse");
    std::array<double, 9> inv;
    inv[0] = (h[4] * h[8] - h[5] * h[7]) / d;
    inv[1] = (h[2] * h[7] - h[1] * h[8]) / d;
    inv[2] = (h[1] * h[5] - h[2] * h[4]) / d;
    inv[3] = (h[5] * h[6] - h[3] * h[8]) / d;
    inv[4] = (h[0] * h[8] - h[2] * h[6]) / d;
    inv[5] = (h[2] * h[3] - h[0] * h[5]) / d;
    inv[6] = (h[3] * h[7] - h[4] * h[6]) / d;
    inv[7] = (h[1] * h[6] - h[0] * h[7]) / d;
    inv[8] = (h[0] * h[4] - h[1] * h[3]) / d;
    return from_array(inv);
  }

  Vec2 apply(const Vec2& p) const {
    const double w = h[6] * p.x + h[7] * p.y + h[8];
    if (!(w > 1e-12) || !std::isfinite(w))
      throw ReprojectionError("homography: point maps to infinity or negative depth");
    const double x = (h[0] * p.x + h[1] * p.y + h[2]) / w;
    const double y = (h[3] * p.x + h[4] * p.y + h[5]) / w;
    if (!std::isfinite(x) || !std::isfinite(y))
      throw ReprojectionError("homography: non-finite image of point");
    return {x, y};
  }

  // 2x2 Jacobian of the projective map at p.
  Mat2 jacobian(const Vec2& p) const {
    const double w = h[6] * p.x + h[7] * p.y + h[8];
    if (!(w > 1e-12) || !std::isfinite(w))
      throw ReprojectionError("homography: point maps to infinity or negative depth");
    const double u = (h[0] * p.x + h[1] * p.y + h[2]) / w;
    const double v = (h[3] * p.x + h[4] * p.y + h[5]) / w;
    return {(h[0] - u * h[6]) / w, (h[1] - u * h[7]) / w,
            (h[3] - v * h[6]) / w, (h[4] - v * h[7]) / w};
  }
};

// First-order affine transport of a frame: the center moves projectively, the
// shape by the Jacobian of the map at the center.
inline AffineFrame reproject_frame(const AffineFrame& f, const Homography& hg) {
  const Vec2 c = hg.apply(f.center());
  const Mat2 a = hg.jacobian(f.center()) * f.shape();
  return AffineFrame::from(c, a);
}

struct OverlapOptions {
  bool normalize = true;        // rescale so the reference ellipse has radius 30 px
  double norm_radius = 30.0;    // equivalent radius after normalization
  double grid_per_px = 2.0;     // rasterization samples per pixel per axis
};

// Overlap error 1 - |E1 cap E2| / |E1 cup E2| of the two frame ellipses
// {x : (x-c)^T (A A^T)^-1 (x-c) <= 1}, computed by rasterization.
inline double overlap_error(const AffineFrame& f1, const AffineFrame& f2,
                            const OverlapOptions& opt = {}) {
  Mat2 a1 = f1.shape();
  Mat2 a2 = f2.shape();
  if (!(a1.det() > 0.0) || !(a2.det() > 0.0))
    throw DegenerateFrame("overlap_error: frames must have positive determinant");
  Vec2 c1{0.0, 0.0};
  Vec2 c2 = f2.center() - f1.center();
  if (opt.normalize) {
    const double s = opt.norm_radius / std::sqrt(a1.det());
    a1 = a1 * s;
    a2 = a2 * s;
    c2 = c2 * s;
  }

  const Mat2 q1 = (a1 * a1.transpose()).inverse();
  const Mat2 q2 = (a2 * a2.transpose()).inverse();
  const Mat2 e1 = a1 * a1.transpose();
  const Mat2 e2 = a2 * a2.transpose();
  // Axis-aligned bounding box of an ellipse: half extents sqrt(diag(A A^T)).
  const double h1x = std::sqrt(e1.m11), h1y = std::sqrt(e1.m22);
  const double h2x = std::sqrt(e2.m11), h2y = std::sqrt(e2.m22);
  if (c1.x + h1x < c2.x - h2x || c2.x + h2x < c1.x - h1x ||
      c1.y + h1y < c2.y - h2y || c2.y + h2y < c1.y - h1y)
    return 1.0;

  const double x0 = std::min(c1.x - h1x, c2.x - h2x);
  const double x1 = std::max(c1.x + h1x, c2.x + h2x);
  const double y0 = std::min(c1.y - h1y, c2.y - h2y);
  const double y1 = std::max(c1.y + h1y, c2.y + h2y);
  const double step = 1.0 / opt.grid_per_px;
  const long nx = std::max(1L, static_cast<long>(std::ceil((x1 - x0) / step)));
  const long ny = std::max(1L, static_cast<long>(std::ceil((y1 - y0) / step)));

  auto inside = [](const Mat2& q, const Vec2& c, double x, double y) {
    const double dx = x - c.x;
    const double dy = y - c.y;
    return q.m11 * dx * dx + (q.m12 + q.m21) * dx * dy + q.m22 * dy * dy <= 1.0;
  };

  long inter = 0, uni = 0;
  for (long iy = 0; iy < ny; ++iy) {
    const double y = y0 + (iy + 0.5) * step;
    for (long ix = 0; ix < nx; ++ix) {
      const double x = x0 + (ix + 0.5) * step;
      const bool in1 = inside(q1, c1, x, y);
      const bool in2 = inside(q2, c2, x, y);
      inter += (in1 && in2);
      uni += (in1 || in2);
    }
  }
  if (uni == 0) return 1.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace affkit
