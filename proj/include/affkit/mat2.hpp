#pragma once

#include <cmath>
#include <utility>

namespace affkit {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

// Row-major 2x2 matrix. Small enough that everything is by value.
struct Mat2 {
  double m11 = 1.0, m12 = 0.0;
  double m21 = 0.0, m22 = 1.0;

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static Mat2 zero() { return {0.0, 0.0, 0.0, 0.0}; }
  static Mat2 diag(double a, double b) { return {a, 0.0, 0.0, b}; }

  double det() const { return m11 * m22 - m12 * m21; }
  double trace() const { return m11 + m22; }
  double frobenius_sq() const {
    return m11 * m11 + m12 * m12 + m21 * m21 + m22 * m22;
  }
  bool finite() const {
    return std::isfinite(m11) && std::isfinite(m12) && std::isfinite(m21) &&
           std::isfinite(m22);
  }

  Mat2 transpose() const { return {m11, m21, m12, m22}; }
  Mat2 inverse() const {
    const double d = det();
    return {m22 / d, -m12 / d, -m21 / d, m11 / d};
  }

  Mat2 operator+(const Mat2& o) const {
    return {m11 + o.m11, m12 + o.m12, m21 + o.m21, m22 + o.m22};
  }
  Mat2 operator-(const Mat2& o) const {
    return {m11 - o.m11, m12 - o.m12, m21 - o.m21, m22 - o.m22};
  }
  Mat2 operator*(const Mat2& o) const {
    return {m11 * o.m11 + m12 * o.m21, m11 * o.m12 + m12 * o.m22,
            m21 * o.m11 + m22 * o.m21, m21 * o.m12 + m22 * o.m22};
  }
  Mat2 operator*(double s) const { return {m11 * s, m12 * s, m21 * s, m22 * s}; }
  Vec2 operator*(const Vec2& v) const {
    return {m11 * v.x + m12 * v.y, m21 * v.x + m22 * v.y};
  }
};

// Rotation matrix convention used throughout: R(a) = [cos a, sin a; -sin a, cos a].
inline Mat2 rotation(double alpha) {
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  return {c, s, -s, c};
}

// Singular values of an arbitrary 2x2 matrix, largest first.
// Uses the stable closed form on A^T A; the small value is recovered from the
// determinant to avoid cancellation.
inline std::pair<double, double> singular_values(const Mat2& a) {
  const double t = a.frobenius_sq();                 // s1^2 + s2^2
  const double d = a.det();                          // s1 * s2 (signed)
  const double disc = std::max(0.0, t * t - 4.0 * d * d);
  const double s1_sq = 0.5 * (t + std::sqrt(disc));
  const double s2_sq = s1_sq > 0.0 ? (d * d) / s1_sq : 0.0;
  return {std::sqrt(s1_sq), std::sqrt(s2_sq)};
}

// Eigen-decomposition of a symmetric 2x2 matrix [a, b; b, c].
// Returns eigenvalues (largest first) and the angle of the first eigenvector.
struct SymEig2 {
  double eig1 = 0.0;
  double eig2 = 0.0;
  double angle = 0.0;
};

inline SymEig2 sym_eig(const Mat2& s) {
  const double a = s.m11;
  const double b = 0.5 * (s.m12 + s.m21);
  const double c = s.m22;
  const double mean = 0.5 * (a + c);
  const double r = std::hypot(0.5 * (a - c), b);
  SymEig2 e;
  e.eig1 = mean + r;
  e.eig2 = mean - r;
  e.angle = 0.5 * std::atan2(2.0 * b, a - c);
  return e;
}

// Inverse square root of a symmetric positive definite 2x2 matrix.
inline Mat2 inv_sqrt_sym(const Mat2& s) {
  const SymEig2 e = sym_eig(s);
  const double c = std::cos(e.angle);
  const double n = std::sin(e.angle);
  const double i1 = 1.0 / std::sqrt(e.eig1);
  const double i2 = 1.0 / std::sqrt(e.eig2);
  // Q diag(i1, i2) Q^T with Q = [c, -n; n, c]
  return {c * c * i1 + n * n * i2, c * n * (i1 - i2),
          c * n * (i1 - i2), n * n * i1 + c * c * i2};
}

}  // namespace affkit
