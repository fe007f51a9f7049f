#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "affkit/errors.hpp"
#include "affkit/geometry.hpp"
#include "affkit/image.hpp"

namespace affkit {

// Fixed-size intensity grid sampled through an affine warp. When normalized,
// mean is 0 and standard deviation 1 (constant raw patches become all zeros).
struct Patch {
  int size = 0;
  std::vector<float> values;       // row-major size*size
  bool normalized = false;
  double norm_mean = 0.0;          // statistics removed by normalization
  double norm_std = 0.0;
  double clamped_fraction = 0.0;   // fraction of samples outside the image

  float at(int x, int y) const { return values[static_cast<size_t>(y) * size + x]; }
  float& at(int x, int y) { return values[static_cast<size_t>(y) * size + x]; }

  GrayImage as_image() const {
    GrayImage img(size, size);
    img.pixels = values;
    return img;
  }
};

// Derivatives of every patch value with respect to the frame parameters.
// Entries are zero at samples outside the valid bilinear domain.
struct PatchJacobian {
  int size = 0;
  std::vector<double> d_a;  // size*size*4, order (a11, a12, a21, a22)
  std::vector<double> d_c;  // size*size*2, order (cx, cy)
};

namespace detail {

struct BilinearSample {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  bool valid = false;
};

inline BilinearSample bilinear(const GrayImage& img, double px, double py) {
  BilinearSample s;
  s.valid = px >= 0.0 && px <= img.width - 1.0 && py >= 0.0 && py <= img.height - 1.0;
  const double pxc = std::clamp(px, 0.0, static_cast<double>(img.width - 1));
  const double pyc = std::clamp(py, 0.0, static_cast<double>(img.height - 1));
  int x0 = static_cast<int>(std::floor(pxc));
  int y0 = static_cast<int>(std::floor(pyc));
  x0 = std::min(x0, img.width - 2);
  y0 = std::min(y0, img.height - 2);
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  const double fx = pxc - x0;
  const double fy = pyc - y0;
  const double i00 = img.at(x0, y0);
  const double i10 = img.at(x0 + 1, y0);
  const double i01 = img.at(x0, y0 + 1);
  const double i11 = img.at(x0 + 1, y0 + 1);
  s.value = (1.0 - fy) * ((1.0 - fx) * i00 + fx * i10) +
            fy * ((1.0 - fx) * i01 + fx * i11);
  s.dx = (1.0 - fy) * (i10 - i00) + fy * (i11 - i01);
  s.dy = (1.0 - fx) * (i01 - i00) + fx * (i11 - i10);
  return s;
}

inline void sample_patch_impl(const GrayImage& img, const AffineFrame& f, int size,
                              double mr_scale, Patch& patch, PatchJacobian* jac) {
  if (!(f.shape().det() > 0.0))
    throw DegenerateFrame("sample_patch: frame determinant must be positive");
  if (size < 2) throw PreconditionError("sample_patch: patch size must be >= 2");
  if (img.width < 2 || img.height < 2)
    throw PreconditionError("sample_patch: image too small for bilinear sampling");

  const Mat2 m = f.shape() * mr_scale;
  patch.size = size;
  patch.values.assign(static_cast<size_t>(size) * size, 0.0f);
  patch.normalized = false;
  patch.norm_mean = 0.0;
  patch.norm_std = 0.0;
  if (jac) {
    jac->size = size;
    jac->d_a.assign(static_cast<size_t>(size) * size * 4, 0.0);
    jac->d_c.assign(static_cast<size_t>(size) * size * 2, 0.0);
  }

  long n_clamped = 0;
  const double grid_step = 2.0 / (size - 1);
  for (int iy = 0; iy < size; ++iy) {
    const double uy = -1.0 + grid_step * iy;
    for (int ix = 0; ix < size; ++ix) {
      const double ux = -1.0 + grid_step * ix;
      const double px = f.cx + m.m11 * ux + m.m12 * uy;
      const double py = f.cy + m.m21 * ux + m.m22 * uy;
      const BilinearSample s = bilinear(img, px, py);
      patch.at(ix, iy) = static_cast<float>(s.value);
      if (!s.valid) ++n_clamped;
      if (jac && s.valid) {
        const size_t base = (static_cast<size_t>(iy) * size + ix) * 4;
        jac->d_a[base + 0] = s.dx * mr_scale * ux;
        jac->d_a[base + 1] = s.dx * mr_scale * uy;
        jac->d_a[base + 2] = s.dy * mr_scale * ux;
        jac->d_a[base + 3] = s.dy * mr_scale * uy;
        const size_t cbase = (static_cast<size_t>(iy) * size + ix) * 2;
        jac->d_c[cbase + 0] = s.dx;
        jac->d_c[cbase + 1] = s.dy;
      }
    }
  }
  const long total = static_cast<long>(size) * size;
  patch.clamped_fraction = static_cast<double>(n_clamped) / total;
  if (n_clamped == total)
    throw OutOfBounds("sample_patch: frame lies entirely outside the image");
}

}  // namespace detail

// Samples an S x S patch over the grid u in [-1, 1]^2 at locations
// center + mr_scale * A * u, with bilinear interpolation and edge clamping.
inline Patch sample_patch(const GrayImage& img, const AffineFrame& f, int size = 32,
                          double mr_scale = 3.0) {
  Patch p;
  detail::sample_patch_impl(img, f, size, mr_scale, p, nullptr);
  return p;
}

inline std::pair<Patch, PatchJacobian> sample_patch_with_jacobian(
    const GrayImage& img, const AffineFrame& f, int size = 32, double mr_scale = 3.0) {
  Patch p;
  PatchJacobian j;
  detail::sample_patch_impl(img, f, size, mr_scale, p, &j);
  return {std::move(p), std::move(j)};
}

// Subtracts the patch mean and divides by the patch standard deviation.
// A constant patch maps to all zeros.
inline Patch normalize_patch(const Patch& p) {
  Patch out = p;
  const size_t n = p.values.size();
  if (n == 0) return out;
  double mean = 0.0;
  for (float v : p.values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (float v : p.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double sd = std::sqrt(var);
  if (sd < 1e-10) {
    for (float& v : out.values) v = 0.0f;
    out.normalized = true;
    out.norm_mean = mean;
    out.norm_std = 0.0;
    return out;
  }
  for (float& v : out.values) v = static_cast<float>((v - mean) / sd);
  out.normalized = true;
  out.norm_mean = mean;
  out.norm_std = sd;
  return out;
}

// Pulls a gradient with respect to the normalized values back to the raw
// patch values (centering + scaling chain rule).
inline std::vector<double> normalize_backward(const Patch& normalized,
                                              const std::vector<double>& grad_out) {
  const size_t n = normalized.values.size();
  if (!normalized.normalized || grad_out.size() != n)
    throw PreconditionError("normalize_backward: needs a normalized patch and matching gradient");
  std::vector<double> grad_in(n, 0.0);
  if (normalized.norm_std == 0.0) return grad_in;
  double g_mean = 0.0;
  double gy_mean = 0.0;
  for (size_t i = 0; i < n; ++i) {
    g_mean += grad_out[i];
    gy_mean += grad_out[i] * normalized.values[i];
  }
  g_mean /= static_cast<double>(n);
  gy_mean /= static_cast<double>(n);
  for (size_t i = 0; i < n; ++i)
    grad_in[i] = (grad_out[i] - g_mean - normalized.values[i] * gy_mean) /
                 normalized.norm_std;
  return grad_in;
}

}  // namespace affkit
