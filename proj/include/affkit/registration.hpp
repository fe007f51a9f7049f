#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "affkit/descriptor.hpp"
#include "affkit/errors.hpp"
#include "affkit/eval.hpp"
#include "affkit/geometry.hpp"
#include "affkit/image.hpp"
#include "affkit/loss.hpp"
#include "affkit/patch.hpp"

namespace affkit {

enum class LossKind { PosDist, HardNeg, HardNegC };
enum class Coupling { Coupled, Independent };
enum class GradientMode { Analytic, FiniteDiff };

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::PosDist: return "posdist";
    case LossKind::HardNeg: return "hardneg";
    case LossKind::HardNegC: return "hardnegc";
  }
  return "?";
}

inline LossResult evaluate_loss(LossKind kind, const PairBatch& b) {
  switch (kind) {
    case LossKind::PosDist: return posdist_loss(b);
    case LossKind::HardNeg: return hardneg_loss(b);
    case LossKind::HardNegC: return hardnegc_loss(b);
  }
  throw PreconditionError("evaluate_loss: unknown loss kind");
}

// Fraction of frames that collapsed: elongation above the limit (or a
// non-positive determinant, which counts as fully collapsed).
inline double collapsed_fraction(const std::vector<Mat2>& shapes, double limit = 6.0) {
  if (shapes.empty()) return 0.0;
  int collapsed = 0;
  for (const Mat2& a : shapes)
    if (!(a.det() > 0.0) || elongation(a) > limit) ++collapsed;
  return static_cast<double>(collapsed) / static_cast<double>(shapes.size());
}

// ---------------------------------------------------------------------------
// Toy optimization: free 2-D points standing in for descriptors.

struct ToyConfig {
  int n_pairs = 5;
  int dims = 2;
  int steps = 150;
  LossKind loss = LossKind::HardNegC;
  double lr = 0.01;
  std::uint64_t seed = 0;
};

struct ToyStep {
  double loss = 0.0;
  std::vector<std::vector<double>> s;
  std::vector<std::vector<double>> sdot;
};

struct ToyResult {
  std::vector<ToyStep> steps;  // steps + 1 records, index 0 is the initial state
};

inline double mean_positive_distance(const ToyStep& st) {
  if (st.s.empty()) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < st.s.size(); ++i)
    acc += detail::vec_distance(st.s[i], st.sdot[i]);
  return acc / static_cast<double>(st.s.size());
}

// Smallest distance between any two points belonging to different pairs.
inline double min_cross_pair_distance(const ToyStep& st) {
  const size_t n = st.s.size();
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      best = std::min(best, detail::vec_distance(st.s[i], st.s[j]));
      best = std::min(best, detail::vec_distance(st.s[i], st.sdot[j]));
      best = std::min(best, detail::vec_distance(st.sdot[i], st.sdot[j]));
    }
  }
  return best;
}

// Minimizes the configured loss over free point pairs with Adam, recording
// the full trajectory for plotting.
inline ToyResult toy_experiment(const ToyConfig& cfg) {
  if (cfg.n_pairs < 2) throw PreconditionError("toy_experiment: need at least 2 pairs");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int n = cfg.n_pairs;
  const int d = cfg.dims;
  std::vector<double> params(static_cast<size_t>(2 * n * d));
  for (double& v : params) v = unit(rng);

  auto unpack = [&](const std::vector<double>& p) {
    PairBatch b;
    b.s.resize(n);
    b.sdot.resize(n);
    for (int i = 0; i < n; ++i) {
      b.s[i].assign(p.begin() + static_cast<long>(i) * d, p.begin() + static_cast<long>(i + 1) * d);
      b.sdot[i].assign(p.begin() + static_cast<long>(n + i) * d,
                       p.begin() + static_cast<long>(n + i + 1) * d);
    }
    return b;
  };

  ToyResult result;
  AdamState adam(params.size(), cfg.lr);
  for (int step = 0; step <= cfg.steps; ++step) {
    const PairBatch batch = unpack(params);
    const LossResult loss = evaluate_loss(cfg.loss, batch);
    result.steps.push_back(ToyStep{loss.value, batch.s, batch.sdot});
    if (step == cfg.steps) break;
    std::vector<double> grad(params.size(), 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k) {
        grad[static_cast<size_t>(i) * d + k] = loss.grad_s[i][k];
        grad[static_cast<size_t>(n + i) * d + k] = loss.grad_sdot[i][k];
      }
    adam_step(params, grad, adam);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Random affine shape perturbations.

// T = R(phi) * R(-psi) * diag(t, 1) * R(psi), det-normalized to 1, with
// t ~ U[1, tilt_max] and psi ~ U[0, pi). The rotation phi is shared between
// the two outputs when rotation_tied is set.
inline std::pair<Mat2, Mat2> random_affine_perturbation(std::mt19937_64& rng,
                                                        double tilt_max,
                                                        bool rotation_tied) {
  if (tilt_max < 1.0)
    throw PreconditionError("random_affine_perturbation: tilt_max must be >= 1");
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> half_angle(0.0, std::numbers::pi);
  std::uniform_real_distribution<double> tilt_dist(1.0, tilt_max);

  const double phi = angle(rng);
  const double phi_dot = rotation_tied ? phi : angle(rng);

  auto make = [&](double rot) {
    const double psi = half_angle(rng);
    const double t = tilt_dist(rng);
    if (t == 1.0) return rotation(rot);
    const Mat2 tilt = rotation(-psi) * Mat2::diag(t, 1.0) * rotation(psi);
    return rotation(rot) * (tilt * (1.0 / std::sqrt(t)));
  };
  const Mat2 t1 = make(phi);
  const Mat2 t2 = make(phi_dot);
  return {t1, t2};
}

// ---------------------------------------------------------------------------
// Descriptor-driven affine shape registration.

struct RegistrationConfig {
  LossKind loss = LossKind::HardNegC;
  DescriptorKind descriptor = DescriptorKind::RawPixels;
  Coupling coupling = Coupling::Coupled;
  int steps = 150;
  double lr = 0.005;
  double noise_tilt = 1.0;         // tilt_max of the initial perturbation; <= 1 disables
  bool noise_rotation_tied = true;
  GradientMode gradient = GradientMode::Analytic;
  std::uint64_t seed = 0;
  int patch_size = 32;
  double mr_scale = 3.0;
  double ratio_threshold = 0.8;
  double px_threshold = 3.0;
  double fd_step = 1e-3;
  double max_clamped = 0.1;        // drop frames with more clamped samples at init

  void validate() const {
    if (gradient == GradientMode::Analytic && descriptor != DescriptorKind::RawPixels)
      throw PreconditionError(
          "RegistrationConfig: analytic gradients are only available for raw pixels");
    if (steps < 0 || patch_size < 16 || !(mr_scale > 0.0))
      throw PreconditionError("RegistrationConfig: invalid steps/patch/mr settings");
  }
};

struct TrajectoryRecord {
  int step = 0;
  double loss = 0.0;
  double geometric_err = 0.0;
  double collapsed_frac = 0.0;
  double match_score = 0.0;
};

using Trajectory = std::vector<TrajectoryRecord>;

namespace detail {

inline std::vector<double> describe_patch(const Patch& raw, DescriptorKind kind) {
  switch (kind) {
    case DescriptorKind::RawPixels:
      return raw_pixel_descriptor(normalize_patch(raw)).values;
    case DescriptorKind::SIFT:
      return sift_descriptor(raw).values;
    case DescriptorKind::RootSIFT:
      return rootsift(sift_descriptor(raw)).values;
  }
  throw PreconditionError("describe_patch: unknown descriptor kind");
}

// dL/dA for the raw-pixel analytic chain: loss -> descriptor -> patch
// normalization -> bilinear warp Jacobian.
inline std::array<double, 4> chain_raw_pixels(const Patch& normalized,
                                              const PatchJacobian& jac,
                                              const std::vector<double>& dl_ds) {
  const std::vector<double> draw = normalize_backward(normalized, dl_ds);
  std::array<double, 4> g{0.0, 0.0, 0.0, 0.0};
  for (size_t p = 0; p < draw.size(); ++p)
    for (int k = 0; k < 4; ++k) g[k] += draw[p] * jac.d_a[p * 4 + k];
  return g;
}

// dL/dA by central finite differences of the descriptor on the shape entries.
inline std::array<double, 4> chain_finite_diff(const GrayImage& img, const Vec2& center,
                                               const Mat2& shape, const RegistrationConfig& cfg,
                                               const std::vector<double>& dl_ds) {
  std::array<double, 4> g{0.0, 0.0, 0.0, 0.0};
  for (int k = 0; k < 4; ++k) {
    Mat2 plus = shape;
    Mat2 minus = shape;
    double* pp = k == 0 ? &plus.m11 : k == 1 ? &plus.m12 : k == 2 ? &plus.m21 : &plus.m22;
    double* pm = k == 0 ? &minus.m11 : k == 1 ? &minus.m12 : k == 2 ? &minus.m21 : &minus.m22;
    *pp += cfg.fd_step;
    *pm -= cfg.fd_step;
    const std::vector<double> dp = describe_patch(
        sample_patch(img, AffineFrame::from(center, plus), cfg.patch_size, cfg.mr_scale),
        cfg.descriptor);
    const std::vector<double> dm = describe_patch(
        sample_patch(img, AffineFrame::from(center, minus), cfg.patch_size, cfg.mr_scale),
        cfg.descriptor);
    double acc = 0.0;
    for (size_t d = 0; d < dl_ds.size(); ++d)
      acc += dl_ds[d] * (dp[d] - dm[d]) / (2.0 * cfg.fd_step);
    g[k] = acc;
  }
  return g;
}

}  // namespace detail

// Registers the affine shapes of corresponding features by gradient descent
// on a descriptor loss. Frame centers stay fixed: the reference centers come
// from the detections, the target centers from the homography. Only the 2x2
// shape matrices are optimized. Pairs whose frames leave the image or lose a
// positive determinant are frozen in place and keep their last descriptors
// for the per-step metrics.
inline Trajectory register_shapes(const GrayImage& img_ref, const GrayImage& img_tgt,
                                  const Homography& h,
                                  const std::vector<AffineFrame>& frames,
                                  const RegistrationConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);

  struct PairState {
    Vec2 c_ref, c_tgt;
    Mat2 a_ref, a_tgt;
    bool alive = true;
    std::vector<double> desc_ref, desc_tgt;
  };
  std::vector<PairState> pairs;

  for (const AffineFrame& f : frames) {
    PairState p;
    p.c_ref = f.center();
    p.a_ref = f.shape();
    AffineFrame tgt;
    try {
      tgt = reproject_frame(f, h);
    } catch (const ReprojectionError&) {
      continue;
    }
    if (!(tgt.shape().det() > 0.0)) continue;
    p.c_tgt = tgt.center();
    p.a_tgt = tgt.shape();
    if (cfg.noise_tilt > 1.0) {
      const auto [t, tdot] =
          random_affine_perturbation(rng, cfg.noise_tilt, cfg.noise_rotation_tied);
      p.a_ref = p.a_ref * t;
      p.a_tgt = cfg.coupling == Coupling::Coupled ? p.a_ref : p.a_tgt * tdot;
    }
    if (cfg.coupling == Coupling::Coupled) p.a_tgt = p.a_ref;

    // Keep only pairs that can be sampled cleanly in both images.
    try {
      const Patch pr = sample_patch(img_ref, AffineFrame::from(p.c_ref, p.a_ref),
                                    cfg.patch_size, cfg.mr_scale);
      const Patch pt = sample_patch(img_tgt, AffineFrame::from(p.c_tgt, p.a_tgt),
                                    cfg.patch_size, cfg.mr_scale);
      if (pr.clamped_fraction > cfg.max_clamped || pt.clamped_fraction > cfg.max_clamped)
        continue;
    } catch (const Error&) {
      continue;
    }
    pairs.push_back(std::move(p));
  }
  const size_t n = pairs.size();
  if (n == 0) throw EmptyExperiment("register_shapes: no frames survived patch sampling");

  const size_t per_pair = cfg.coupling == Coupling::Coupled ? 4 : 8;
  std::vector<double> params(n * per_pair, 0.0);
  auto store_params = [&](size_t i) {
    const PairState& p = pairs[i];
    double* q = &params[i * per_pair];
    q[0] = p.a_ref.m11;
    q[1] = p.a_ref.m12;
    q[2] = p.a_ref.m21;
    q[3] = p.a_ref.m22;
    if (per_pair == 8) {
      q[4] = p.a_tgt.m11;
      q[5] = p.a_tgt.m12;
      q[6] = p.a_tgt.m21;
      q[7] = p.a_tgt.m22;
    }
  };
  auto load_params = [&](size_t i) {
    PairState& p = pairs[i];
    if (!p.alive) return;
    const double* q = &params[i * per_pair];
    p.a_ref = {q[0], q[1], q[2], q[3]};
    p.a_tgt = per_pair == 8 ? Mat2{q[4], q[5], q[6], q[7]} : p.a_ref;
  };
  for (size_t i = 0; i < n; ++i) store_params(i);

  AdamState adam(params.size(), cfg.lr);
  Trajectory traj;
  const DescriptorKind kind = cfg.descriptor;

  for (int step = 0; step <= cfg.steps; ++step) {
    // Evaluate patches and descriptors for alive pairs.
    std::vector<Patch> norm_ref(n), norm_tgt(n);
    std::vector<PatchJacobian> jac_ref(n), jac_tgt(n);
    const bool analytic = cfg.gradient == GradientMode::Analytic;
    for (size_t i = 0; i < n; ++i) {
      PairState& p = pairs[i];
      if (!p.alive) continue;
      if (!(p.a_ref.det() > 1e-8) || !(p.a_tgt.det() > 1e-8)) {
        p.alive = false;
        continue;
      }
      try {
        Patch raw_ref, raw_tgt;
        if (analytic) {
          auto [pr, jr] = sample_patch_with_jacobian(
              img_ref, AffineFrame::from(p.c_ref, p.a_ref), cfg.patch_size, cfg.mr_scale);
          auto [pt, jt] = sample_patch_with_jacobian(
              img_tgt, AffineFrame::from(p.c_tgt, p.a_tgt), cfg.patch_size, cfg.mr_scale);
          raw_ref = std::move(pr);
          raw_tgt = std::move(pt);
          jac_ref[i] = std::move(jr);
          jac_tgt[i] = std::move(jt);
        } else {
          raw_ref = sample_patch(img_ref, AffineFrame::from(p.c_ref, p.a_ref),
                                 cfg.patch_size, cfg.mr_scale);
          raw_tgt = sample_patch(img_tgt, AffineFrame::from(p.c_tgt, p.a_tgt),
                                 cfg.patch_size, cfg.mr_scale);
        }
        norm_ref[i] = normalize_patch(raw_ref);
        norm_tgt[i] = normalize_patch(raw_tgt);
        p.desc_ref = kind == DescriptorKind::RawPixels
                         ? raw_pixel_descriptor(norm_ref[i]).values
                         : detail::describe_patch(raw_ref, kind);
        p.desc_tgt = kind == DescriptorKind::RawPixels
                         ? raw_pixel_descriptor(norm_tgt[i]).values
                         : detail::describe_patch(raw_tgt, kind);
      } catch (const Error&) {
        p.alive = false;
      }
    }

    // Batch over alive pairs.
    PairBatch batch;
    std::vector<size_t> batch_index;
    for (size_t i = 0; i < n; ++i) {
      if (!pairs[i].alive) continue;
      batch.s.push_back(pairs[i].desc_ref);
      batch.sdot.push_back(pairs[i].desc_tgt);
      batch_index.push_back(i);
    }

    LossResult loss;
    bool have_loss = false;
    if (batch.n() >= 2 || (cfg.loss == LossKind::PosDist && batch.n() >= 1)) {
      loss = evaluate_loss(cfg.loss, batch);
      have_loss = true;
    }

    // Per-step metrics over all pairs, frozen ones included.
    TrajectoryRecord rec;
    rec.step = step;
    rec.loss = have_loss ? loss.value : 0.0;
    {
      std::vector<std::pair<Mat2, Mat2>> shape_pairs;
      std::vector<Mat2> all_shapes;
      std::vector<AffineFrame> fa, fb;
      std::vector<Descriptor> da, db;
      for (const PairState& p : pairs) {
        shape_pairs.emplace_back(p.a_ref, p.a_tgt);
        all_shapes.push_back(p.a_ref);
        if (cfg.coupling == Coupling::Independent) all_shapes.push_back(p.a_tgt);
        fa.push_back(AffineFrame::from(p.c_ref, p.a_ref));
        fb.push_back(AffineFrame::from(p.c_tgt, p.a_tgt));
        da.push_back({kind, p.desc_ref});
        db.push_back({kind, p.desc_tgt});
      }
      rec.geometric_err = geometric_error(shape_pairs);
      rec.collapsed_frac = collapsed_fraction(all_shapes);
      rec.match_score = matching_score(fa, fb, da, db, h, img_tgt.width, img_tgt.height,
                                       img_ref.width, img_ref.height, cfg.ratio_threshold,
                                       cfg.px_threshold);
    }
    traj.push_back(rec);
    if (step == cfg.steps) break;

    // Gradients with respect to the shape entries.
    std::vector<double> grad(params.size(), 0.0);
    if (have_loss) {
      for (size_t bi = 0; bi < batch_index.size(); ++bi) {
        const size_t i = batch_index[bi];
        PairState& p = pairs[i];
        std::array<double, 4> g_ref{}, g_tgt{};
        try {
          if (analytic) {
            g_ref = detail::chain_raw_pixels(norm_ref[i], jac_ref[i], loss.grad_s[bi]);
            g_tgt = detail::chain_raw_pixels(norm_tgt[i], jac_tgt[i], loss.grad_sdot[bi]);
          } else {
            g_ref = detail::chain_finite_diff(img_ref, p.c_ref, p.a_ref, cfg, loss.grad_s[bi]);
            g_tgt = detail::chain_finite_diff(img_tgt, p.c_tgt, p.a_tgt, cfg, loss.grad_sdot[bi]);
          }
        } catch (const Error&) {
          p.alive = false;
          continue;
        }
        double* q = &grad[i * per_pair];
        if (per_pair == 4) {
          for (int k = 0; k < 4; ++k) q[k] = g_ref[k] + g_tgt[k];
        } else {
          for (int k = 0; k < 4; ++k) q[k] = g_ref[k];
          for (int k = 0; k < 4; ++k) q[4 + k] = g_tgt[k];
        }
      }
    }
    adam_step(params, grad, adam);
    for (size_t i = 0; i < n; ++i) load_params(i);
  }
  return traj;
}

}  // namespace affkit
