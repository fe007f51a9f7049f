#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "affkit/descriptor.hpp"
#include "affkit/errors.hpp"

namespace affkit {

// n matched descriptor pairs (s_i, sdot_i), stored as plain value vectors.
struct PairBatch {
  std::vector<std::vector<double>> s;
  std::vector<std::vector<double>> sdot;

  size_t n() const { return s.size(); }
  size_t dim() const { return s.empty() ? 0 : s.front().size(); }

  void validate() const {
    if (s.size() != sdot.size())
      throw KindMismatch("PairBatch: sides must have equal length");
    for (const auto& v : s)
      if (v.size() != dim()) throw KindMismatch("PairBatch: ragged descriptors");
    for (const auto& v : sdot)
      if (v.size() != dim()) throw KindMismatch("PairBatch: ragged descriptors");
  }

  static PairBatch from_descriptors(const std::vector<Descriptor>& a,
                                    const std::vector<Descriptor>& b) {
    if (a.size() != b.size())
      throw KindMismatch("PairBatch: sides must have equal length");
    PairBatch batch;
    for (size_t i = 0; i < a.size(); ++i) {
      if (a[i].kind != b[i].kind || a[i].values.size() != b[i].values.size())
        throw KindMismatch("PairBatch: descriptor kind/length mismatch");
      batch.s.push_back(a[i].values);
      batch.sdot.push_back(b[i].values);
    }
    batch.validate();
    return batch;
  }
};

struct LossResult {
  double value = 0.0;
  std::vector<std::vector<double>> grad_s;
  std::vector<std::vector<double>> grad_sdot;
};

namespace detail {

inline double vec_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Full cross matrix D[i][j] = d(s_i, sdot_j).
inline std::vector<std::vector<double>> cross_distances(const PairBatch& b) {
  const size_t n = b.n();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) d[i][j] = vec_distance(b.s[i], b.sdot[j]);
  return d;
}

}  // namespace detail

enum class NegativeSide { S, Sdot };

struct HardestNegative {
  double dist = 0.0;
  size_t index = 0;        // index j of the mined negative
  NegativeSide side = NegativeSide::S;
};

// d(s_i, N) = min( min_{j != i} d(s_i, sdot_j), min_{j != i} d(s_j, sdot_i) ).
// Ties resolve to the smallest j, s-side before sdot-side.
inline HardestNegative hardest_negative(const PairBatch& b, size_t i) {
  b.validate();
  const size_t n = b.n();
  if (n < 2) throw BatchTooSmall("hardest_negative: need at least 2 pairs");
  HardestNegative best;
  bool found = false;
  for (size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    const double ds = detail::vec_distance(b.s[j], b.sdot[i]);
    if (!found || ds < best.dist) {
      best = {ds, j, NegativeSide::S};
      found = true;
    }
    const double dsdot = detail::vec_distance(b.s[i], b.sdot[j]);
    if (dsdot < best.dist) best = {dsdot, j, NegativeSide::Sdot};
  }
  return best;
}

namespace detail {

inline LossResult zero_result(const PairBatch& b) {
  LossResult r;
  r.grad_s.assign(b.n(), std::vector<double>(b.dim(), 0.0));
  r.grad_sdot.assign(b.n(), std::vector<double>(b.dim(), 0.0));
  return r;
}

// Adds g * (a - b)/|a - b| to grad_a and the opposite to grad_b.
// Zero-distance pairs contribute nothing (subgradient choice).
inline void add_distance_grad(const std::vector<double>& a, const std::vector<double>& b,
                              double dist, double g, std::vector<double>* grad_a,
                              std::vector<double>* grad_b) {
  if (dist <= 0.0) return;
  for (size_t k = 0; k < a.size(); ++k) {
    const double u = g * (a[k] - b[k]) / dist;
    if (grad_a) (*grad_a)[k] += u;
    if (grad_b) (*grad_b)[k] -= u;
  }
}

// Shared forward/backward for the margin losses. When negative_grad is false
// the mined negative descriptor receives no gradient (hard negative-constant
// behavior); the anchor side of the negative distance is kept either way.
inline LossResult margin_loss(const PairBatch& b, bool negative_grad) {
  b.validate();
  const size_t n = b.n();
  if (n < 2) throw BatchTooSmall("margin loss: need at least 2 pairs for mining");
  LossResult r = zero_result(b);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    const double pos = vec_distance(b.s[i], b.sdot[i]);
    const HardestNegative neg = hardest_negative(b, i);
    const double term = 1.0 + pos - neg.dist;
    if (term <= 0.0) continue;
    r.value += term * inv_n;
    add_distance_grad(b.s[i], b.sdot[i], pos, inv_n, &r.grad_s[i], &r.grad_sdot[i]);
    if (neg.side == NegativeSide::Sdot) {
      // d(s_i, sdot_j): anchor s_i, negative sdot_j.
      add_distance_grad(b.s[i], b.sdot[neg.index], neg.dist, -inv_n, &r.grad_s[i],
                        negative_grad ? &r.grad_sdot[neg.index] : nullptr);
    } else {
      // d(s_j, sdot_i): anchor sdot_i, negative s_j.
      add_distance_grad(b.s[neg.index], b.sdot[i], neg.dist, -inv_n,
                        negative_grad ? &r.grad_s[neg.index] : nullptr,
                        &r.grad_sdot[i]);
    }
  }
  return r;
}

}  // namespace detail

// Mean positive descriptor distance.
inline LossResult posdist_loss(const PairBatch& b) {
  b.validate();
  const size_t n = b.n();
  if (n == 0) throw BatchTooSmall("posdist_loss: empty batch");
  LossResult r = detail::zero_result(b);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    const double pos = detail::vec_distance(b.s[i], b.sdot[i]);
    r.value += pos * inv_n;
    detail::add_distance_grad(b.s[i], b.sdot[i], pos, inv_n, &r.grad_s[i], &r.grad_sdot[i]);
  }
  return r;
}

// Hard-negative triplet margin loss with in-batch mining; gradients flow
// through both the positive and the mined negative distance.
inline LossResult hardneg_loss(const PairBatch& b) {
  return detail::margin_loss(b, true);
}

// Same value as hardneg_loss, but the derivative with respect to the mined
// negative descriptor is defined to be zero.
inline LossResult hardnegc_loss(const PairBatch& b) {
  return detail::margin_loss(b, false);
}

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamState(size_t dim = 0, double lr_ = 0.001)
      : lr(lr_), m(dim, 0.0), v(dim, 0.0) {}
};

// Standard Adam update with bias correction; params are updated in place.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamState& st) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw PreconditionError("adam_step: parameter/gradient/state shape mismatch");
  ++st.t;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grads[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grads[i] * grads[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

}  // namespace affkit
