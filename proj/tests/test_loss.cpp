#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "affkit/loss.hpp"
#include "oracles.hpp"

using namespace affkit;

namespace {

PairBatch random_batch(std::mt19937_64& rng, size_t n, size_t dim, double span = 1.0) {
  std::uniform_real_distribution<double> u(0.0, span);
  PairBatch b;
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> s(dim), sdot(dim);
    for (double& v : s) v = u(rng);
    for (double& v : sdot) v = u(rng);
    b.s.push_back(std::move(s));
    b.sdot.push_back(std::move(sdot));
  }
  return b;
}

std::vector<double> flatten(const PairBatch& b) {
  std::vector<double> x;
  for (const auto& v : b.s) x.insert(x.end(), v.begin(), v.end());
  for (const auto& v : b.sdot) x.insert(x.end(), v.begin(), v.end());
  return x;
}

PairBatch unflatten(const std::vector<double>& x, size_t n, size_t dim) {
  PairBatch b;
  for (size_t i = 0; i < n; ++i)
    b.s.emplace_back(x.begin() + i * dim, x.begin() + (i + 1) * dim);
  for (size_t i = 0; i < n; ++i)
    b.sdot.emplace_back(x.begin() + (n + i) * dim, x.begin() + (n + i + 1) * dim);
  return b;
}

std::vector<double> flatten_grads(const LossResult& r) {
  std::vector<double> g;
  for (const auto& v : r.grad_s) g.insert(g.end(), v.begin(), v.end());
  for (const auto& v : r.grad_sdot) g.insert(g.end(), v.begin(), v.end());
  return g;
}

// True when the batch sits safely away from hinge and mining switching sets.
bool away_from_switching(const PairBatch& b, double gap = 0.05) {
  const size_t n = b.n();
  for (size_t i = 0; i < n; ++i) {
    const double pos = detail::vec_distance(b.s[i], b.sdot[i]);
    if (pos < gap) return false;
    std::vector<double> cand;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      cand.push_back(detail::vec_distance(b.s[j], b.sdot[i]));
      cand.push_back(detail::vec_distance(b.s[i], b.sdot[j]));
    }
    std::sort(cand.begin(), cand.end());
    if (cand.size() >= 2 && cand[1] - cand[0] < gap) return false;
    if (std::abs(1.0 + pos - cand[0]) < gap) return false;
  }
  return true;
}

// Value of the margin loss with the mined negative descriptors frozen at the
// base point; its gradient is the hard negative-constant gradient.
double frozen_negative_value(const PairBatch& base, const PairBatch& b) {
  const size_t n = base.n();
  double value = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const HardestNegative neg = hardest_negative(base, i);
    const std::vector<double> frozen =
        neg.side == NegativeSide::Sdot ? base.sdot[neg.index] : base.s[neg.index];
    const std::vector<double>& anchor =
        neg.side == NegativeSide::Sdot ? b.s[i] : b.sdot[i];
    const double pos = detail::vec_distance(b.s[i], b.sdot[i]);
    const double dneg = detail::vec_distance(anchor, frozen);
    value += std::max(0.0, 1.0 + pos - dneg) / static_cast<double>(n);
  }
  return value;
}

}  // namespace

TEST_CASE("hardest negative on a hand-placed batch") {
  // d(s_0, sdot_1) = 0.5 is the unique minimum among the 2(n-1) candidates
  PairBatch b;
  b.s = {{0.0, 0.0}, {3.0, 0.0}};
  b.sdot = {{0.0, 2.0}, {0.5, 0.0}};
  const HardestNegative n0 = hardest_negative(b, 0);
  CHECK(n0.dist == Catch::Approx(0.5));
  CHECK(n0.index == 1);
  CHECK(n0.side == NegativeSide::Sdot);
}

TEST_CASE("hardest negative tie-break picks smallest j, s-side first") {
  // coincident pairs at integer coordinates: all candidate distances exact
  PairBatch b;
  b.s = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  b.sdot = b.s;
  // i = 0: j = 1 and j = 2 both at distance exactly 1; smallest j wins and the
  // s-side candidate is taken before the sdot-side one
  const HardestNegative n0 = hardest_negative(b, 0);
  CHECK(n0.dist == 1.0);
  CHECK(n0.index == 1);
  CHECK(n0.side == NegativeSide::S);
  // i = 1, 2: unique closest pair is pair 0, with an exact s/sdot tie at j = 0
  for (size_t i : {size_t(1), size_t(2)}) {
    const HardestNegative n = hardest_negative(b, i);
    CHECK(n.dist == 1.0);
    CHECK(n.index == 0);
    CHECK(n.side == NegativeSide::S);
  }
}

TEST_CASE("hardest negative equals the exhaustive oracle") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 2 + trial % 7;
    const PairBatch b = random_batch(rng, n, 1 + trial % 5);
    for (size_t i = 0; i < n; ++i) {
      const HardestNegative got = hardest_negative(b, i);
      const oracle::BruteNegative want = oracle::brute_hardest_negative(b, i);
      CHECK(got.dist == want.dist);
      CHECK(got.index == want.index);
      CHECK((got.side == NegativeSide::S) == want.s_side);
    }
  }
}

TEST_CASE("hardest negative requires n >= 2") {
  PairBatch b;
  b.s = {{0.0}};
  b.sdot = {{1.0}};
  CHECK_THROWS_AS(hardest_negative(b, 0), BatchTooSmall);
}

TEST_CASE("posdist on identical pairs is zero with zero gradients") {
  PairBatch b;
  b.s = {{0.5, 0.25}, {0.75, 0.1}};
  b.sdot = b.s;
  const LossResult r = posdist_loss(b);
  CHECK(r.value == 0.0);
  for (const auto& g : r.grad_s)
    for (double v : g) CHECK(v == 0.0);
  for (const auto& g : r.grad_sdot)
    for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("posdist on a single 1-D pair at distance 2") {
  PairBatch b;
  b.s = {{0.0}};
  b.sdot = {{2.0}};
  const LossResult r = posdist_loss(b);
  CHECK(r.value == Catch::Approx(2.0));
  CHECK(r.grad_s[0][0] == Catch::Approx(-1.0));
  CHECK(r.grad_sdot[0][0] == Catch::Approx(1.0));
}

TEST_CASE("posdist gradients match finite differences") {
  std::mt19937_64 rng(56);
  for (int trial = 0; trial < 30; ++trial) {
    const size_t n = 2 + trial % 4, dim = 1 + trial % 4;
    PairBatch b = random_batch(rng, n, dim);
    if (!away_from_switching(b)) continue;
    const LossResult r = posdist_loss(b);
    const auto fd = oracle::fd_gradient(
        [&](const std::vector<double>& x) { return posdist_loss(unflatten(x, n, dim)).value; },
        flatten(b));
    const auto an = flatten_grads(r);
    for (size_t i = 0; i < an.size(); ++i) CHECK(oracle::rel_err(an[i], fd[i], 1e-4) < 1e-4);
  }
}

TEST_CASE("hardneg on a hand-placed 1-D batch") {
  PairBatch b;
  b.s = {{0.0}, {0.9}};
  b.sdot = {{0.4}, {1.2}};
  const LossResult r = hardneg_loss(b);
  // term 0: 1 + 0.4 - 0.5 = 0.9 (negative is s_1, s-side)
  // term 1: 1 + 0.3 - 0.5 = 0.8 (negative is sdot_0)
  CHECK(r.value == Catch::Approx(0.85));
  CHECK(r.grad_s[0][0] == Catch::Approx(-0.5));
  CHECK(r.grad_s[1][0] == Catch::Approx(-1.5));
  CHECK(r.grad_sdot[0][0] == Catch::Approx(1.5));
  CHECK(r.grad_sdot[1][0] == Catch::Approx(0.5));
}

TEST_CASE("hardneg value when all margins are satisfied is zero") {
  PairBatch b;
  b.s = {{0.0}, {10.0}};
  b.sdot = {{0.0}, {10.0}};
  const LossResult r = hardneg_loss(b);
  CHECK(r.value == 0.0);
}

TEST_CASE("hardneg gradients match finite differences") {
  std::mt19937_64 rng(57);
  int tested = 0;
  for (int trial = 0; trial < 200 && tested < 30; ++trial) {
    const size_t n = 2 + trial % 5, dim = 2 + trial % 3;
    PairBatch b = random_batch(rng, n, dim);
    if (!away_from_switching(b)) continue;
    ++tested;
    const LossResult r = hardneg_loss(b);
    const auto fd = oracle::fd_gradient(
        [&](const std::vector<double>& x) { return hardneg_loss(unflatten(x, n, dim)).value; },
        flatten(b));
    const auto an = flatten_grads(r);
    for (size_t i = 0; i < an.size(); ++i) CHECK(oracle::rel_err(an[i], fd[i], 1e-4) < 1e-4);
  }
  CHECK(tested == 30);
}

TEST_CASE("hardnegc value equals hardneg value exactly") {
  std::mt19937_64 rng(58);
  for (int trial = 0; trial < 100; ++trial) {
    const PairBatch b = random_batch(rng, 8, 16);
    CHECK(hardnegc_loss(b).value == hardneg_loss(b).value);
  }
}

TEST_CASE("descriptor appearing only as a hardest negative gets zero hardnegc gradient") {
  // s_1 = sdot_1 coincide; their own margin is satisfied, and s_1 is the
  // mined negative of pair 0.
  PairBatch b;
  b.s = {{0.0}, {1.8}};
  b.sdot = {{0.6}, {1.8}};
  const HardestNegative n0 = hardest_negative(b, 0);
  REQUIRE(n0.side == NegativeSide::S);
  REQUIRE(n0.index == 1);

  const LossResult c = hardnegc_loss(b);
  const LossResult h = hardneg_loss(b);
  CHECK(c.value == h.value);
  CHECK(c.grad_s[1][0] == 0.0);  // exact zero vector
  CHECK(std::abs(h.grad_s[1][0]) > 0.0);

  // positive-pair components of the active term agree between the losses
  CHECK(c.grad_s[0][0] == h.grad_s[0][0]);
}

TEST_CASE("hardnegc gradients match finite differences of the frozen-negative value") {
  std::mt19937_64 rng(59);
  int tested = 0;
  for (int trial = 0; trial < 200 && tested < 30; ++trial) {
    const size_t n = 2 + trial % 5, dim = 2 + trial % 3;
    PairBatch b = random_batch(rng, n, dim);
    if (!away_from_switching(b)) continue;
    ++tested;
    const LossResult r = hardnegc_loss(b);
    const auto fd = oracle::fd_gradient(
        [&](const std::vector<double>& x) {
          return frozen_negative_value(b, unflatten(x, n, dim));
        },
        flatten(b));
    const auto an = flatten_grads(r);
    for (size_t i = 0; i < an.size(); ++i) CHECK(oracle::rel_err(an[i], fd[i], 1e-4) < 1e-4);
  }
  CHECK(tested == 30);
}

TEST_CASE("all losses are non-negative; posdist vanishes only on coincident pairs") {
  std::mt19937_64 rng(60);
  for (int trial = 0; trial < 50; ++trial) {
    const PairBatch b = random_batch(rng, 4, 3);
    CHECK(posdist_loss(b).value >= 0.0);
    CHECK(hardneg_loss(b).value >= 0.0);
    CHECK(hardnegc_loss(b).value >= 0.0);
    if (posdist_loss(b).value == 0.0)
      for (size_t i = 0; i < b.n(); ++i)
        CHECK(detail::vec_distance(b.s[i], b.sdot[i]) == 0.0);
  }
}

TEST_CASE("adam leaves parameters unchanged under zero gradients") {
  std::vector<double> params = {1.0, -2.0, 3.0};
  AdamState st(3, 0.1);
  adam_step(params, {0.0, 0.0, 0.0}, st);
  CHECK(params == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("adam minimizes a quadratic") {
  std::vector<double> x = {0.0};
  AdamState st(1, 0.1);
  for (int i = 0; i < 400; ++i) {
    const std::vector<double> g = {2.0 * (x[0] - 3.0)};
    adam_step(x, g, st);
  }
  CHECK(std::abs(x[0] - 3.0) < 0.01);
}

TEST_CASE("adam first step has magnitude lr in the gradient sign direction") {
  std::vector<double> x = {5.0};
  AdamState st(1, 0.05);
  adam_step(x, {0.123}, st);
  // bias-corrected first step is lr * g / (|g| + eps') ~ lr * sign(g)
  CHECK(x[0] == Catch::Approx(5.0 - 0.05).epsilon(1e-4));

  std::vector<double> y = {5.0};
  AdamState st2(1, 0.05);
  adam_step(y, {-9.0}, st2);
  CHECK(y[0] == Catch::Approx(5.0 + 0.05).epsilon(1e-4));
}

TEST_CASE("adam rejects shape mismatches") {
  std::vector<double> x = {1.0, 2.0};
  AdamState st(3, 0.1);
  std::vector<double> g = {0.0, 0.0};
  CHECK_THROWS_AS(adam_step(x, g, st), PreconditionError);
}
