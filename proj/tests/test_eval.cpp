#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "affkit/eval.hpp"
#include "oracles.hpp"

using namespace affkit;

namespace {

Descriptor onehot(size_t dim, size_t idx, double v = 1.0) {
  Descriptor d{DescriptorKind::RawPixels, std::vector<double>(dim, 0.0)};
  d.values[idx] = v;
  return d;
}

std::vector<Descriptor> random_descs(std::mt19937_64& rng, size_t n, size_t dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Descriptor> out;
  for (size_t i = 0; i < n; ++i) {
    Descriptor d{DescriptorKind::RawPixels, {}};
    for (size_t k = 0; k < dim; ++k) d.values.push_back(u(rng));
    out.push_back(std::move(d));
  }
  return out;
}

// Brute-force reference matcher.
std::vector<Match> brute_ratio_test(const std::vector<Descriptor>& a,
                                    const std::vector<Descriptor>& b, double thresh) {
  std::vector<Match> out;
  for (size_t ia = 0; ia < a.size(); ++ia) {
    std::vector<std::pair<double, size_t>> ds;
    for (size_t ib = 0; ib < b.size(); ++ib) ds.emplace_back(distance(a[ia], b[ib]), ib);
    std::sort(ds.begin(), ds.end());
    const double ratio = ds[1].first == 0.0 ? 1.0 : ds[0].first / ds[1].first;
    if (ratio < thresh)
      out.push_back({ia, ds[0].second, ds[0].first, ds[1].first, ratio});
  }
  return out;
}

}  // namespace

TEST_CASE("ratio test on orthonormal one-hot descriptors") {
  const std::vector<Descriptor> d = {onehot(4, 0), onehot(4, 1)};
  const std::vector<Match> m = match_ratio_test(d, d, 0.8);
  REQUIRE(m.size() == 2);
  CHECK(m[0].index_a == 0);
  CHECK(m[0].index_b == 0);
  CHECK(m[0].ratio == 0.0);
  CHECK(m[1].index_b == 1);
}

TEST_CASE("ratio test rejects equidistant candidates") {
  const std::vector<Descriptor> a = {onehot(4, 0)};
  // both candidates at the same distance from a[0]
  const std::vector<Descriptor> b = {onehot(4, 1), onehot(4, 2)};
  CHECK(match_ratio_test(a, b, 0.8).empty());
}

TEST_CASE("ratio test needs at least two candidates") {
  const std::vector<Descriptor> a = {onehot(4, 0)};
  const std::vector<Descriptor> b = {onehot(4, 1)};
  CHECK_THROWS_AS(match_ratio_test(a, b, 0.8), BatchTooSmall);
}

TEST_CASE("ratio test equals the brute-force oracle") {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_descs(rng, 6 + trial % 5, 4);
    const auto b = random_descs(rng, 5 + trial % 4, 4);
    const auto got = match_ratio_test(a, b, 0.8);
    const auto want = brute_ratio_test(a, b, 0.8);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].index_a == want[i].index_a);
      CHECK(got[i].index_b == want[i].index_b);
      CHECK(got[i].ratio == Catch::Approx(want[i].ratio));
    }
  }
}

TEST_CASE("ratio test is invariant to permutations of desc_b") {
  std::mt19937_64 rng(62);
  const auto a = random_descs(rng, 8, 4);
  auto b = random_descs(rng, 7, 4);
  const auto base = match_ratio_test(a, b, 0.8);

  std::vector<size_t> perm(b.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Descriptor> shuffled(b.size());
  for (size_t i = 0; i < b.size(); ++i) shuffled[perm[i]] = b[i];
  const auto moved = match_ratio_test(a, shuffled, 0.8);
  REQUIRE(moved.size() == base.size());
  for (size_t i = 0; i < base.size(); ++i) {
    CHECK(moved[i].index_a == base[i].index_a);
    CHECK(moved[i].index_b == perm[base[i].index_b]);
  }
}

TEST_CASE("lowering the ratio threshold never increases the match count") {
  std::mt19937_64 rng(63);
  const auto a = random_descs(rng, 12, 4);
  const auto b = random_descs(rng, 12, 4);
  size_t prev = match_ratio_test(a, b, 1.0).size();
  for (double t : {0.9, 0.8, 0.6, 0.4, 0.2, 0.0}) {
    const size_t count = match_ratio_test(a, b, t).size();
    CHECK(count <= prev);
    prev = count;
  }
  CHECK(match_ratio_test(a, b, 0.0).empty());
}

TEST_CASE("correctness threshold is inclusive at 3 px") {
  std::vector<AffineFrame> fa = {AffineFrame::from({0.0, 0.0}, Mat2::identity())};
  const std::vector<Match> m = {{0, 0, 0.1, 1.0, 0.1}};
  const Homography id = Homography::identity();
  for (const auto& [dx, expect] :
       std::vector<std::pair<double, int>>{{2.99, 1}, {3.0, 1}, {3.01, 0}}) {
    const std::vector<AffineFrame> fb = {AffineFrame::from({dx, 0.0}, Mat2::identity())};
    CHECK(count_correct_matches(m, fa, fb, id, 3.0) == expect);
  }
}

TEST_CASE("count_correct_matches equals a direct loop oracle") {
  std::mt19937_64 rng(64);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  Homography h;
  h.h = {1.1, 0.02, 3.0, -0.01, 0.95, -2.0, 0.0, 0.0, 1.0};
  std::vector<AffineFrame> fa, fb;
  std::vector<Match> matches;
  for (int i = 0; i < 40; ++i) {
    fa.push_back(AffineFrame::from({u(rng), u(rng)}, Mat2::identity() * 2.0));
    fb.push_back(AffineFrame::from({u(rng), u(rng)}, Mat2::identity() * 2.0));
    matches.push_back({static_cast<size_t>(i), static_cast<size_t>((i * 7) % 40), 0.1, 1.0, 0.1});
  }
  int want = 0;
  for (const Match& m : matches) {
    const Vec2 p = h.apply(fa[m.index_a].center());
    const Vec2 q = fb[m.index_b].center();
    if (std::hypot(p.x - q.x, p.y - q.y) <= 3.0) ++want;
  }
  CHECK(count_correct_matches(matches, fa, fb, h, 3.0) == want);
}

namespace {

std::vector<AffineFrame> spread_frames(std::mt19937_64& rng, int n, double span,
                                       double min_scale = 2.0, double max_scale = 4.0) {
  std::uniform_real_distribution<double> jitter(-4.0, 4.0);
  std::uniform_real_distribution<double> scale(min_scale, max_scale);
  std::uniform_real_distribution<double> shear(-0.5, 0.5);
  std::vector<AffineFrame> frames;
  const int per_row = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  for (int i = 0; i < n; ++i) {
    const double cx = 20.0 + (i % per_row) * span + jitter(rng);
    const double cy = 20.0 + (i / per_row) * span + jitter(rng);
    Mat2 a = Mat2::diag(scale(rng), scale(rng));
    a.m21 = shear(rng);
    frames.push_back(AffineFrame::from({cx, cy}, a));
  }
  return frames;
}

}  // namespace

TEST_CASE("repeatability of identical frame lists is exactly one") {
  std::mt19937_64 rng(65);
  const std::vector<AffineFrame> frames = spread_frames(rng, 9, 30.0);
  const RepeatabilityReport rep =
      repeatability(frames, frames, Homography::identity(), 200, 200, 200, 200);
  CHECK(rep.n_correspondences == 9);
  CHECK(rep.repeatability == 1.0);
  CHECK(rep.n_common_a == 9);
  CHECK(rep.n_common_b == 9);
}

TEST_CASE("repeatability with empty second list is zero") {
  std::mt19937_64 rng(66);
  const std::vector<AffineFrame> frames = spread_frames(rng, 4, 30.0);
  const RepeatabilityReport rep =
      repeatability(frames, {}, Homography::identity(), 200, 200, 200, 200);
  CHECK(rep.n_correspondences == 0);
  CHECK(rep.repeatability == 0.0);
}

TEST_CASE("shuffled identical frames give a perfect assignment") {
  std::mt19937_64 rng(67);
  std::vector<AffineFrame> frames = spread_frames(rng, 3, 40.0);
  std::vector<AffineFrame> shuffled = {frames[2], frames[0], frames[1]};
  const RepeatabilityReport rep =
      repeatability(frames, shuffled, Homography::identity(), 200, 200, 200, 200);
  CHECK(rep.n_correspondences == 3);
  CHECK(rep.repeatability == 1.0);
}

TEST_CASE("greedy assignment equals the exhaustive optimum on small instances") {
  std::mt19937_64 rng(68);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 5;
    const std::vector<AffineFrame> fa = spread_frames(rng, n, 26.0);
    std::vector<AffineFrame> fb = fa;
    // nudge centers and shapes a little
    std::uniform_real_distribution<double> nudge(-2.0, 2.0);
    std::uniform_real_distribution<double> sfac(0.85, 1.18);
    for (AffineFrame& f : fb) {
      f.cx += nudge(rng);
      f.cy += nudge(rng);
      f.set_shape(f.shape() * sfac(rng));
    }
    const double threshold = 0.4;
    const RepeatabilityReport rep =
        repeatability(fa, fb, Homography::identity(), 200, 200, 200, 200, threshold);

    std::vector<std::vector<double>> err(fa.size(), std::vector<double>(fb.size(), 1.0));
    for (size_t i = 0; i < fa.size(); ++i)
      for (size_t j = 0; j < fb.size(); ++j) err[i][j] = overlap_error(fa[i], fb[j]);
    const int optimal = oracle::optimal_assignment_size(err, threshold);
    CHECK(rep.n_correspondences == optimal);
  }
}

TEST_CASE("overlap threshold is strict and monotone") {
  std::mt19937_64 rng(69);
  const AffineFrame f1 = AffineFrame::from({40.0, 40.0}, Mat2::identity() * 4.0);
  const AffineFrame f2 = AffineFrame::from({43.0, 41.0}, Mat2::diag(4.5, 3.6));
  const double err = overlap_error(f1, f2);
  REQUIRE(err > 0.0);
  REQUIRE(err < 1.0);
  // threshold exactly at the pair's error: strict less-than excludes it
  const RepeatabilityReport at =
      repeatability({f1}, {f2}, Homography::identity(), 100, 100, 100, 100, err);
  CHECK(at.n_correspondences == 0);
  const RepeatabilityReport above = repeatability({f1}, {f2}, Homography::identity(), 100,
                                                  100, 100, 100, err + 1e-9);
  CHECK(above.n_correspondences == 1);

  // monotone in the threshold
  const std::vector<AffineFrame> fa = spread_frames(rng, 8, 26.0);
  std::vector<AffineFrame> fb = fa;
  std::uniform_real_distribution<double> nudge(-3.0, 3.0);
  for (AffineFrame& f : fb) {
    f.cx += nudge(rng);
    f.cy += nudge(rng);
  }
  int prev = 0;
  for (double t : {0.2, 0.3, 0.4, 0.5}) {
    const int c = repeatability(fa, fb, Homography::identity(), 200, 200, 200, 200, t)
                      .n_correspondences;
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("matching score on well-separated self-matches is one") {
  std::mt19937_64 rng(70);
  const std::vector<AffineFrame> frames = spread_frames(rng, 6, 30.0);
  std::vector<Descriptor> descs;
  for (size_t i = 0; i < frames.size(); ++i) descs.push_back(onehot(8, i));
  const double score = matching_score(frames, frames, descs, descs,
                                      Homography::identity(), 200, 200, 200, 200);
  CHECK(score == 1.0);
}

TEST_CASE("identical descriptors are all rejected by the ratio test") {
  std::mt19937_64 rng(71);
  const std::vector<AffineFrame> frames = spread_frames(rng, 5, 30.0);
  const std::vector<Descriptor> descs(5, onehot(8, 2));
  const double score = matching_score(frames, frames, descs, descs,
                                      Homography::identity(), 200, 200, 200, 200);
  CHECK(score == 0.0);
}

TEST_CASE("matching score equals the composition of the two oracles") {
  std::mt19937_64 rng(72);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + trial % 4;
    const std::vector<AffineFrame> fa = spread_frames(rng, n, 28.0);
    std::vector<AffineFrame> fb = fa;
    std::uniform_real_distribution<double> nudge(-2.5, 2.5);
    for (AffineFrame& f : fb) {
      f.cx += nudge(rng);
      f.cy += nudge(rng);
    }
    const auto da = random_descs(rng, n, 6);
    const auto db = random_descs(rng, n, 6);
    const double got = matching_score(fa, fb, da, db, Homography::identity(), 200, 200,
                                      200, 200, 0.8, 3.0);
    const auto matches = brute_ratio_test(da, db, 0.8);
    int correct = 0;
    for (const Match& m : matches) {
      const Vec2 p = fa[m.index_a].center();
      const Vec2 q = fb[m.index_b].center();
      if (std::hypot(p.x - q.x, p.y - q.y) <= 3.0) ++correct;
    }
    // identity homography, all centers inside: denominators are n
    CHECK(got == Catch::Approx(static_cast<double>(correct) / n));
  }
}
