#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "poselex/codebook.hpp"

using namespace poselex;

namespace {

FrameFeature feat(std::vector<double> v, std::size_t frame = 0) {
  return FrameFeature{std::move(v), frame};
}

std::vector<FrameFeature> random_points(std::mt19937_64& rng, int n, int dim) {
  std::vector<FrameFeature> pts;
  for (int i = 0; i < n; ++i) {
    std::vector<double> v(dim);
    for (double& x : v) x = testutil::uniform(rng, -1, 1);
    pts.push_back(feat(std::move(v), i));
  }
  return pts;
}

}  // namespace

TEST_CASE("fit_kmeans: k equal to the number of distinct points recovers them") {
  std::vector<FrameFeature> pts = {feat({0, 0}), feat({1, 0}), feat({0, 1}),
                                   feat({5, 5})};
  const VisualCodebook cb = fit_kmeans(pts, 4, 99);
  std::set<std::vector<double>> centers(cb.centers.begin(), cb.centers.end());
  std::set<std::vector<double>> expected;
  for (const auto& p : pts) expected.insert(p.values);
  CHECK(centers == expected);
  CHECK(inertia(pts, cb) == 0.0);
}

TEST_CASE("fit_kmeans: two tight blobs yield their means") {
  // Expected centers computed directly as the blob means.
  const double eps = 0.01;
  std::vector<FrameFeature> pts = {feat({0 - eps, 0}), feat({0 + eps, 0}),
                                   feat({10 - eps, 0}), feat({10 + eps, 0})};
  const VisualCodebook cb = fit_kmeans(pts, 2, 7);
  std::vector<std::vector<double>> centers = cb.centers;
  std::sort(centers.begin(), centers.end());
  CHECK(centers[0][0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(centers[0][1] == 0.0);
  CHECK(centers[1][0] == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("fit_kmeans: fewer distinct points than k is infeasible") {
  std::vector<FrameFeature> pts = {feat({1, 1}), feat({1, 1}), feat({2, 2}),
                                   feat({3, 3})};
  CHECK_THROWS_AS(fit_kmeans(pts, 5, 1), ConfigError);
  CHECK_THROWS_AS(fit_kmeans(pts, 4, 1), ConfigError);  // only 3 distinct
  CHECK_NOTHROW(fit_kmeans(pts, 3, 1));
}

TEST_CASE("fit_kmeans: deterministic for a fixed seed") {
  std::mt19937_64 rng(41);
  const auto pts = random_points(rng, 60, 5);
  const VisualCodebook a = fit_kmeans(pts, 8, 1234);
  const VisualCodebook b = fit_kmeans(pts, 8, 1234);
  CHECK(a.centers == b.centers);
  const VisualCodebook c = fit_kmeans(pts, 8, 77);
  CHECK(a.centers != c.centers);  // different seed, different seeding
}

TEST_CASE("fit_kmeans: converged centers are the means of their members") {
  std::mt19937_64 rng(42);
  const auto pts = random_points(rng, 80, 4);
  const VisualCodebook cb = fit_kmeans(pts, 6, 5);
  std::vector<std::vector<double>> sums(6, std::vector<double>(4, 0.0));
  std::vector<int> counts(6, 0);
  for (const auto& p : pts) {
    const int c = quantize(p, cb);
    for (int d = 0; d < 4; ++d) sums[c][d] += p.values[d];
    ++counts[c];
  }
  for (int c = 0; c < 6; ++c) {
    REQUIRE(counts[c] > 0);
    for (int d = 0; d < 4; ++d)
      CHECK(cb.centers[c][d] ==
            doctest::Approx(sums[c][d] / counts[c]).epsilon(1e-9));
  }
}

TEST_CASE("fit_kmeans: inertia at k+1 <= inertia at k with best-of-10 seeds") {
  std::mt19937_64 rng(43);
  const auto pts = random_points(rng, 100, 3);
  auto best_inertia = [&](int k) {
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 0; seed < 10; ++seed)
      best = std::min(best, inertia(pts, fit_kmeans(pts, k, seed)));
    return best;
  };
  for (int k = 2; k <= 6; ++k)
    CHECK(best_inertia(k + 1) <= best_inertia(k) + 1e-9);
}

TEST_CASE("fit_kmeans: inertia never increases across Lloyd iterations") {
  std::mt19937_64 rng(44);
  const auto pts = random_points(rng, 120, 4);
  double prev = std::numeric_limits<double>::infinity();
  for (int iters = 1; iters <= 8; ++iters) {
    const double val = inertia(pts, fit_kmeans(pts, 7, 9, iters));
    CHECK(val <= prev + 1e-9);
    prev = val;
  }
}

TEST_CASE("quantize: exact center, tie rule, constructed distances") {
  VisualCodebook cb;
  cb.k = 5;
  cb.centers = {{0, 0}, {2, 0}, {4, 0}, {6, 0}, {8, 0}};
  CHECK(quantize(feat(cb.centers[3]), cb) == 3);
  // Equidistant between centers 1 and 4 is impossible here; use 1 vs 2:
  CHECK(quantize(feat({3, 0}), cb) == 1);  // tie 1 vs 2 -> smaller index
  // Distances constructed by the test: 0.1 from center 0, 5+ from others.
  CHECK(quantize(feat({0.1, 0}), cb) == 0);
}

TEST_CASE("quantize: tie between centers 1 and 4 picks 1") {
  VisualCodebook cb;
  cb.k = 5;
  cb.centers = {{100, 0}, {1, 0}, {100, 1}, {100, 2}, {3, 0}};
  CHECK(quantize(feat({2, 0}), cb) == 1);
}

TEST_CASE("quantize: each center maps to its own index") {
  std::mt19937_64 rng(45);
  const auto pts = random_points(rng, 50, 6);
  const VisualCodebook cb = fit_kmeans(pts, 10, 3);
  for (int c = 0; c < cb.k; ++c)
    CHECK(quantize(feat(cb.centers[c]), cb) == c);
}

TEST_CASE("quantize: dimension mismatch is a schema error") {
  VisualCodebook cb;
  cb.k = 1;
  cb.centers = {{0, 0, 0}};
  CHECK_THROWS_AS(quantize(feat({1, 2}), cb), SchemaError);
}

TEST_CASE("quantize_sequence: key frames in order, empty set rejected") {
  VisualCodebook cb;
  cb.k = 3;
  cb.centers = {{0.0}, {1.0}, {2.0}};
  std::vector<FrameFeature> feats = {feat({0.9}, 0), feat({0.1}, 1),
                                     feat({1.1}, 2), feat({0.05}, 3),
                                     feat({2.2}, 4)};
  KeyFrameSet kf;
  kf.indices = {1, 2, 3};
  kf.kinds = {ExtremumKind::Min, ExtremumKind::Max, ExtremumKind::Min};
  const VisualSentence s = quantize_sequence(feats, kf, cb);
  CHECK(s.ids == std::vector<int>{0, 1, 0});

  KeyFrameSet single;
  single.indices = {4};
  single.kinds = {ExtremumKind::Max};
  CHECK(quantize_sequence(feats, single, cb).ids == std::vector<int>{2});

  CHECK_THROWS_AS(quantize_sequence(feats, KeyFrameSet{}, cb), SchemaError);
}

TEST_CASE("codebook JSON round trip") {
  std::mt19937_64 rng(46);
  const auto pts = random_points(rng, 30, 4);
  const VisualCodebook cb = fit_kmeans(pts, 5, 11);
  const VisualCodebook back = codebook_from_json(to_json(cb));
  CHECK(back.k == cb.k);
  CHECK(back.seed == cb.seed);
  CHECK(back.feature_mode == cb.feature_mode);
  CHECK(back.centers == cb.centers);
}
