#include <numeric>

#include "doctest.h"
#include "novelkit/kmeans.hpp"
#include "oracles.hpp"

using namespace novelkit;

namespace {

Matrix two_clouds(std::size_t per_side, std::uint64_t seed) {
  Rng rng(seed);
  Matrix pts(2 * per_side, 2);
  for (std::size_t i = 0; i < per_side; ++i) {
    pts(i, 0) = -10.0 + 0.5 * rng.normal();
    pts(i, 1) = 0.5 * rng.normal();
    pts(per_side + i, 0) = 10.0 + 0.5 * rng.normal();
    pts(per_side + i, 1) = 0.5 * rng.normal();
  }
  return pts;
}

}  // namespace

TEST_CASE("kmeans++ basics") {
  Rng rng(5);
  Matrix pts(6, 3);
  for (double& v : pts.data) v = rng.normal();

  Matrix one = kmeanspp_init(pts, 1, 0);
  bool is_point = false;
  for (std::size_t i = 0; i < pts.rows; ++i)
    if (std::equal(pts.row(i).begin(), pts.row(i).end(), one.row(0).begin()))
      is_point = true;
  CHECK(is_point);

  // k = n distinct points: the chosen centroids are a permutation of them
  Matrix full = kmeanspp_init(pts, 6, 1);
  std::size_t matched = 0;
  for (std::size_t c = 0; c < 6; ++c)
    for (std::size_t i = 0; i < 6; ++i)
      if (std::equal(pts.row(i).begin(), pts.row(i).end(), full.row(c).begin())) {
        ++matched;
        break;
      }
  CHECK(matched == 6);

  Matrix again = kmeanspp_init(pts, 3, 42);
  Matrix again2 = kmeanspp_init(pts, 3, 42);
  CHECK(again.data == again2.data);

  Matrix dup(4, 2, 1.0);  // only one distinct point
  CHECK_THROWS_AS(kmeanspp_init(dup, 2, 0), std::invalid_argument);
}

TEST_CASE("lloyd recovers two separated clouds") {
  Matrix pts = two_clouds(40, 3);
  ClusterOutcome out = lloyd(pts, 2, 0);

  // analytic means of the generated clouds
  double mx0 = 0, my0 = 0, mx1 = 0, my1 = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    mx0 += pts(i, 0); my0 += pts(i, 1);
    mx1 += pts(40 + i, 0); my1 += pts(40 + i, 1);
  }
  mx0 /= 40; my0 /= 40; mx1 /= 40; my1 /= 40;
  std::size_t neg = out.centroids(0, 0) < 0 ? 0 : 1;
  CHECK(out.centroids(neg, 0) == doctest::Approx(mx0).epsilon(1e-6));
  CHECK(out.centroids(neg, 1) == doctest::Approx(my0).epsilon(1e-6));
  CHECK(out.centroids(1 - neg, 0) == doctest::Approx(mx1).epsilon(1e-6));
  CHECK(out.centroids(1 - neg, 1) == doctest::Approx(my1).epsilon(1e-6));
}

TEST_CASE("lloyd with k=1 returns the global mean") {
  Rng rng(8);
  Matrix pts(25, 4);
  for (double& v : pts.data) v = rng.uniform(-2, 2);
  ClusterOutcome out = lloyd(pts, 1, 0);
  for (std::size_t j = 0; j < 4; ++j) {
    double mean = 0;
    for (std::size_t i = 0; i < 25; ++i) mean += pts(i, j);
    mean /= 25;
    CHECK(out.centroids(0, j) == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("inertia trace is non-increasing") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Matrix pts(60, 3);
    for (double& v : pts.data) v = rng.normal();
    ClusterOutcome out = lloyd(pts, 4, seed);
    for (std::size_t t = 1; t < out.inertia_trace.size(); ++t)
      CHECK(out.inertia_trace[t] <= out.inertia_trace[t - 1] + 1e-9);
    CHECK(out.inertia <= out.inertia_trace.back() + 1e-9);
  }
}

TEST_CASE("restarted lloyd attains the brute-force optimum on tiny instances") {
  // clustered instances: blob centres plus per-point jitter
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed * 7 + 1);
    std::size_t n = 5 + static_cast<std::size_t>(rng.index(4));  // 5..8
    std::size_t k = 2 + static_cast<std::size_t>(rng.index(2));  // 2..3
    Matrix centres(k, 2);
    for (double& v : centres.data) v = rng.uniform(-4, 4);
    Matrix pts(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t c = rng.index(k);
      pts(i, 0) = centres(c, 0) + 0.3 * rng.normal();
      pts(i, 1) = centres(c, 1) + 0.3 * rng.normal();
    }
    double best_lloyd = std::numeric_limits<double>::infinity();
    for (std::uint64_t r = 0; r < 10; ++r)
      best_lloyd = std::min(best_lloyd,
                            lloyd(pts, static_cast<long long>(k), seed * 100 + r).inertia);
    double optimum = oracles::brute_force_kmeans_inertia(pts, k);
    CHECK(best_lloyd <= optimum + 1e-9);
    CHECK(best_lloyd >= optimum - 1e-9);
  }
  // unstructured instances: Lloyd is local, but it must never beat the
  // enumerated optimum (a lower value would mean the inertia is computed wrong)
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Rng rng(seed * 13 + 5);
    std::size_t n = 5 + static_cast<std::size_t>(rng.index(4));
    std::size_t k = 2 + static_cast<std::size_t>(rng.index(2));
    Matrix pts(n, 2);
    for (double& v : pts.data) v = rng.uniform(-1, 1);
    double optimum = oracles::brute_force_kmeans_inertia(pts, k);
    for (std::uint64_t r = 0; r < 10; ++r)
      CHECK(lloyd(pts, static_cast<long long>(k), seed * 100 + r).inertia >=
            optimum - 1e-9);
  }
}

TEST_CASE("clustering result is invariant to input permutation") {
  Rng rng(17);
  Matrix pts(30, 2);
  for (double& v : pts.data) v = rng.normal();
  ClusterOutcome base = lloyd(pts, 3, 5);

  // rotate the rows; the clustering must be the same up to row order
  std::size_t shift = 11;
  Matrix rotated(30, 2);
  for (std::size_t i = 0; i < 30; ++i) {
    auto src = pts.row((i + shift) % 30);
    std::copy(src.begin(), src.end(), rotated.row(i).begin());
  }
  ClusterOutcome perm = lloyd(rotated, 3, 5);
  CHECK(perm.inertia == doctest::Approx(base.inertia).epsilon(1e-12));
  // same partition: points that shared a cluster must still share one
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 30; ++j) {
      bool before = base.assignments[(i + shift) % 30] == base.assignments[(j + shift) % 30];
      bool after = perm.assignments[i] == perm.assignments[j];
      CHECK(before == after);
    }
}

TEST_CASE("constrained lloyd honors forced assignments") {
  Matrix pts = two_clouds(20, 9);
  std::vector<long long> forced(40, -1);
  // force a handful of points from each cloud
  for (std::size_t i = 0; i < 5; ++i) {
    forced[i] = 0;
    forced[20 + i] = 1;
  }
  ClusterOutcome out = constrained_lloyd(pts, forced, 2, 4);
  for (std::size_t i = 0; i < forced.size(); ++i)
    if (forced[i] >= 0) CHECK(out.assignments[i] == forced[i]);

  // forcing the left cloud to slot 0 pins the labelling of the solution
  for (std::size_t i = 0; i < 20; ++i) CHECK(out.assignments[i] == 0);
  for (std::size_t i = 20; i < 40; ++i) CHECK(out.assignments[i] == 1);
}

TEST_CASE("constrained lloyd with no forced points reduces to lloyd") {
  Rng rng(31);
  Matrix pts(50, 3);
  for (double& v : pts.data) v = rng.normal();
  std::vector<long long> forced(50, -1);
  ClusterOutcome plain = lloyd(pts, 4, 12);
  ClusterOutcome cons = constrained_lloyd(pts, forced, 4, 12);
  CHECK(plain.assignments == cons.assignments);
  CHECK(plain.centroids.data == cons.centroids.data);
  CHECK(plain.inertia == cons.inertia);
}

TEST_CASE("constrained lloyd with every point forced averages each class") {
  Matrix pts(6, 2);
  pts.data = {0, 0, 2, 0, 4, 0, 10, 10, 12, 10, 14, 10};
  std::vector<long long> forced = {0, 0, 0, 1, 1, 1};
  ClusterOutcome out = constrained_lloyd(pts, forced, 2, 0);
  CHECK(out.centroids(0, 0) == doctest::Approx(2.0));
  CHECK(out.centroids(0, 1) == doctest::Approx(0.0));
  CHECK(out.centroids(1, 0) == doctest::Approx(12.0));
  CHECK(out.centroids(1, 1) == doctest::Approx(10.0));
}

TEST_CASE("constrained lloyd keeps the trace monotone on random constrained instances") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::size_t n = 30 + rng.index(30);
    Matrix pts(n, 3);
    for (double& v : pts.data) v = rng.normal();
    std::vector<long long> forced(n, -1);
    long long k = 2 + static_cast<long long>(rng.index(4));
    for (std::size_t i = 0; i < n; ++i)
      if (rng.uniform() < 0.3) forced[i] = static_cast<long long>(rng.index(static_cast<std::size_t>(k)));
    ClusterOutcome out = constrained_lloyd(pts, forced, k, seed);
    for (std::size_t t = 1; t < out.inertia_trace.size(); ++t)
      CHECK(out.inertia_trace[t] <= out.inertia_trace[t - 1] + 1e-9);
    for (std::size_t i = 0; i < n; ++i)
      if (forced[i] >= 0) CHECK(out.assignments[i] == forced[i]);
  }
}

TEST_CASE("forced id out of range is rejected") {
  Matrix pts(4, 2, 0.5);
  std::vector<long long> forced = {0, 3, -1, -1};
  CHECK_THROWS_AS(constrained_lloyd(pts, forced, 2, 0), std::invalid_argument);
}
