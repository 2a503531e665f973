#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "novelkit/common.hpp"

namespace novelkit {

struct KMeansOptions {
  long long max_iter = 300;
  double tol = 1e-8;  // convergence threshold on centroid shift
};

struct ClusterOutcome {
  std::vector<long long> assignments;
  Matrix centroids;
  double inertia = 0.0;
  long long iterations = 0;
  std::vector<double> inertia_trace;  // recorded after each assignment pass
};

/// k-means++ seeding: first centroid uniform, the rest sampled proportional
/// to squared distance to the nearest chosen centroid. The sampling walks
/// points in a canonical (lexicographic) order so the result does not depend
/// on input row order.
Matrix kmeanspp_init(const Matrix& points, long long k, std::uint64_t seed);

ClusterOutcome lloyd(const Matrix& points, long long k, std::uint64_t seed,
                     const KMeansOptions& opts = {});

/// Lloyd iteration where points with forced[i] >= 0 keep that cluster id
/// through every assignment step. Slots covered by init_centroids (may be
/// null or partial) start there; remaining slots are seeded by k-means++
/// over the free points. Empty clusters are repaired by seizing the free
/// point farthest from its current centroid.
ClusterOutcome constrained_lloyd(const Matrix& points,
                                 std::span<const long long> forced,
                                 long long k, std::uint64_t seed,
                                 const Matrix* init_centroids = nullptr,
                                 const KMeansOptions& opts = {});

}  // namespace novelkit
