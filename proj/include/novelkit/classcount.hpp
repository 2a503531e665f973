#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "novelkit/dataio.hpp"
#include "novelkit/kmeans.hpp"

namespace novelkit {

struct EstimationConfig {
  long long cu_max = 100;
  double tau_outlier = 0.01;
  long long restarts = 5;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct SweepRecord {
  long long candidate = 0;
  double acc_validation_probe = 0.0;
  double cvi_unlabelled = 0.0;  // NaN when undefined (candidate 0, or < 2 clusters)
};

struct EstimationResult {
  long long estimate = 0;
  std::vector<SweepRecord> sweep;
  long long acc_argmax = 0;   // C^u*_a
  long long cvi_argmax = 0;   // C^u*_v
  long long averaged = 0;     // round((a + v) / 2)
  bool truncated = false;     // sweep stopped before cu_max
};

/// Estimates the number of novel categories: constrained k-means over the
/// probe points plus the unlabelled set for every candidate count, scored by
/// validation-probe accuracy and by the Silhouette of the unlabelled
/// assignments, then an outlier-mass pass on the rerun at the averaged
/// optimum.
EstimationResult estimate_class_count(const EmbeddingDataset& labelled,
                                      const ProbeSplit& split,
                                      const EmbeddingDataset& unlabelled,
                                      const EstimationConfig& cfg);

/// Keeps cluster c iff its mass (count of unlabelled members) is at least
/// tau times the largest mass among novel_slot_ids. The largest cluster
/// always survives.
std::vector<long long> drop_outlier_clusters(
    const ClusterOutcome& outcome, std::span<const long long> novel_slot_ids,
    const std::vector<bool>& unlabelled_mask, double tau);

}  // namespace novelkit
