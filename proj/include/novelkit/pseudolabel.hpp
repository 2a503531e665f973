#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "novelkit/common.hpp"

namespace novelkit {

enum class LabelerMethod { rank, soft_rank, cosine, mutual_nn, kmeans_batch };

LabelerMethod labeler_from_string(const std::string& name);
std::string to_string(LabelerMethod m);

struct LabelerConfig {
  LabelerMethod method = LabelerMethod::rank;
  int k = 5;                  // top-k size; soft-rank validation default is 15
  double cosine_tau = 0.85;   // threshold for the cosine labeler
  int batch_kmeans_k = 5;     // cluster count for the k-means labeler
};

/// Pairwise similarity targets for one mini-batch. Symmetric with unit
/// diagonal; binary methods only take values in {0, 1}.
struct PseudoLabelMatrix {
  Matrix values;
  LabelerMethod method = LabelerMethod::rank;
};

/// Indices of the k largest components, ties broken toward the lower index.
/// Returned sorted ascending so equal sets compare equal.
std::vector<int> topk_set(std::span<const double> z, int k);

PseudoLabelMatrix rank_stats_labels(const Matrix& batch, int k);
PseudoLabelMatrix soft_rank_labels(const Matrix& batch, int k);
PseudoLabelMatrix cosine_labels(const Matrix& batch, double tau);
PseudoLabelMatrix mutual_nn_labels(const Matrix& batch);
PseudoLabelMatrix kmeans_batch_labels(const Matrix& batch, long long k_clusters,
                                      std::uint64_t seed);

PseudoLabelMatrix compute_pseudo_labels(const Matrix& batch,
                                        const LabelerConfig& cfg,
                                        std::uint64_t seed);

}  // namespace novelkit
