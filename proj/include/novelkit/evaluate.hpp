#pragma once

#include <span>
#include <utility>
#include <vector>

#include "novelkit/common.hpp"
#include "novelkit/dataio.hpp"
#include "novelkit/model.hpp"

namespace novelkit {

/// Minimum-cost one-to-one matching over min(rows, cols) pairs.
struct Assignment {
  std::vector<std::pair<long long, long long>> pairs;  // (row, col)
  double cost = 0.0;
};

/// Kuhn-Munkres via shortest augmenting paths with potentials, O(n^3).
/// Rectangular inputs are padded internally with zero-cost dummies.
Assignment hungarian(const Matrix& cost);

/// Clustering accuracy: best injective cluster-to-class matching, found by
/// the Hungarian algorithm on the negated contingency table.
double clustering_acc(std::span<const long long> pred,
                      std::span<const long long> gt);

/// Mean silhouette value with Euclidean distances. Points in singleton
/// clusters contribute 0, as do points with a == b == 0.
double silhouette(const Matrix& points, std::span<const long long> assignments,
                  int threads = 1);

/// Contingency counts[i][j] over sorted distinct gt (rows) x pred (cols).
struct ContingencyTable {
  std::vector<long long> gt_ids;
  std::vector<long long> pred_ids;
  std::vector<std::vector<long long>> counts;
};
ContingencyTable confusion_matrix(std::span<const long long> gt,
                                  std::span<const long long> pred);

/// Matches head_u cluster ids against the hidden ids of a training
/// unlabelled set; entry j is the class id assigned to cluster j (-1 if
/// unmatched). This map is frozen and reused at test time.
std::vector<long long> fit_novel_class_map(const DualHeadModel& model,
                                           const EmbeddingDataset& train_unlabelled);

struct OldNewAll {
  double old_acc = 0.0;
  double new_acc = 0.0;
  double all_acc = 0.0;
};

/// Test protocol for the incrementally extended head: every prediction is an
/// unrestricted argmax over all C^l + C^u outputs.
OldNewAll old_new_all_accuracy(const DualHeadModel& model,
                               const EmbeddingDataset& test, long long c_l,
                               std::span<const long long> novel_class_map);

}  // namespace novelkit
