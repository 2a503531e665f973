#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "novelkit/dataio.hpp"
#include "novelkit/losses.hpp"
#include "novelkit/model.hpp"
#include "novelkit/pseudolabel.hpp"

namespace novelkit {

/// Vector-data stand-in for random image transforms: per-dimension Gaussian
/// noise scaled by the feature std, then independent coordinate dropout.
struct AugmentConfig {
  double noise_std = 0.1;  // fraction of the per-dimension feature std
  double dropout_p = 0.1;
};

struct LrStep {
  long long epoch;
  double factor;
};

struct TrainSchedule {
  long long epochs = 200;
  long long batch_size = 128;
  double lr = 0.1;
  std::vector<LrStep> lr_decay = {{170, 0.1}};
  double momentum = 0.9;
  LabelerConfig labeler;
  RampSchedule consistency{5.0, 50.0};
  RampSchedule incremental_ce{0.05, 50.0};
  AugmentConfig aug;
  std::uint64_t seed = 0;
  bool bce_enabled = true;
  bool mse_enabled = true;
  int threads = 1;

  void validate() const;
  double lr_at(long long epoch) const;
};

struct OptimizerState {
  double momentum = 0.9;
  ModelGradients velocity;
};

struct EpochLog {
  long long epoch = 0;
  LossReport mean;                      // averaged over the epoch's steps
  double omega = 0.0;
  std::optional<double> acc_unlabelled;  // vs hidden ids, when present
  std::vector<long long> pseudo_histogram;  // incremental mode only
};

struct TrainResult {
  DualHeadModel model;
  std::vector<EpochLog> log;
  std::vector<long long> assignments;  // argmax head_u on the unlabelled set
};

std::vector<double> augment(std::span<const double> x, const AugmentConfig& aug,
                            std::span<const double> feature_std, Rng& rng);

void sgd_step(DualHeadModel& model, const ModelGradients& grads,
              OptimizerState& opt, double lr);

/// Joint objective on mixed batches from the merged pool: CE on labelled
/// members, pairwise BCE with fresh pseudo-labels on unlabelled members,
/// ramped MSE consistency between two augmented views.
TrainResult train_joint(const EmbeddingDataset& labelled,
                        const EmbeddingDataset& unlabelled, DualHeadModel model,
                        const TrainSchedule& sched);

/// Same loop with the extended head: CE additionally covers unlabelled data
/// through on-the-fly pseudo-labels from head_u, ramped to a small peak.
TrainResult train_incremental(const EmbeddingDataset& labelled,
                              const EmbeddingDataset& unlabelled,
                              DualHeadModel model, const TrainSchedule& sched);

/// Label-free variant: BCE + ramped MSE only.
TrainResult train_clustering(const EmbeddingDataset& unlabelled,
                             DualHeadModel model, const TrainSchedule& sched);

}  // namespace novelkit
