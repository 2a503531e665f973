#pragma once

#include <optional>
#include <span>
#include <vector>

#include "novelkit/common.hpp"
#include "novelkit/model.hpp"
#include "novelkit/pseudolabel.hpp"

namespace novelkit {

/// Time-dependent weight lambda * exp(-5 (1 - r/T)^2), held at lambda once
/// r reaches T.
struct RampSchedule {
  double lambda = 5.0;
  double length = 50.0;  // T, in epochs
};

double rampup(double r, const RampSchedule& sched);

struct LossReport {
  double ce = 0.0;
  double bce = 0.0;
  double mse = 0.0;
  double omega = 0.0;
  double total = 0.0;  // ce + bce + omega * mse
};

/// Mean of -log p[y]; gradient at the logit level is (p - onehot(y)) / N.
struct CeResult {
  double value = 0.0;
  Matrix dlogits;
};
CeResult ce_loss(const Matrix& p, std::span<const long long> y);

/// Pairwise binary cross-entropy over the full m x m grid (diagonal
/// included) with sigma_ij = p_i . p_j clamped to [eps, 1-eps].
struct BceResult {
  double value = 0.0;
  Matrix dprob;  // gradient w.r.t. the probability rows
};
BceResult bce_loss(const Matrix& p, const PseudoLabelMatrix& s);
inline constexpr double kBceClamp = 1e-7;

/// Mean over the batch of the squared Euclidean distance between the two
/// prediction rows.
struct MseResult {
  double value = 0.0;
  Matrix dp;      // gradient w.r.t. p
  Matrix dp_hat;  // gradient w.r.t. p_hat
};
MseResult mse_consistency(const Matrix& p, const Matrix& p_hat);

enum class LossMode { joint, clustering, incremental };

struct TotalLossOptions {
  LossMode mode = LossMode::joint;
  double epoch = 0.0;  // ramp position r
  RampSchedule consistency;
  RampSchedule incremental_ce{0.05, 50.0};
  bool bce_enabled = true;
  bool mse_enabled = true;
  int threads = 1;
};

struct TotalLossResult {
  LossReport report;
  ModelGradients grads;
  std::vector<long long> pseudo_targets;  // argmax head_u per unlabelled point
};

/// Full objective on one mini-batch. view1 carries CE/BCE; the MSE
/// consistency term couples view1 and view2 per head. labels[i] < 0 marks an
/// unlabelled member; `s` is the pseudo-label matrix over the unlabelled
/// members in batch order (may be null when none or BCE is disabled).
TotalLossResult total_loss(const DualHeadModel& model, const Matrix& view1,
                           const Matrix& view2,
                           std::span<const long long> labels,
                           const PseudoLabelMatrix* s,
                           const TotalLossOptions& opts);

}  // namespace novelkit
