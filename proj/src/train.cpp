#include "novelkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "novelkit/evaluate.hpp"

namespace novelkit {

void TrainSchedule::validate() const {
  if (epochs < 1) throw std::invalid_argument("schedule: epochs must be >= 1");
  if (batch_size < 2)
    throw std::invalid_argument("schedule: batch_size must be >= 2");
  if (lr <= 0) throw std::invalid_argument("schedule: lr must be > 0");
  if (momentum < 0 || momentum >= 1)
    throw std::invalid_argument("schedule: momentum must be in [0, 1)");
  if (aug.noise_std < 0)
    throw std::invalid_argument("schedule: noise_std must be >= 0");
  if (aug.dropout_p < 0 || aug.dropout_p >= 1)
    throw std::invalid_argument("schedule: dropout_p must be in [0, 1)");
  for (std::size_t i = 1; i < lr_decay.size(); ++i)
    if (lr_decay[i].epoch <= lr_decay[i - 1].epoch)
      throw std::invalid_argument("schedule: decay epochs must be strictly increasing");
  if (consistency.lambda < 0 || incremental_ce.lambda < 0)
    throw std::invalid_argument("schedule: ramp weight must be >= 0");
  if (consistency.length < 1 || incremental_ce.length < 1)
    throw std::invalid_argument("schedule: ramp length must be >= 1");
}

double TrainSchedule::lr_at(long long epoch) const {
  double out = lr;
  for (const auto& step : lr_decay)
    if (epoch >= step.epoch) out *= step.factor;
  return out;
}

std::vector<double> augment(std::span<const double> x, const AugmentConfig& aug,
                            std::span<const double> feature_std, Rng& rng) {
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    double v = x[j];
    if (aug.noise_std > 0)
      v += rng.normal() * aug.noise_std * feature_std[j];
    if (aug.dropout_p > 0 && rng.uniform() < aug.dropout_p) v = 0.0;
    out[j] = v;
  }
  return out;
}

void sgd_step(DualHeadModel& model, const ModelGradients& grads,
              OptimizerState& opt, double lr) {
  grads.check_finite();
  auto apply = [&](std::vector<double>& theta, std::vector<double>& vel,
                   const std::vector<double>& g) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      vel[i] = opt.momentum * vel[i] + g[i];
      theta[i] -= lr * vel[i];
    }
  };
  apply(model.trunk_w.data, opt.velocity.trunk_w.data, grads.trunk_w.data);
  apply(model.trunk_b, opt.velocity.trunk_b, grads.trunk_b);
  apply(model.head_l_w.data, opt.velocity.head_l_w.data, grads.head_l_w.data);
  apply(model.head_l_b, opt.velocity.head_l_b, grads.head_l_b);
  apply(model.head_u_w.data, opt.velocity.head_u_w.data, grads.head_u_w.data);
  apply(model.head_u_b, opt.velocity.head_u_b, grads.head_u_b);
}

namespace {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;

  static Standardizer fit(const std::vector<const Matrix*>& blocks) {
    std::size_t d = blocks.front()->cols;
    Standardizer s;
    s.mean.assign(d, 0.0);
    s.std.assign(d, 0.0);
    std::size_t n = 0;
    for (const Matrix* b : blocks) n += b->rows;
    for (const Matrix* b : blocks)
      for (std::size_t i = 0; i < b->rows; ++i) {
        auto row = b->row(i);
        for (std::size_t j = 0; j < d; ++j) s.mean[j] += row[j];
      }
    for (std::size_t j = 0; j < d; ++j) s.mean[j] /= static_cast<double>(n);
    for (const Matrix* b : blocks)
      for (std::size_t i = 0; i < b->rows; ++i) {
        auto row = b->row(i);
        for (std::size_t j = 0; j < d; ++j) {
          double dev = row[j] - s.mean[j];
          s.std[j] += dev * dev;
        }
      }
    for (std::size_t j = 0; j < d; ++j) {
      s.std[j] = std::sqrt(s.std[j] / static_cast<double>(n));
      if (s.std[j] == 0.0) s.std[j] = 1.0;  // constant dims carry no signal
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j)
        out(i, j) = (x(i, j) - mean[j]) / std[j];
    return out;
  }
};

// Rewrites an affine layer trained on (x - mean) / std so it accepts raw
// inputs: W' = W / std (columnwise), b' = b - W' mean.
void fold_affine(Matrix& w, std::vector<double>& b, const Standardizer& s) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    auto row = w.row(r);
    double shift = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      row[c] /= s.std[c];
      shift += row[c] * s.mean[c];
    }
    b[r] -= shift;
  }
}

void fold_standardizer(DualHeadModel& model, const Standardizer& s) {
  if (model.identity_trunk) {
    fold_affine(model.head_l_w, model.head_l_b, s);
    fold_affine(model.head_u_w, model.head_u_b, s);
  } else {
    fold_affine(model.trunk_w, model.trunk_b, s);
  }
}

std::vector<long long> assign_clusters(const DualHeadModel& model,
                                       const Matrix& features, int threads) {
  std::vector<long long> out(features.rows);
  parallel_for(features.rows, threads, [&](std::size_t i) {
    auto r = forward(model, features.row(i));
    out[i] = static_cast<long long>(
        std::max_element(r.p_u.begin(), r.p_u.end()) - r.p_u.begin());
  });
  return out;
}

TrainResult run_training(const EmbeddingDataset* labelled,
                         const EmbeddingDataset& unlabelled,
                         DualHeadModel model, const TrainSchedule& sched,
                         LossMode mode) {
  sched.validate();
  if (unlabelled.size() == 0)
    throw std::invalid_argument("train: unlabelled dataset is empty");
  if (labelled && labelled->size() == 0)
    throw std::invalid_argument("train: labelled dataset is empty");
  if (labelled && labelled->dim() != unlabelled.dim())
    throw std::invalid_argument("train: dataset dimensions differ");
  if (static_cast<long long>(unlabelled.dim()) != model.d_in)
    throw std::invalid_argument("train: model input dimension mismatch");
  if (mode == LossMode::incremental && !model.extended)
    throw std::invalid_argument("train_incremental: extend the model first");
  if (labelled) {
    for (std::size_t i = 0; i < labelled->size(); ++i) {
      long long y = labelled->labels[i];
      if (y < 0 || y >= model.class_count_labelled)
        throw std::invalid_argument(
            "train: labelled dataset has a label outside [0, C^l) at row " +
            std::to_string(i + 1));
    }
  }

  const std::size_t n_lab = labelled ? labelled->size() : 0;
  const std::size_t n_unlab = unlabelled.size();
  const std::size_t n = n_lab + n_unlab;
  const std::size_t d = unlabelled.dim();
  const std::size_t bs = std::min(static_cast<std::size_t>(sched.batch_size), n);

  std::vector<const Matrix*> blocks;
  if (labelled) blocks.push_back(&labelled->features);
  blocks.push_back(&unlabelled.features);
  Standardizer stz = Standardizer::fit(blocks);
  Matrix lab_feat = labelled ? stz.apply(labelled->features) : Matrix();
  Matrix unlab_feat = stz.apply(unlabelled.features);
  std::vector<double> unit_std(d, 1.0);  // augment noise relative to the
                                         // standardized features' own std

  // merged pool: labelled rows first, then unlabelled
  auto pool_row = [&](std::size_t idx) {
    return idx < n_lab ? lab_feat.row(idx) : unlab_feat.row(idx - n_lab);
  };
  auto pool_label = [&](std::size_t idx) -> long long {
    return idx < n_lab ? labelled->labels[idx] : -1;
  };

  TrainResult result;
  result.log.reserve(static_cast<std::size_t>(sched.epochs));
  OptimizerState opt{sched.momentum, ModelGradients::zeros_like(model)};

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TotalLossOptions lopt;
  lopt.mode = mode;
  lopt.consistency = sched.consistency;
  lopt.incremental_ce = sched.incremental_ce;
  lopt.bce_enabled = sched.bce_enabled;
  lopt.mse_enabled = sched.mse_enabled;
  lopt.threads = sched.threads;

  const bool eval_labels_present = unlabelled.any_label();

  for (long long epoch = 0; epoch < sched.epochs; ++epoch) {
    Rng shuffle_rng(Rng::mix(sched.seed, stream::shuffle, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    double lr = sched.lr_at(epoch);
    lopt.epoch = static_cast<double>(epoch);

    LossReport sum;
    std::vector<long long> pseudo_hist(
        mode == LossMode::incremental
            ? static_cast<std::size_t>(model.class_count_unlabelled)
            : 0,
        0);
    const std::size_t steps = n / bs;
    for (std::size_t step = 0; step < steps; ++step) {
      Matrix view1(bs, d), view2(bs, d);
      std::vector<long long> batch_labels(bs);
      for (std::size_t t = 0; t < bs; ++t) {
        std::size_t idx = order[step * bs + t];
        batch_labels[t] = pool_label(idx);
        auto x = pool_row(idx);
        for (int view = 0; view < 2; ++view) {
          Rng arng(Rng::mix(sched.seed, stream::augment,
                            Rng::mix(static_cast<std::uint64_t>(epoch),
                                     static_cast<std::uint64_t>(step),
                                     static_cast<std::uint64_t>(t),
                                     static_cast<std::uint64_t>(view))));
          auto xv = augment(x, sched.aug, unit_std, arng);
          std::copy(xv.begin(), xv.end(),
                    (view == 0 ? view1 : view2).row(t).begin());
        }
      }

      // pseudo-labels from the current trunk output of the first view
      std::vector<std::size_t> unlab_members;
      for (std::size_t t = 0; t < bs; ++t)
        if (batch_labels[t] < 0) unlab_members.push_back(t);
      PseudoLabelMatrix s;
      const PseudoLabelMatrix* s_ptr = nullptr;
      if (sched.bce_enabled && unlab_members.size() >= 2) {
        Matrix zs(unlab_members.size(), static_cast<std::size_t>(model.d_h));
        parallel_for(unlab_members.size(), sched.threads, [&](std::size_t t) {
          auto r = forward(model, view1.row(unlab_members[t]));
          std::copy(r.z.begin(), r.z.end(), zs.row(t).begin());
        });
        s = compute_pseudo_labels(
            zs, sched.labeler,
            Rng::mix(sched.seed, stream::labeler,
                     static_cast<std::uint64_t>(epoch),
                     static_cast<std::uint64_t>(step)));
        s_ptr = &s;
      }

      TotalLossResult step_res =
          total_loss(model, view1, view2, batch_labels, s_ptr, lopt);
      sum.ce += step_res.report.ce;
      sum.bce += step_res.report.bce;
      sum.mse += step_res.report.mse;
      sum.total += step_res.report.total;
      for (long long yhat : step_res.pseudo_targets)
        ++pseudo_hist[static_cast<std::size_t>(yhat)];
      sgd_step(model, step_res.grads, opt, lr);
    }

    EpochLog log;
    log.epoch = epoch;
    if (steps > 0) {
      double inv = 1.0 / static_cast<double>(steps);
      log.mean.ce = sum.ce * inv;
      log.mean.bce = sum.bce * inv;
      log.mean.mse = sum.mse * inv;
      log.mean.total = sum.total * inv;
    }
    log.omega = rampup(static_cast<double>(epoch), sched.consistency);
    log.mean.omega = log.omega;
    log.pseudo_histogram = std::move(pseudo_hist);
    if (eval_labels_present) {
      auto assign = assign_clusters(model, unlab_feat, sched.threads);
      log.acc_unlabelled = clustering_acc(assign, unlabelled.labels);
    }
    result.log.push_back(std::move(log));
  }

  result.assignments = assign_clusters(model, unlab_feat, sched.threads);
  fold_standardizer(model, stz);
  result.model = std::move(model);
  return result;
}

}  // namespace

TrainResult train_joint(const EmbeddingDataset& labelled,
                        const EmbeddingDataset& unlabelled, DualHeadModel model,
                        const TrainSchedule& sched) {
  return run_training(&labelled, unlabelled, std::move(model), sched,
                      LossMode::joint);
}

TrainResult train_incremental(const EmbeddingDataset& labelled,
                              const EmbeddingDataset& unlabelled,
                              DualHeadModel model, const TrainSchedule& sched) {
  return run_training(&labelled, unlabelled, std::move(model), sched,
                      LossMode::incremental);
}

TrainResult train_clustering(const EmbeddingDataset& unlabelled,
                             DualHeadModel model, const TrainSchedule& sched) {
  return run_training(nullptr, unlabelled, std::move(model), sched,
                      LossMode::clustering);
}

}  // namespace novelkit
