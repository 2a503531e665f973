#include "novelkit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace novelkit {

double rampup(double r, const RampSchedule& sched) {
  if (r < 0) throw std::invalid_argument("rampup: r must be >= 0");
  if (r >= sched.length) return sched.lambda;
  double a = 1.0 - r / sched.length;
  return sched.lambda * std::exp(-5.0 * a * a);
}

CeResult ce_loss(const Matrix& p, std::span<const long long> y) {
  if (p.rows != y.size())
    throw std::invalid_argument("ce_loss: batch size mismatch");
  if (p.rows == 0) throw std::invalid_argument("ce_loss: empty batch");
  CeResult r;
  r.dlogits = Matrix(p.rows, p.cols, 0.0);
  double inv_n = 1.0 / static_cast<double>(p.rows);
  for (std::size_t i = 0; i < p.rows; ++i) {
    long long yi = y[i];
    if (yi < 0 || static_cast<std::size_t>(yi) >= p.cols)
      throw std::invalid_argument("ce_loss: label out of range at row " +
                                  std::to_string(i));
    r.value -= std::log(p(i, static_cast<std::size_t>(yi)));
    for (std::size_t j = 0; j < p.cols; ++j)
      r.dlogits(i, j) = p(i, j) * inv_n;
    r.dlogits(i, static_cast<std::size_t>(yi)) -= inv_n;
  }
  r.value *= inv_n;
  return r;
}

BceResult bce_loss(const Matrix& p, const PseudoLabelMatrix& s) {
  const std::size_t m = p.rows;
  if (s.values.rows != m || s.values.cols != m)
    throw std::invalid_argument("bce_loss: pseudo-label matrix dimension mismatch");
  if (m == 0) throw std::invalid_argument("bce_loss: empty batch");

  BceResult r;
  r.dprob = Matrix(m, p.cols, 0.0);
  const double inv_m2 = 1.0 / static_cast<double>(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double sigma = 0.0;
      for (std::size_t t = 0; t < p.cols; ++t) sigma += p(i, t) * p(j, t);
      double clamped = std::clamp(sigma, kBceClamp, 1.0 - kBceClamp);
      double sij = s.values(i, j);
      r.value -= inv_m2 * (sij * std::log(clamped) +
                           (1.0 - sij) * std::log(1.0 - clamped));
      if (sigma <= kBceClamp || sigma >= 1.0 - kBceClamp) continue;  // clamp zone
      double w = -inv_m2 * (sij / clamped - (1.0 - sij) / (1.0 - clamped));
      // sigma depends on p_i and p_j; i == j contributes through both factors
      for (std::size_t t = 0; t < p.cols; ++t) {
        r.dprob(i, t) += w * p(j, t);
        r.dprob(j, t) += w * p(i, t);
      }
    }
  }
  return r;
}

MseResult mse_consistency(const Matrix& p, const Matrix& p_hat) {
  if (p.rows != p_hat.rows || p.cols != p_hat.cols)
    throw std::invalid_argument("mse_consistency: shape mismatch");
  if (p.rows == 0) throw std::invalid_argument("mse_consistency: empty batch");
  MseResult r;
  r.dp = Matrix(p.rows, p.cols, 0.0);
  r.dp_hat = Matrix(p.rows, p.cols, 0.0);
  double inv_n = 1.0 / static_cast<double>(p.rows);
  for (std::size_t i = 0; i < p.rows; ++i) {
    for (std::size_t j = 0; j < p.cols; ++j) {
      double diff = p(i, j) - p_hat(i, j);
      r.value += diff * diff * inv_n;
      r.dp(i, j) = 2.0 * diff * inv_n;
      r.dp_hat(i, j) = -2.0 * diff * inv_n;
    }
  }
  return r;
}

namespace {

struct BatchForward {
  Matrix z;        // m x d_h
  Matrix pre;      // m x d_h pre-activation (empty for identity trunk)
  Matrix p_l;      // m x head_l_out
  Matrix p_u;      // m x C^u
};

BatchForward forward_batch(const DualHeadModel& model, const Matrix& x,
                           int threads) {
  const std::size_t m = x.rows;
  const std::size_t dh = static_cast<std::size_t>(model.d_h);
  BatchForward f;
  f.z = Matrix(m, dh);
  if (!model.identity_trunk) f.pre = Matrix(m, dh);
  f.p_l = Matrix(m, static_cast<std::size_t>(model.head_l_out()));
  f.p_u = Matrix(m, static_cast<std::size_t>(model.class_count_unlabelled));

  parallel_for(m, threads, [&](std::size_t i) {
    auto xi = x.row(i);
    auto zi = f.z.row(i);
    if (model.identity_trunk) {
      std::copy(xi.begin(), xi.end(), zi.begin());
    } else {
      auto pi = f.pre.row(i);
      for (std::size_t r = 0; r < dh; ++r) {
        double sum = model.trunk_b[r];
        auto w = model.trunk_w.row(r);
        for (std::size_t c = 0; c < w.size(); ++c) sum += w[c] * xi[c];
        pi[r] = sum;
        zi[r] = sum > 0.0 ? sum : 0.0;
      }
    }
    std::vector<double> logits(f.p_l.cols);
    for (std::size_t r = 0; r < f.p_l.cols; ++r) {
      double sum = model.head_l_b[r];
      auto w = model.head_l_w.row(r);
      for (std::size_t c = 0; c < dh; ++c) sum += w[c] * zi[c];
      logits[r] = sum;
    }
    softmax(logits, f.p_l.row(i));
    logits.resize(f.p_u.cols);
    for (std::size_t r = 0; r < f.p_u.cols; ++r) {
      double sum = model.head_u_b[r];
      auto w = model.head_u_w.row(r);
      for (std::size_t c = 0; c < dh; ++c) sum += w[c] * zi[c];
      logits[r] = sum;
    }
    softmax(logits, f.p_u.row(i));
  });
  return f;
}

// dL/dlogits = p .* (g - (g . p)) for softmax output p and upstream g = dL/dp
void softmax_backward_row(std::span<const double> p, std::span<const double> g,
                          std::span<double> out) {
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += g[i] * p[i];
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * (g[i] - dot);
}

// Accumulates parameter gradients for one view given per-sample logit
// gradients of both heads. Sample order is fixed so reductions are
// bit-reproducible regardless of the thread count.
void backward_batch(const DualHeadModel& model, const Matrix& x,
                    const BatchForward& f, const Matrix& glogits_l,
                    const Matrix& glogits_u, ModelGradients& grads) {
  const std::size_t m = x.rows;
  const std::size_t dh = static_cast<std::size_t>(model.d_h);
  std::vector<double> dz(dh);
  for (std::size_t i = 0; i < m; ++i) {
    auto zi = f.z.row(i);
    std::fill(dz.begin(), dz.end(), 0.0);
    auto gl = glogits_l.row(i);
    for (std::size_t r = 0; r < glogits_l.cols; ++r) {
      double g = gl[r];
      if (g == 0.0) continue;
      auto wrow = model.head_l_w.row(r);
      auto grow = grads.head_l_w.row(r);
      for (std::size_t c = 0; c < dh; ++c) {
        grow[c] += g * zi[c];
        dz[c] += g * wrow[c];
      }
      grads.head_l_b[r] += g;
    }
    auto gu = glogits_u.row(i);
    for (std::size_t r = 0; r < glogits_u.cols; ++r) {
      double g = gu[r];
      if (g == 0.0) continue;
      auto wrow = model.head_u_w.row(r);
      auto grow = grads.head_u_w.row(r);
      for (std::size_t c = 0; c < dh; ++c) {
        grow[c] += g * zi[c];
        dz[c] += g * wrow[c];
      }
      grads.head_u_b[r] += g;
    }
    if (model.identity_trunk) continue;
    auto xi = x.row(i);
    auto pre = f.pre.row(i);
    for (std::size_t r = 0; r < dh; ++r) {
      if (pre[r] <= 0.0 || dz[r] == 0.0) continue;
      double g = dz[r];
      auto grow = grads.trunk_w.row(r);
      for (std::size_t c = 0; c < xi.size(); ++c) grow[c] += g * xi[c];
      grads.trunk_b[r] += g;
    }
  }
}

}  // namespace

TotalLossResult total_loss(const DualHeadModel& model, const Matrix& view1,
                           const Matrix& view2,
                           std::span<const long long> labels,
                           const PseudoLabelMatrix* s,
                           const TotalLossOptions& opts) {
  const std::size_t m = view1.rows;
  if (labels.size() != m)
    throw std::invalid_argument("total_loss: label size mismatch");
  if (opts.mse_enabled && (view2.rows != m || view2.cols != view1.cols))
    throw std::invalid_argument("total_loss: view shape mismatch");

  if (m == 0) throw std::invalid_argument("total_loss: empty batch");
  std::vector<std::size_t> lab_idx, unlab_idx;
  for (std::size_t i = 0; i < m; ++i)
    (labels[i] >= 0 ? lab_idx : unlab_idx).push_back(i);

  TotalLossResult res;
  res.grads = ModelGradients::zeros_like(model);
  double omega = opts.mse_enabled ? rampup(opts.epoch, opts.consistency) : 0.0;
  res.report.omega = rampup(opts.epoch, opts.consistency);

  BatchForward f1 = forward_batch(model, view1, opts.threads);
  BatchForward f2;
  bool need_view2 = opts.mse_enabled && omega > 0.0;
  if (need_view2) f2 = forward_batch(model, view2, opts.threads);

  // logit-level gradient accumulators for view1
  Matrix gl1(m, f1.p_l.cols, 0.0), gu1(m, f1.p_u.cols, 0.0);

  // cross-entropy on the labelled members of view1
  if (opts.mode != LossMode::clustering && !lab_idx.empty()) {
    Matrix pl(lab_idx.size(), f1.p_l.cols);
    std::vector<long long> yl(lab_idx.size());
    for (std::size_t t = 0; t < lab_idx.size(); ++t) {
      auto src = f1.p_l.row(lab_idx[t]);
      std::copy(src.begin(), src.end(), pl.row(t).begin());
      yl[t] = labels[lab_idx[t]];
    }
    CeResult ce = ce_loss(pl, yl);
    res.report.ce += ce.value;
    for (std::size_t t = 0; t < lab_idx.size(); ++t) {
      auto dst = gl1.row(lab_idx[t]);
      auto src = ce.dlogits.row(t);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }

  // incremental mode: CE on unlabelled members against argmax of head_u,
  // through the extended head, ramped
  if (opts.mode == LossMode::incremental && !unlab_idx.empty()) {
    if (!model.extended)
      throw std::invalid_argument("total_loss: incremental mode needs an extended model");
    double rho = rampup(opts.epoch, opts.incremental_ce);
    Matrix pl(unlab_idx.size(), f1.p_l.cols);
    std::vector<long long> yhat(unlab_idx.size());
    res.pseudo_targets.resize(unlab_idx.size());
    for (std::size_t t = 0; t < unlab_idx.size(); ++t) {
      std::size_t i = unlab_idx[t];
      auto src = f1.p_l.row(i);
      std::copy(src.begin(), src.end(), pl.row(t).begin());
      auto pu = f1.p_u.row(i);
      long long arg = static_cast<long long>(
          std::max_element(pu.begin(), pu.end()) - pu.begin());
      res.pseudo_targets[t] = arg;
      yhat[t] = model.class_count_labelled + arg;
    }
    CeResult ce = ce_loss(pl, yhat);
    res.report.ce += rho * ce.value;
    for (std::size_t t = 0; t < unlab_idx.size(); ++t) {
      auto dst = gl1.row(unlab_idx[t]);
      auto src = ce.dlogits.row(t);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += rho * src[j];
    }
  }

  // pairwise BCE over the unlabelled members of view1
  Matrix gu1_prob(m, f1.p_u.cols, 0.0);
  bool any_prob_grad_u = false;
  if (opts.bce_enabled && unlab_idx.size() >= 2) {
    if (!s || s->values.rows != unlab_idx.size())
      throw std::invalid_argument("total_loss: pseudo-label matrix missing or mis-sized");
    Matrix pu(unlab_idx.size(), f1.p_u.cols);
    for (std::size_t t = 0; t < unlab_idx.size(); ++t) {
      auto src = f1.p_u.row(unlab_idx[t]);
      std::copy(src.begin(), src.end(), pu.row(t).begin());
    }
    BceResult bce = bce_loss(pu, *s);
    res.report.bce = bce.value;
    for (std::size_t t = 0; t < unlab_idx.size(); ++t) {
      auto dst = gu1_prob.row(unlab_idx[t]);
      auto src = bce.dprob.row(t);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
    any_prob_grad_u = true;
  }

  // MSE consistency, per-subset means, each head on its own data
  Matrix gl1_prob(m, f1.p_l.cols, 0.0), gl2_prob, gu2_prob;
  bool any_prob_grad_l = false;
  if (need_view2) {
    gl2_prob = Matrix(m, f1.p_l.cols, 0.0);
    gu2_prob = Matrix(m, f1.p_u.cols, 0.0);
    double mse_total = 0.0;
    if (opts.mode != LossMode::clustering && !lab_idx.empty()) {
      Matrix a(lab_idx.size(), f1.p_l.cols), b(lab_idx.size(), f1.p_l.cols);
      for (std::size_t t = 0; t < lab_idx.size(); ++t) {
        auto s1 = f1.p_l.row(lab_idx[t]);
        auto s2 = f2.p_l.row(lab_idx[t]);
        std::copy(s1.begin(), s1.end(), a.row(t).begin());
        std::copy(s2.begin(), s2.end(), b.row(t).begin());
      }
      MseResult mse = mse_consistency(a, b);
      mse_total += mse.value;
      for (std::size_t t = 0; t < lab_idx.size(); ++t) {
        auto d1 = gl1_prob.row(lab_idx[t]);
        auto d2 = gl2_prob.row(lab_idx[t]);
        auto s1 = mse.dp.row(t);
        auto s2 = mse.dp_hat.row(t);
        for (std::size_t j = 0; j < d1.size(); ++j) {
          d1[j] += omega * s1[j];
          d2[j] += omega * s2[j];
        }
      }
      any_prob_grad_l = true;
    }
    if (!unlab_idx.empty()) {
      Matrix a(unlab_idx.size(), f1.p_u.cols), b(unlab_idx.size(), f1.p_u.cols);
      for (std::size_t t = 0; t < unlab_idx.size(); ++t) {
        auto s1 = f1.p_u.row(unlab_idx[t]);
        auto s2 = f2.p_u.row(unlab_idx[t]);
        std::copy(s1.begin(), s1.end(), a.row(t).begin());
        std::copy(s2.begin(), s2.end(), b.row(t).begin());
      }
      MseResult mse = mse_consistency(a, b);
      mse_total += mse.value;
      for (std::size_t t = 0; t < unlab_idx.size(); ++t) {
        auto d1 = gu1_prob.row(unlab_idx[t]);
        auto d2 = gu2_prob.row(unlab_idx[t]);
        auto s1 = mse.dp.row(t);
        auto s2 = mse.dp_hat.row(t);
        for (std::size_t j = 0; j < d1.size(); ++j) {
          d1[j] += omega * s1[j];
          d2[j] += omega * s2[j];
        }
      }
      any_prob_grad_u = true;
    }
    res.report.mse = mse_total;
  } else if (opts.mse_enabled) {
    // omega == 0: still report the (unweighted) consistency value as 0 work
    res.report.mse = 0.0;
  }

  // probability-level gradients -> logit level through the softmax Jacobian
  if (any_prob_grad_l) {
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> tmp(f1.p_l.cols);
      softmax_backward_row(f1.p_l.row(i), gl1_prob.row(i), tmp);
      auto dst = gl1.row(i);
      for (std::size_t j = 0; j < tmp.size(); ++j) dst[j] += tmp[j];
    }
  }
  if (any_prob_grad_u) {
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> tmp(f1.p_u.cols);
      softmax_backward_row(f1.p_u.row(i), gu1_prob.row(i), tmp);
      auto dst = gu1.row(i);
      for (std::size_t j = 0; j < tmp.size(); ++j) dst[j] += tmp[j];
    }
  }
  backward_batch(model, view1, f1, gl1, gu1, res.grads);

  if (need_view2) {
    Matrix gl2_logit(m, f1.p_l.cols, 0.0), gu2_logit(m, f1.p_u.cols, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> tmp(f1.p_l.cols);
      softmax_backward_row(f2.p_l.row(i), gl2_prob.row(i), tmp);
      std::copy(tmp.begin(), tmp.end(), gl2_logit.row(i).begin());
      tmp.resize(f1.p_u.cols);
      softmax_backward_row(f2.p_u.row(i), gu2_prob.row(i), tmp);
      std::copy(tmp.begin(), tmp.end(), gu2_logit.row(i).begin());
    }
    backward_batch(model, view2, f2, gl2_logit, gu2_logit, res.grads);
  }

  res.report.total = res.report.ce + res.report.bce + res.report.omega * res.report.mse;
  return res;
}

}  // namespace novelkit
