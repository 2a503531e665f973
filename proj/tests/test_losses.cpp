#include <cmath>

#include "doctest.h"
#include "novelkit/losses.hpp"
#include "oracles.hpp"

using namespace novelkit;

namespace {

Matrix random_probs(std::size_t n, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix logits(n, c);
  for (double& v : logits.data) v = rng.uniform(-2, 2);
  Matrix p(n, c);
  for (std::size_t i = 0; i < n; ++i) softmax(logits.row(i), p.row(i));
  return p;
}

// total loss as a function of the flat parameter vector, pseudo-labels fixed
struct TotalLossProbe {
  DualHeadModel model;
  Matrix view1, view2;
  std::vector<long long> labels;
  PseudoLabelMatrix s;
  TotalLossOptions opts;

  double value() {
    return total_loss(model, view1, view2, labels, &s, opts).report.total;
  }
};

TotalLossProbe make_probe(std::uint64_t seed, LossMode mode) {
  Rng rng(seed);
  TotalLossProbe p;
  p.model = init_model(5, 7, 3, 4, seed);
  if (mode == LossMode::incremental)
    p.model = extend_incremental(p.model, seed + 1);
  std::size_t m = 16;
  p.view1 = Matrix(m, 5);
  p.view2 = Matrix(m, 5);
  for (double& v : p.view1.data) v = rng.normal();
  for (std::size_t i = 0; i < p.view1.size(); ++i)
    p.view2.data[i] = p.view1.data[i] + 0.05 * rng.normal();
  p.labels.assign(m, -1);
  if (mode != LossMode::clustering)
    for (std::size_t i = 0; i < m / 2; ++i)
      p.labels[i] = static_cast<long long>(rng.index(3));

  std::size_t n_unlab = 0;
  for (long long y : p.labels)
    if (y < 0) ++n_unlab;
  // fixed random symmetric binary pseudo-labels with unit diagonal
  p.s.values = Matrix(n_unlab, n_unlab, 0.0);
  for (std::size_t i = 0; i < n_unlab; ++i) {
    p.s.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n_unlab; ++j) {
      double v = rng.uniform() < 0.3 ? 1.0 : 0.0;
      p.s.values(i, j) = v;
      p.s.values(j, i) = v;
    }
  }
  p.opts.mode = mode;
  p.opts.epoch = 10;
  p.opts.consistency = {1.5, 40};
  p.opts.incremental_ce = {0.05, 40};
  return p;
}

}  // namespace

TEST_CASE("rampup closed forms") {
  RampSchedule sched{2.0, 50};
  CHECK(rampup(50, sched) == doctest::Approx(2.0));
  CHECK(rampup(120, sched) == doctest::Approx(2.0));  // held at lambda past T
  CHECK(rampup(0, sched) == doctest::Approx(2.0 * std::exp(-5.0)));
  double prev = -1;
  for (double r = 0; r <= 50; r += 0.5) {
    double w = rampup(r, sched);
    CHECK(w >= prev);
    prev = w;
  }
  CHECK_THROWS_AS(rampup(-1, sched), std::invalid_argument);
}

TEST_CASE("cross entropy closed forms") {
  Matrix uniform(4, 5, 0.2);
  std::vector<long long> y = {0, 1, 2, 3};
  CeResult r = ce_loss(uniform, y);
  CHECK(r.value == doctest::Approx(std::log(5.0)));

  Matrix onehot(2, 3, 0.0);
  onehot(0, 1) = 1.0;
  onehot(1, 2) = 1.0;
  std::vector<long long> y2 = {1, 2};
  CHECK(ce_loss(onehot, y2).value == doctest::Approx(0.0));

  std::vector<long long> bad = {0, 7};
  CHECK_THROWS_AS(ce_loss(onehot, bad), std::invalid_argument);
}

TEST_CASE("cross entropy gradient matches finite differences") {
  Rng rng(12);
  Matrix logits(6, 4);
  for (double& v : logits.data) v = rng.uniform(-2, 2);
  std::vector<long long> y(6);
  for (auto& v : y) v = static_cast<long long>(rng.index(4));

  auto loss = [&]() {
    Matrix p(6, 4);
    for (std::size_t i = 0; i < 6; ++i) softmax(logits.row(i), p.row(i));
    return ce_loss(p, y).value;
  };
  Matrix p(6, 4);
  for (std::size_t i = 0; i < 6; ++i) softmax(logits.row(i), p.row(i));
  CeResult r = ce_loss(p, y);
  auto fd = oracles::finite_diff(logits.data, loss);
  CHECK(oracles::max_rel_err(fd, r.dlogits.data) < 1e-6);
}

TEST_CASE("bce closed forms") {
  // identical one-hot rows with s = 1 -> near-zero pair terms
  Matrix p(2, 3, 0.0);
  p(0, 0) = 1.0;
  p(1, 0) = 1.0;
  PseudoLabelMatrix s;
  s.values = Matrix(2, 2, 1.0);
  BceResult r = bce_loss(p, s);
  CHECK(r.value < 1e-5);

  // sigma = 0.5 with s = 1 contributes ln 2 per pair
  Matrix q(2, 2, 0.0);
  q.data = {1.0, 0.0, 0.5, 0.5};  // q0.q1 = 0.5
  PseudoLabelMatrix s01;
  s01.values = Matrix(2, 2, 1.0);  // unit diagonal per the matrix contract
  BceResult r2 = bce_loss(q, s01);
  // off-diagonal pairs give ln2 each; the (1,1) term -log(0.5) adds another;
  // the (0,0) term is ~0 after clamping sigma to 1 - eps
  double expect = 3.0 * std::log(2.0) / 4.0;
  CHECK(r2.value == doctest::Approx(expect));
}

TEST_CASE("bce gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    Matrix p = random_probs(8, 4, seed + 50);
    PseudoLabelMatrix s;
    s.values = Matrix(8, 8, 0.0);
    for (std::size_t i = 0; i < 8; ++i) {
      s.values(i, i) = 1.0;
      for (std::size_t j = i + 1; j < 8; ++j) {
        double v = rng.uniform() < 0.4 ? 1.0 : 0.0;
        s.values(i, j) = v;
        s.values(j, i) = v;
      }
    }
    auto loss = [&]() { return bce_loss(p, s).value; };
    BceResult r = bce_loss(p, s);
    auto fd = oracles::finite_diff(p.data, loss);
    CHECK(oracles::max_rel_err(fd, r.dprob.data) < 1e-5);
  }
}

TEST_CASE("mse consistency closed forms and symmetry") {
  Matrix p(1, 2), q(1, 2);
  p.data = {1.0, 0.0};
  q.data = {0.0, 1.0};
  MseResult r = mse_consistency(p, q);
  CHECK(r.value == doctest::Approx(2.0));
  CHECK(mse_consistency(q, p).value == doctest::Approx(r.value));
  CHECK(mse_consistency(p, p).value == doctest::Approx(0.0));

  Matrix bad(2, 2, 0.0);
  CHECK_THROWS_AS(mse_consistency(p, bad), std::invalid_argument);
}

TEST_CASE("mse gradient matches finite differences") {
  Matrix p = random_probs(5, 3, 1);
  Matrix q = random_probs(5, 3, 2);
  auto loss = [&]() { return mse_consistency(p, q).value; };
  MseResult r = mse_consistency(p, q);
  auto fd = oracles::finite_diff(p.data, loss);
  CHECK(oracles::max_rel_err(fd, r.dp.data) < 1e-6);
  auto loss_q = [&]() { return mse_consistency(p, q).value; };
  auto fd_q = oracles::finite_diff(q.data, loss_q);
  CHECK(oracles::max_rel_err(fd_q, r.dp_hat.data) < 1e-6);
}

TEST_CASE("total loss report additivity and structural zeros") {
  auto probe = make_probe(3, LossMode::joint);
  auto res = total_loss(probe.model, probe.view1, probe.view2, probe.labels,
                        &probe.s, probe.opts);
  CHECK(res.report.total ==
        doctest::Approx(res.report.ce + res.report.bce +
                        res.report.omega * res.report.mse).epsilon(1e-10));

  auto cl = make_probe(4, LossMode::clustering);
  auto res_cl = total_loss(cl.model, cl.view1, cl.view2, cl.labels, &cl.s, cl.opts);
  CHECK(res_cl.report.ce == 0.0);  // Eq. without a CE term

  // with the consistency weight off, total = ce + bce exactly
  auto j0 = make_probe(5, LossMode::joint);
  j0.opts.consistency.lambda = 0.0;
  auto res_j0 = total_loss(j0.model, j0.view1, j0.view2, j0.labels, &j0.s, j0.opts);
  CHECK(res_j0.report.total == doctest::Approx(res_j0.report.ce + res_j0.report.bce));
}

TEST_CASE("total loss gradient matches finite differences on all parameters") {
  for (auto mode : {LossMode::joint, LossMode::clustering}) {
    auto probe = make_probe(7, mode);
    auto res = total_loss(probe.model, probe.view1, probe.view2, probe.labels,
                          &probe.s, probe.opts);

    std::vector<std::pair<std::vector<double>*, const std::vector<double>*>> params = {
        {&probe.model.trunk_w.data, &res.grads.trunk_w.data},
        {&probe.model.trunk_b, &res.grads.trunk_b},
        {&probe.model.head_l_w.data, &res.grads.head_l_w.data},
        {&probe.model.head_l_b, &res.grads.head_l_b},
        {&probe.model.head_u_w.data, &res.grads.head_u_w.data},
        {&probe.model.head_u_b, &res.grads.head_u_b},
    };
    for (auto& [theta, grad] : params) {
      auto fd = oracles::finite_diff(*theta, [&]() { return probe.value(); });
      CHECK(oracles::max_rel_err(fd, *grad) < 1e-4);
    }
  }
}

TEST_CASE("bce descent on the all-ones toy instance") {
  // s = all ones is minimized by equal one-hot rows: a descent step from a
  // soft start must reduce the loss
  Matrix p = random_probs(6, 3, 9);
  PseudoLabelMatrix s;
  s.values = Matrix(6, 6, 1.0);
  BceResult r = bce_loss(p, s);
  Matrix stepped = p;
  for (std::size_t i = 0; i < p.size(); ++i)
    stepped.data[i] = p.data[i] - 1e-3 * r.dprob.data[i];
  BceResult r2 = bce_loss(stepped, s);
  CHECK(r2.value < r.value);
}
