#include "novelkit/classcount.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "novelkit/evaluate.hpp"

namespace novelkit {

namespace {

struct Problem {
  Matrix points;                     // probe points first, then unlabelled
  std::vector<long long> forced;     // anchor slot id or -1
  std::vector<char> validation;      // validation-probe member
  std::vector<long long> val_class;  // class id for validation members
  std::vector<char> unlab;           // unlabelled member
  Matrix anchor_means;               // one row per anchor class, slot order
  std::size_t n_anchor_slots = 0;
  std::size_t n_probe_classes = 0;
  std::size_t distinct_free = 0;
};

Problem build_problem(const EmbeddingDataset& labelled, const ProbeSplit& split,
                      const EmbeddingDataset& unlabelled) {
  if (split.anchor_probe.empty() || split.validation_probe.empty())
    throw std::invalid_argument(
        "estimate_class_count: anchor and validation probe sets must be nonempty");
  if (unlabelled.size() == 0)
    throw std::invalid_argument("estimate_class_count: unlabelled set is empty");
  if (labelled.dim() != unlabelled.dim())
    throw std::invalid_argument("estimate_class_count: dimension mismatch");

  std::set<long long> anchor(split.anchor_probe.begin(), split.anchor_probe.end());
  std::set<long long> validation(split.validation_probe.begin(),
                                 split.validation_probe.end());
  for (long long c : validation)
    if (anchor.count(c))
      throw std::invalid_argument("estimate_class_count: probe sets overlap");

  std::vector<long long> anchor_sorted(anchor.begin(), anchor.end());
  std::vector<std::size_t> probe_rows;
  for (std::size_t i = 0; i < labelled.size(); ++i) {
    long long y = labelled.labels[i];
    if (y >= 0 && (anchor.count(y) || validation.count(y))) probe_rows.push_back(i);
  }
  if (probe_rows.empty())
    throw std::invalid_argument("estimate_class_count: no probe points found");

  const std::size_t d = labelled.dim();
  Problem p;
  p.n_anchor_slots = anchor_sorted.size();
  p.n_probe_classes = anchor_sorted.size() + validation.size();
  p.points = Matrix(probe_rows.size() + unlabelled.size(), d);
  p.forced.assign(p.points.rows, -1);
  p.validation.assign(p.points.rows, 0);
  p.val_class.assign(p.points.rows, -1);
  p.unlab.assign(p.points.rows, 0);

  p.anchor_means = Matrix(anchor_sorted.size(), d, 0.0);
  std::vector<std::size_t> anchor_count(anchor_sorted.size(), 0);
  auto anchor_slot = [&](long long y) -> long long {
    auto it = std::lower_bound(anchor_sorted.begin(), anchor_sorted.end(), y);
    if (it == anchor_sorted.end() || *it != y) return -1;
    return static_cast<long long>(it - anchor_sorted.begin());
  };

  for (std::size_t r = 0; r < probe_rows.size(); ++r) {
    auto src = labelled.features.row(probe_rows[r]);
    std::copy(src.begin(), src.end(), p.points.row(r).begin());
    long long y = labelled.labels[probe_rows[r]];
    long long slot = anchor_slot(y);
    if (slot >= 0) {
      p.forced[r] = slot;
      auto mean = p.anchor_means.row(static_cast<std::size_t>(slot));
      for (std::size_t j = 0; j < d; ++j) mean[j] += src[j];
      ++anchor_count[static_cast<std::size_t>(slot)];
    } else {
      p.validation[r] = 1;
      p.val_class[r] = y;
    }
  }
  for (std::size_t s = 0; s < anchor_sorted.size(); ++s) {
    if (anchor_count[s] == 0)
      throw std::invalid_argument(
          "estimate_class_count: anchor class has no points");
    auto mean = p.anchor_means.row(s);
    for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(anchor_count[s]);
  }
  for (std::size_t i = 0; i < unlabelled.size(); ++i) {
    std::size_t r = probe_rows.size() + i;
    auto src = unlabelled.features.row(i);
    std::copy(src.begin(), src.end(), p.points.row(r).begin());
    p.unlab[r] = 1;
  }

  // distinct free points bound the feasible sweep: anchor slots are seeded
  // from class means, every other slot needs its own distinct free point
  std::vector<std::size_t> ord;
  for (std::size_t i = 0; i < p.points.rows; ++i)
    if (p.forced[i] < 0) ord.push_back(i);
  std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
    auto ra = p.points.row(a), rb = p.points.row(b);
    for (std::size_t j = 0; j < ra.size(); ++j)
      if (ra[j] != rb[j]) return ra[j] < rb[j];
    return false;
  });
  p.distinct_free = 0;
  for (std::size_t i = 0; i < ord.size(); ++i) {
    if (i == 0 || !std::equal(p.points.row(ord[i - 1]).begin(),
                              p.points.row(ord[i - 1]).end(),
                              p.points.row(ord[i]).begin()))
      ++p.distinct_free;
  }
  return p;
}

ClusterOutcome best_of_restarts(const Problem& p, long long k,
                                const EstimationConfig& cfg, std::uint64_t tag) {
  ClusterOutcome best;
  bool have = false;
  for (long long r = 0; r < cfg.restarts; ++r) {
    std::uint64_t seed = Rng::mix(cfg.seed, tag, static_cast<std::uint64_t>(r));
    ClusterOutcome out =
        constrained_lloyd(p.points, p.forced, k, seed, &p.anchor_means);
    if (!have || out.inertia < best.inertia) {
      best = std::move(out);
      have = true;
    }
  }
  return best;
}

double validation_acc(const Problem& p, const ClusterOutcome& out, long long k) {
  // match validation classes against non-anchor clusters only
  std::vector<long long> vclasses;
  for (std::size_t i = 0; i < p.points.rows; ++i)
    if (p.validation[i] && std::find(vclasses.begin(), vclasses.end(),
                                     p.val_class[i]) == vclasses.end())
      vclasses.push_back(p.val_class[i]);
  std::sort(vclasses.begin(), vclasses.end());

  std::size_t n_rows = static_cast<std::size_t>(k) - p.n_anchor_slots;
  std::size_t n_val = 0;
  for (std::size_t i = 0; i < p.points.rows; ++i)
    if (p.validation[i]) ++n_val;
  if (n_rows == 0) return 0.0;

  Matrix neg(n_rows, vclasses.size(), 0.0);
  for (std::size_t i = 0; i < p.points.rows; ++i) {
    if (!p.validation[i]) continue;
    long long c = out.assignments[i];
    if (c < static_cast<long long>(p.n_anchor_slots)) continue;  // never matched
    std::size_t col = static_cast<std::size_t>(
        std::lower_bound(vclasses.begin(), vclasses.end(), p.val_class[i]) -
        vclasses.begin());
    neg(static_cast<std::size_t>(c) - p.n_anchor_slots, col) -= 1.0;
  }
  Assignment a = hungarian(neg);
  return -a.cost / static_cast<double>(n_val);
}

double unlabelled_cvi(const Problem& p, const ClusterOutcome& out, int threads) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < p.points.rows; ++i)
    if (p.unlab[i]) rows.push_back(i);
  Matrix pts(rows.size(), p.points.cols);
  std::vector<long long> assign(rows.size());
  std::set<long long> distinct;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    auto src = p.points.row(rows[t]);
    std::copy(src.begin(), src.end(), pts.row(t).begin());
    assign[t] = out.assignments[rows[t]];
    distinct.insert(assign[t]);
  }
  if (distinct.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  return silhouette(pts, assign, threads);
}

}  // namespace

std::vector<long long> drop_outlier_clusters(
    const ClusterOutcome& outcome, std::span<const long long> novel_slot_ids,
    const std::vector<bool>& unlabelled_mask, double tau) {
  if (novel_slot_ids.empty())
    throw std::invalid_argument("drop_outlier_clusters: empty slot list");
  if (unlabelled_mask.size() != outcome.assignments.size())
    throw std::invalid_argument("drop_outlier_clusters: mask size mismatch");

  std::vector<long long> masses(novel_slot_ids.size(), 0);
  for (std::size_t i = 0; i < outcome.assignments.size(); ++i) {
    if (!unlabelled_mask[i]) continue;
    for (std::size_t s = 0; s < novel_slot_ids.size(); ++s)
      if (outcome.assignments[i] == novel_slot_ids[s]) ++masses[s];
  }
  long long max_mass = *std::max_element(masses.begin(), masses.end());
  std::vector<long long> kept;
  for (std::size_t s = 0; s < novel_slot_ids.size(); ++s)
    if (static_cast<double>(masses[s]) >= tau * static_cast<double>(max_mass))
      kept.push_back(novel_slot_ids[s]);
  return kept;
}

EstimationResult estimate_class_count(const EmbeddingDataset& labelled,
                                      const ProbeSplit& split,
                                      const EmbeddingDataset& unlabelled,
                                      const EstimationConfig& cfg) {
  if (cfg.cu_max < 1)
    throw std::invalid_argument("estimate_class_count: cu_max must be >= 1");
  if (cfg.tau_outlier <= 0.0 || cfg.tau_outlier >= 1.0)
    throw std::invalid_argument("estimate_class_count: tau must be in (0, 1)");
  if (cfg.restarts < 1)
    throw std::invalid_argument("estimate_class_count: restarts must be >= 1");

  Problem p = build_problem(labelled, split, unlabelled);
  const long long clr = static_cast<long long>(p.n_probe_classes);

  EstimationResult res;
  long long cand_count = cfg.cu_max + 1;
  long long feasible = static_cast<long long>(p.distinct_free) -
                       static_cast<long long>(clr - static_cast<long long>(p.n_anchor_slots));
  if (feasible < cand_count - 1) {
    cand_count = std::max<long long>(1, feasible + 1);
    res.truncated = true;
  }

  res.sweep.assign(static_cast<std::size_t>(cand_count), SweepRecord{});
  parallel_for(static_cast<std::size_t>(cand_count), cfg.threads,
               [&](std::size_t ci) {
                 long long k = clr + static_cast<long long>(ci);
                 ClusterOutcome out =
                     best_of_restarts(p, k, cfg, static_cast<std::uint64_t>(ci));
                 SweepRecord rec;
                 rec.candidate = static_cast<long long>(ci);
                 rec.acc_validation_probe = validation_acc(p, out, k);
                 rec.cvi_unlabelled =
                     ci == 0 ? std::numeric_limits<double>::quiet_NaN()
                             : unlabelled_cvi(p, out, 1);
                 res.sweep[ci] = rec;
               });

  auto argmax = [&](auto getter) {
    long long best = -1;
    double best_v = -std::numeric_limits<double>::infinity();
    for (const auto& rec : res.sweep) {
      double v = getter(rec);
      if (std::isnan(v)) continue;
      if (v > best_v) {  // strict: ties keep the smaller candidate
        best_v = v;
        best = rec.candidate;
      }
    }
    return best;
  };
  res.acc_argmax = argmax([](const SweepRecord& r) { return r.acc_validation_probe; });
  res.cvi_argmax = argmax([](const SweepRecord& r) { return r.cvi_unlabelled; });
  if (res.acc_argmax < 0) res.acc_argmax = 0;
  if (res.cvi_argmax < 0) res.cvi_argmax = res.acc_argmax;  // all-NaN fallback
  res.averaged = static_cast<long long>(std::floor(
      (static_cast<double>(res.acc_argmax) + static_cast<double>(res.cvi_argmax)) /
          2.0 +
      0.5));

  if (res.averaged == 0) {
    res.estimate = 0;
    return res;
  }
  ClusterOutcome final_run = best_of_restarts(p, clr + res.averaged, cfg, 0xF17A11ull);
  std::vector<long long> all_slots(static_cast<std::size_t>(clr + res.averaged));
  for (std::size_t s = 0; s < all_slots.size(); ++s)
    all_slots[s] = static_cast<long long>(s);
  std::vector<bool> unlab_mask(p.points.rows);
  for (std::size_t i = 0; i < p.points.rows; ++i) unlab_mask[i] = p.unlab[i] != 0;
  // clusters in the unlabelled data are identified by unlabelled mass over
  // every slot; probe-dominated slots fall below the tau threshold
  auto kept = drop_outlier_clusters(final_run, all_slots, unlab_mask,
                                    cfg.tau_outlier);
  res.estimate = static_cast<long long>(kept.size());
  return res;
}

}  // namespace novelkit
