#include "novelkit/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace novelkit {

Assignment hungarian(const Matrix& cost) {
  if (cost.rows == 0 || cost.cols == 0)
    throw std::invalid_argument("hungarian: empty cost matrix");
  for (double v : cost.data)
    if (!std::isfinite(v))
      throw std::invalid_argument("hungarian: non-finite cost entry");

  const std::size_t n = std::max(cost.rows, cost.cols);
  auto at = [&](std::size_t i, std::size_t j) -> double {
    return (i < cost.rows && j < cost.cols) ? cost(i, j) : 0.0;  // zero padding
  };

  const double inf = std::numeric_limits<double>::infinity();
  // potentials over padded square matrix, 1-based as usual for this scheme
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      std::size_t i0 = p[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) { minv[j] = cur; way[j] = j0; }
        if (minv[j] < delta) { delta = minv[j]; j1 = j; }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) { u[p[j]] += delta; v[j] -= delta; }
        else minv[j] -= delta;
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  for (std::size_t j = 1; j <= n; ++j) {
    std::size_t i = p[j];
    if (i == 0) continue;
    if (i - 1 < cost.rows && j - 1 < cost.cols) {
      out.pairs.emplace_back(static_cast<long long>(i - 1),
                             static_cast<long long>(j - 1));
      out.cost += cost(i - 1, j - 1);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

namespace {

std::vector<long long> dense_ids(std::span<const long long> v,
                                 std::vector<std::size_t>& remapped) {
  std::map<long long, std::size_t> ids;
  remapped.resize(v.size());
  std::vector<long long> order;
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto [it, fresh] = ids.emplace(v[i], ids.size());
    if (fresh) order.push_back(v[i]);
    remapped[i] = it->second;
  }
  // map insertion assigned ids in first-seen order; normalize to sorted order
  std::vector<long long> sorted_ids = order;
  std::sort(sorted_ids.begin(), sorted_ids.end());
  std::map<long long, std::size_t> rank;
  for (std::size_t i = 0; i < sorted_ids.size(); ++i) rank[sorted_ids[i]] = i;
  for (std::size_t i = 0; i < v.size(); ++i) remapped[i] = rank[v[i]];
  return sorted_ids;
}

}  // namespace

double clustering_acc(std::span<const long long> pred,
                      std::span<const long long> gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("clustering_acc: length mismatch");
  if (pred.empty()) throw std::invalid_argument("clustering_acc: empty input");

  std::vector<std::size_t> pi, gi;
  auto pids = dense_ids(pred, pi);
  auto gids = dense_ids(gt, gi);
  Matrix neg(pids.size(), gids.size(), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) neg(pi[i], gi[i]) -= 1.0;
  Assignment a = hungarian(neg);
  return -a.cost / static_cast<double>(pred.size());
}

double silhouette(const Matrix& points, std::span<const long long> assignments,
                  int threads) {
  const std::size_t n = points.rows;
  if (assignments.size() != n)
    throw std::invalid_argument("silhouette: assignment length mismatch");

  std::vector<std::size_t> cid;
  auto ids = dense_ids(assignments, cid);
  const std::size_t k = ids.size();
  if (k < 2)
    throw std::invalid_argument(
        "silhouette: undefined for fewer than two clusters");
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t c : cid) ++counts[c];

  std::vector<double> contrib(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    std::vector<double> sums(k, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sums[cid[j]] += std::sqrt(squared_distance(points.row(i), points.row(j)));
    }
    std::size_t own = cid[i];
    if (counts[own] <= 1) return;  // singleton convention: contribution 0
    double a = sums[own] / static_cast<double>(counts[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c == own) continue;
      b = std::min(b, sums[c] / static_cast<double>(counts[c]));
    }
    double denom = std::max(a, b);
    contrib[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  });

  double total = 0.0;
  for (double v : contrib) total += v;
  return total / static_cast<double>(n);
}

ContingencyTable confusion_matrix(std::span<const long long> gt,
                                  std::span<const long long> pred) {
  if (gt.size() != pred.size())
    throw std::invalid_argument("confusion_matrix: length mismatch");
  ContingencyTable t;
  std::vector<std::size_t> gi, pi;
  t.gt_ids = dense_ids(gt, gi);
  t.pred_ids = dense_ids(pred, pi);
  t.counts.assign(t.gt_ids.size(),
                  std::vector<long long>(t.pred_ids.size(), 0));
  for (std::size_t i = 0; i < gt.size(); ++i) ++t.counts[gi[i]][pi[i]];
  return t;
}

std::vector<long long> fit_novel_class_map(const DualHeadModel& model,
                                           const EmbeddingDataset& train_unlabelled) {
  const std::size_t c_u = static_cast<std::size_t>(model.class_count_unlabelled);
  std::vector<long long> clusters(train_unlabelled.size());
  for (std::size_t i = 0; i < train_unlabelled.size(); ++i) {
    auto r = forward(model, train_unlabelled.features.row(i));
    clusters[i] = static_cast<long long>(
        std::max_element(r.p_u.begin(), r.p_u.end()) - r.p_u.begin());
  }
  std::vector<long long> gt_ids;
  for (std::size_t i = 0; i < train_unlabelled.size(); ++i) {
    long long y = train_unlabelled.labels[i];
    if (y >= 0 && std::find(gt_ids.begin(), gt_ids.end(), y) == gt_ids.end())
      gt_ids.push_back(y);
  }
  std::sort(gt_ids.begin(), gt_ids.end());
  if (gt_ids.empty())
    throw std::invalid_argument(
        "fit_novel_class_map: training unlabelled set has no hidden labels");

  Matrix neg(c_u, gt_ids.size(), 0.0);
  for (std::size_t i = 0; i < train_unlabelled.size(); ++i) {
    long long y = train_unlabelled.labels[i];
    if (y < 0) continue;
    std::size_t col = static_cast<std::size_t>(
        std::lower_bound(gt_ids.begin(), gt_ids.end(), y) - gt_ids.begin());
    neg(static_cast<std::size_t>(clusters[i]), col) -= 1.0;
  }
  Assignment a = hungarian(neg);
  std::vector<long long> map(c_u, -1);
  for (auto [row, col] : a.pairs)
    map[static_cast<std::size_t>(row)] = gt_ids[static_cast<std::size_t>(col)];
  return map;
}

OldNewAll old_new_all_accuracy(const DualHeadModel& model,
                               const EmbeddingDataset& test, long long c_l,
                               std::span<const long long> novel_class_map) {
  if (!model.extended)
    throw std::invalid_argument("old_new_all_accuracy: model is not extended");
  if (novel_class_map.size() !=
      static_cast<std::size_t>(model.class_count_unlabelled))
    throw std::invalid_argument("old_new_all_accuracy: bad novel class map size");

  std::size_t n_old = 0, n_new = 0, ok_old = 0, ok_new = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    long long y = test.labels[i];
    if (y < 0) continue;
    auto r = forward(model, test.features.row(i));
    long long pred = static_cast<long long>(
        std::max_element(r.p_l.begin(), r.p_l.end()) - r.p_l.begin());
    if (y < c_l) {
      ++n_old;
      if (pred == y) ++ok_old;
    } else {
      ++n_new;
      if (pred >= c_l &&
          novel_class_map[static_cast<std::size_t>(pred - c_l)] == y)
        ++ok_new;
    }
  }
  if (n_old + n_new == 0)
    throw std::invalid_argument("old_new_all_accuracy: test set has no labels");

  OldNewAll out;
  out.old_acc = n_old ? static_cast<double>(ok_old) / static_cast<double>(n_old) : 0.0;
  out.new_acc = n_new ? static_cast<double>(ok_new) / static_cast<double>(n_new) : 0.0;
  out.all_acc = static_cast<double>(ok_old + ok_new) /
                static_cast<double>(n_old + n_new);
  return out;
}

}  // namespace novelkit
