// Test-only reference implementations, kept independent of the library code
// paths they are used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "novelkit/common.hpp"

namespace oracles {

using novelkit::Matrix;

inline double dist2(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// plain Lloyd with given initial centroids, no repairs, no cleverness
inline std::vector<long long> reference_lloyd(const Matrix& pts, Matrix centroids,
                                              int iters = 200) {
  std::size_t n = pts.rows, k = centroids.rows;
  std::vector<long long> assign(n, 0);
  for (int it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double d = dist2(pts.row(i), centroids.row(c));
        if (d < best) { best = d; assign[i] = static_cast<long long>(c); }
      }
    }
    Matrix sums(k, pts.cols, 0.0);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sums.row(static_cast<std::size_t>(assign[i]));
      for (std::size_t j = 0; j < pts.cols; ++j) s[j] += pts(i, j);
      ++cnt[static_cast<std::size_t>(assign[i])];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (cnt[c])
        for (std::size_t j = 0; j < pts.cols; ++j)
          centroids(c, j) = sums.row(c)[j] / static_cast<double>(cnt[c]);
  }
  return assign;
}

// minimum assignment cost by trying all permutations (square matrix)
inline double brute_force_assignment(const Matrix& cost) {
  std::size_t n = cost.rows;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0;
    for (std::size_t i = 0; i < n; ++i) c += cost(i, perm[i]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// clustering accuracy by trying every injective cluster->class map
inline double brute_force_acc(const std::vector<long long>& pred,
                              const std::vector<long long>& gt) {
  auto distinct = [](const std::vector<long long>& v) {
    std::vector<long long> d = v;
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    return d;
  };
  auto pids = distinct(pred), gids = distinct(gt);
  // pad the smaller side so permutations cover injective maps both ways
  std::size_t n = std::max(pids.size(), gids.size());
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      std::size_t pi = static_cast<std::size_t>(
          std::lower_bound(pids.begin(), pids.end(), pred[i]) - pids.begin());
      std::size_t mapped = perm[pi];
      if (mapped < gids.size() && gids[mapped] == gt[i]) ++hits;
    }
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

// straight transcription of the silhouette definition, O(n^2) per point pair
inline double reference_silhouette(const Matrix& pts,
                                   const std::vector<long long>& assign) {
  std::size_t n = pts.rows;
  std::vector<long long> ids = assign;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t own_count = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (assign[j] == assign[i]) ++own_count;
    if (own_count <= 1) continue;
    double a = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && assign[j] == assign[i])
        a += std::sqrt(dist2(pts.row(i), pts.row(j)));
    a /= static_cast<double>(own_count - 1);
    double b = std::numeric_limits<double>::infinity();
    for (long long c : ids) {
      if (c == assign[i]) continue;
      double sum = 0;
      std::size_t cnt = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (assign[j] == c) {
          sum += std::sqrt(dist2(pts.row(i), pts.row(j)));
          ++cnt;
        }
      b = std::min(b, sum / static_cast<double>(cnt));
    }
    double m = std::max(a, b);
    if (m > 0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

// optimal k-means inertia on tiny instances by enumerating all assignments
inline double brute_force_kmeans_inertia(const Matrix& pts, std::size_t k) {
  std::size_t n = pts.rows;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> assign(n, 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= k;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i) { assign[i] = c % k; c /= k; }
    Matrix sums(k, pts.cols, 0.0);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < pts.cols; ++j) sums(assign[i], j) += pts(i, j);
      ++cnt[assign[i]];
    }
    double inertia = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (cnt[assign[i]] == 0) continue;
      for (std::size_t j = 0; j < pts.cols; ++j) {
        double m = sums(assign[i], j) / static_cast<double>(cnt[assign[i]]);
        double dv = pts(i, j) - m;
        inertia += dv * dv;
      }
    }
    best = std::min(best, inertia);
  }
  return best;
}

// central finite differences over a parameter vector
template <typename LossFn>
inline std::vector<double> finite_diff(std::vector<double>& theta, LossFn loss,
                                       double h = 1e-5) {
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double old = theta[i];
    theta[i] = old + h;
    double lp = loss();
    theta[i] = old - h;
    double lm = loss();
    theta[i] = old;
    grad[i] = (lp - lm) / (2 * h);
  }
  return grad;
}

inline double max_rel_err(const std::vector<double>& approx,
                          const std::vector<double>& exact) {
  double max_abs = 0;
  for (double v : exact) max_abs = std::max(max_abs, std::abs(v));
  double denom = std::max(max_abs, 1e-8);
  double worst = 0;
  for (std::size_t i = 0; i < approx.size(); ++i)
    worst = std::max(worst, std::abs(approx[i] - exact[i]) / denom);
  return worst;
}

}  // namespace oracles
