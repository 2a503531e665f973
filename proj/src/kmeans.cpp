#include "novelkit/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace novelkit {

namespace {

bool rows_equal(std::span<const double> a, std::span<const double> b) {
  return std::equal(a.begin(), a.end(), b.begin());
}

// lexicographic order over rows; makes seeded sampling independent of the
// input permutation
std::vector<std::size_t> canonical_order(const Matrix& pts,
                                         const std::vector<std::size_t>& subset) {
  std::vector<std::size_t> ord = subset;
  std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
    auto ra = pts.row(a), rb = pts.row(b);
    for (std::size_t j = 0; j < ra.size(); ++j) {
      if (ra[j] != rb[j]) return ra[j] < rb[j];
    }
    return a < b;
  });
  return ord;
}

std::size_t count_distinct(const Matrix& pts,
                           const std::vector<std::size_t>& ord) {
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < ord.size(); ++i) {
    if (i == 0 || !rows_equal(pts.row(ord[i - 1]), pts.row(ord[i]))) ++distinct;
  }
  return distinct;
}

// Seeds every unset slot from the candidate points. The first pick (when no
// slot is set at all) is uniform; later slots take the best of a few
// D^2-weighted draws (greedy k-means++), which markedly improves the
// attained optima on small instances.
void kmeanspp_fill(const Matrix& pts, const std::vector<std::size_t>& candidates,
                   Matrix& centroids, std::vector<char>& slot_set, Rng& rng) {
  const std::size_t k = centroids.rows;
  std::size_t unset = 0;
  for (char s : slot_set)
    if (!s) ++unset;
  if (unset == 0) return;

  auto ord = canonical_order(pts, candidates);
  if (ord.empty())
    throw std::invalid_argument("k-means++: no candidate points to seed from");
  if (count_distinct(pts, ord) < unset)
    throw std::invalid_argument(
        "k-means++: k exceeds the number of distinct candidate points");

  std::vector<double> d2(ord.size(), std::numeric_limits<double>::infinity());
  bool any_set = false;
  auto refresh = [&](std::size_t slot) {
    for (std::size_t i = 0; i < ord.size(); ++i) {
      double d = squared_distance(pts.row(ord[i]), centroids.row(slot));
      if (d < d2[i]) d2[i] = d;
    }
  };
  for (std::size_t s = 0; s < k; ++s) {
    if (slot_set[s]) {
      refresh(s);
      any_set = true;
    }
  }

  const std::size_t trials =
      2 + static_cast<std::size_t>(std::log2(static_cast<double>(k) + 1.0));
  for (std::size_t slot = 0; slot < k; ++slot) {
    if (slot_set[slot]) continue;
    std::size_t best_pick;
    if (!any_set) {
      best_pick = rng.index(ord.size());
    } else {
      double total = std::accumulate(d2.begin(), d2.end(), 0.0);
      best_pick = ord.size() - 1;
      double best_potential = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < trials; ++t) {
        std::size_t at;
        if (total <= 0.0) {
          // all candidates coincide with chosen centroids; fall back
          at = rng.index(ord.size());
        } else {
          double r = rng.uniform() * total;
          double acc = 0.0;
          at = ord.size() - 1;
          for (std::size_t i = 0; i < ord.size(); ++i) {
            acc += d2[i];
            if (r < acc) { at = i; break; }
          }
        }
        double potential = 0.0;
        for (std::size_t i = 0; i < ord.size(); ++i) {
          double d = squared_distance(pts.row(ord[i]), pts.row(ord[at]));
          potential += std::min(d2[i], d);
        }
        if (potential < best_potential) {
          best_potential = potential;
          best_pick = at;
        }
      }
    }
    std::copy_n(pts.row(ord[best_pick]).begin(), pts.cols,
                centroids.row(slot).begin());
    slot_set[slot] = 1;
    refresh(slot);
    any_set = true;
  }
}

}  // namespace

Matrix kmeanspp_init(const Matrix& points, long long k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("k-means++: k must be >= 1");
  if (points.rows == 0) throw std::invalid_argument("k-means++: no points");
  std::vector<std::size_t> all(points.rows);
  std::iota(all.begin(), all.end(), std::size_t{0});
  Matrix centroids(static_cast<std::size_t>(k), points.cols);
  std::vector<char> slot_set(static_cast<std::size_t>(k), 0);
  Rng rng(Rng::mix(seed, stream::kmeans));
  kmeanspp_fill(points, all, centroids, slot_set, rng);
  return centroids;
}

ClusterOutcome lloyd(const Matrix& points, long long k, std::uint64_t seed,
                     const KMeansOptions& opts) {
  return constrained_lloyd(points, {}, k, seed, nullptr, opts);
}

ClusterOutcome constrained_lloyd(const Matrix& points,
                                 std::span<const long long> forced,
                                 long long k, std::uint64_t seed,
                                 const Matrix* init_centroids,
                                 const KMeansOptions& opts) {
  const std::size_t n = points.rows;
  const std::size_t d = points.cols;
  const std::size_t uk = static_cast<std::size_t>(k);
  if (k < 1) throw std::invalid_argument("constrained_lloyd: k must be >= 1");
  if (n == 0) throw std::invalid_argument("constrained_lloyd: no points");
  if (!forced.empty() && forced.size() != n)
    throw std::invalid_argument("constrained_lloyd: forced mask size mismatch");

  std::vector<std::size_t> free_idx;
  std::vector<long long> assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    long long f = forced.empty() ? -1 : forced[i];
    if (f >= k)
      throw std::invalid_argument("constrained_lloyd: forced id >= k at row " +
                                  std::to_string(i));
    if (f >= 0)
      assign[i] = f;
    else
      free_idx.push_back(i);
  }

  Matrix centroids(uk, d, 0.0);
  std::vector<char> slot_set(uk, 0);
  if (init_centroids) {
    if (init_centroids->cols != d || init_centroids->rows > uk)
      throw std::invalid_argument("constrained_lloyd: bad init centroid shape");
    for (std::size_t c = 0; c < init_centroids->rows; ++c) {
      std::copy_n(init_centroids->row(c).begin(), d, centroids.row(c).begin());
      slot_set[c] = 1;
    }
  }
  // a slot that owns forced points but no provided centroid starts at the
  // mean of its forced members; the slot <-> constraint binding would
  // otherwise be only as good as a random draw
  if (!forced.empty()) {
    for (std::size_t c = 0; c < uk; ++c) {
      if (slot_set[c]) continue;
      std::size_t cnt = 0;
      auto row = centroids.row(c);
      for (std::size_t i = 0; i < n; ++i) {
        if (forced[i] != static_cast<long long>(c)) continue;
        for (std::size_t j = 0; j < d; ++j) row[j] += points(i, j);
        ++cnt;
      }
      if (cnt) {
        for (std::size_t j = 0; j < d; ++j) row[j] /= static_cast<double>(cnt);
        slot_set[c] = 1;
      }
    }
  }
  Rng rng(Rng::mix(seed, stream::kmeans));
  bool all_set = std::all_of(slot_set.begin(), slot_set.end(),
                             [](char s) { return s != 0; });
  // with no free points, uncovered slots simply stay empty at the origin
  if (!all_set && !free_idx.empty())
    kmeanspp_fill(points, free_idx, centroids, slot_set, rng);

  ClusterOutcome out;
  out.inertia_trace.reserve(16);
  std::vector<std::size_t> counts(uk);
  std::vector<char> seized(n);

  long long iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    // assignment
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!forced.empty() && forced[i] >= 0) {
        inertia += squared_distance(points.row(i), centroids.row(
            static_cast<std::size_t>(forced[i])));
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      long long arg = 0;
      for (std::size_t c = 0; c < uk; ++c) {
        double dist = squared_distance(points.row(i), centroids.row(c));
        if (dist < best) { best = dist; arg = static_cast<long long>(c); }
      }
      assign[i] = arg;
      inertia += best;
    }
    out.inertia_trace.push_back(inertia);

    // update
    Matrix next = centroids;
    std::fill(counts.begin(), counts.end(), std::size_t{0});
    Matrix sums(uk, d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = static_cast<std::size_t>(assign[i]);
      auto row = sums.row(c);
      auto p = points.row(i);
      for (std::size_t j = 0; j < d; ++j) row[j] += p[j];
      ++counts[c];
    }
    for (std::size_t c = 0; c < uk; ++c) {
      if (counts[c] == 0) continue;  // repaired below, else keeps old centroid
      auto row = next.row(c);
      auto s = sums.row(c);
      for (std::size_t j = 0; j < d; ++j) row[j] = s[j] / static_cast<double>(counts[c]);
    }

    // empty-cluster repair: seize the free point farthest from its centroid
    bool repaired = false;
    std::fill(seized.begin(), seized.end(), char{0});
    for (std::size_t c = 0; c < uk; ++c) {
      if (counts[c] > 0) continue;
      double best = -1.0;
      std::size_t victim = n;
      for (std::size_t i : free_idx) {
        if (seized[i]) continue;
        double dist = squared_distance(
            points.row(i), next.row(static_cast<std::size_t>(assign[i])));
        if (dist > best) { best = dist; victim = i; }
      }
      if (victim == n) continue;  // nothing free to seize
      seized[victim] = 1;
      std::copy_n(points.row(victim).begin(), d, next.row(c).begin());
      assign[victim] = static_cast<long long>(c);
      repaired = true;
    }

    double shift = 0.0;
    for (std::size_t c = 0; c < uk; ++c)
      shift = std::max(shift, squared_distance(centroids.row(c), next.row(c)));
    centroids = std::move(next);
    if (!repaired && shift <= opts.tol * opts.tol) { ++iter; break; }
  }

  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    inertia += squared_distance(points.row(i),
                                centroids.row(static_cast<std::size_t>(assign[i])));

  out.assignments = std::move(assign);
  out.centroids = std::move(centroids);
  out.inertia = inertia;
  out.iterations = iter;
  return out;
}

}  // namespace novelkit
