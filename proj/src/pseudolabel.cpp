#include "novelkit/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "novelkit/kmeans.hpp"

namespace novelkit {

LabelerMethod labeler_from_string(const std::string& name) {
  if (name == "rank") return LabelerMethod::rank;
  if (name == "soft-rank") return LabelerMethod::soft_rank;
  if (name == "cosine") return LabelerMethod::cosine;
  if (name == "mutual-nn") return LabelerMethod::mutual_nn;
  if (name == "kmeans") return LabelerMethod::kmeans_batch;
  throw std::invalid_argument("unknown labeler: " + name);
}

std::string to_string(LabelerMethod m) {
  switch (m) {
    case LabelerMethod::rank: return "rank";
    case LabelerMethod::soft_rank: return "soft-rank";
    case LabelerMethod::cosine: return "cosine";
    case LabelerMethod::mutual_nn: return "mutual-nn";
    case LabelerMethod::kmeans_batch: return "kmeans";
  }
  return "?";
}

std::vector<int> topk_set(std::span<const double> z, int k) {
  int d = static_cast<int>(z.size());
  if (k < 1 || k > d)
    throw std::invalid_argument("topk_set: k must be in [1, d]");
  std::vector<int> idx(static_cast<std::size_t>(d));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                    [&](int a, int b) {
                      if (z[static_cast<std::size_t>(a)] != z[static_cast<std::size_t>(b)])
                        return z[static_cast<std::size_t>(a)] > z[static_cast<std::size_t>(b)];
                      return a < b;
                    });
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

PseudoLabelMatrix make(LabelerMethod m, std::size_t n) {
  PseudoLabelMatrix out;
  out.method = m;
  out.values = Matrix(n, n, 0.0);
  return out;
}

std::vector<std::vector<int>> row_topk(const Matrix& batch, int k) {
  std::vector<std::vector<int>> sets(batch.rows);
  for (std::size_t i = 0; i < batch.rows; ++i) sets[i] = topk_set(batch.row(i), k);
  return sets;
}

}  // namespace

PseudoLabelMatrix rank_stats_labels(const Matrix& batch, int k) {
  if (batch.rows < 1) throw std::invalid_argument("rank_stats_labels: empty batch");
  auto sets = row_topk(batch, k);
  // group identical sets so comparisons are O(m) instead of O(m^2 k)
  std::map<std::vector<int>, int> groups;
  std::vector<int> gid(batch.rows);
  for (std::size_t i = 0; i < batch.rows; ++i)
    gid[i] = groups.emplace(sets[i], static_cast<int>(groups.size())).first->second;
  auto out = make(LabelerMethod::rank, batch.rows);
  for (std::size_t i = 0; i < batch.rows; ++i)
    for (std::size_t j = 0; j < batch.rows; ++j)
      out.values(i, j) = gid[i] == gid[j] ? 1.0 : 0.0;
  return out;
}

PseudoLabelMatrix soft_rank_labels(const Matrix& batch, int k) {
  if (batch.rows < 1) throw std::invalid_argument("soft_rank_labels: empty batch");
  auto sets = row_topk(batch, k);
  auto out = make(LabelerMethod::soft_rank, batch.rows);
  for (std::size_t i = 0; i < batch.rows; ++i) {
    out.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < batch.rows; ++j) {
      std::size_t a = 0, b = 0, shared = 0;
      while (a < sets[i].size() && b < sets[j].size()) {
        if (sets[i][a] == sets[j][b]) { ++shared; ++a; ++b; }
        else if (sets[i][a] < sets[j][b]) ++a;
        else ++b;
      }
      double s = static_cast<double>(shared) / static_cast<double>(k);
      out.values(i, j) = s;
      out.values(j, i) = s;
    }
  }
  return out;
}

PseudoLabelMatrix cosine_labels(const Matrix& batch, double tau) {
  if (batch.rows < 1) throw std::invalid_argument("cosine_labels: empty batch");
  if (tau <= 0.0 || tau >= 1.0)
    throw std::invalid_argument("cosine_labels: tau must be in (0, 1)");
  std::vector<double> norm(batch.rows);
  for (std::size_t i = 0; i < batch.rows; ++i) {
    double s = 0.0;
    for (double v : batch.row(i)) s += v * v;
    if (s == 0.0)
      throw std::invalid_argument("cosine_labels: zero-norm row " +
                                  std::to_string(i));
    norm[i] = std::sqrt(s);
  }
  auto out = make(LabelerMethod::cosine, batch.rows);
  for (std::size_t i = 0; i < batch.rows; ++i) {
    out.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < batch.rows; ++j) {
      double dot = 0.0;
      auto ri = batch.row(i), rj = batch.row(j);
      for (std::size_t t = 0; t < ri.size(); ++t) dot += ri[t] * rj[t];
      double v = dot / (norm[i] * norm[j]) >= tau ? 1.0 : 0.0;
      out.values(i, j) = v;
      out.values(j, i) = v;
    }
  }
  return out;
}

PseudoLabelMatrix mutual_nn_labels(const Matrix& batch) {
  std::size_t m = batch.rows;
  if (m < 2) throw std::invalid_argument("mutual_nn_labels: need >= 2 rows");
  // nearest neighbor by squared distance, self excluded, ties to lower index
  std::vector<std::size_t> nn(m);
  for (std::size_t i = 0; i < m; ++i) {
    double best = 0.0;
    std::size_t arg = m;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      double d = squared_distance(batch.row(i), batch.row(j));
      if (arg == m || d < best) { best = d; arg = j; }
    }
    nn[i] = arg;
  }
  auto out = make(LabelerMethod::mutual_nn, m);
  for (std::size_t i = 0; i < m; ++i) {
    out.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      double v = (nn[i] == j || nn[j] == i || nn[i] == nn[j]) ? 1.0 : 0.0;
      out.values(i, j) = v;
      out.values(j, i) = v;
    }
  }
  return out;
}

PseudoLabelMatrix kmeans_batch_labels(const Matrix& batch, long long k_clusters,
                                      std::uint64_t seed) {
  if (k_clusters < 1 || static_cast<std::size_t>(k_clusters) > batch.rows)
    throw std::invalid_argument("kmeans_batch_labels: k must be in [1, m]");
  ClusterOutcome res = lloyd(batch, k_clusters, seed);
  auto out = make(LabelerMethod::kmeans_batch, batch.rows);
  for (std::size_t i = 0; i < batch.rows; ++i)
    for (std::size_t j = 0; j < batch.rows; ++j)
      out.values(i, j) = res.assignments[i] == res.assignments[j] ? 1.0 : 0.0;
  return out;
}

PseudoLabelMatrix compute_pseudo_labels(const Matrix& batch,
                                        const LabelerConfig& cfg,
                                        std::uint64_t seed) {
  switch (cfg.method) {
    case LabelerMethod::rank: return rank_stats_labels(batch, cfg.k);
    case LabelerMethod::soft_rank: return soft_rank_labels(batch, cfg.k);
    case LabelerMethod::cosine: return cosine_labels(batch, cfg.cosine_tau);
    case LabelerMethod::mutual_nn: return mutual_nn_labels(batch);
    case LabelerMethod::kmeans_batch: {
      long long k = std::min<long long>(cfg.batch_kmeans_k,
                                        static_cast<long long>(batch.rows));
      return kmeans_batch_labels(batch, k, seed);
    }
  }
  throw std::logic_error("compute_pseudo_labels: bad method");
}

}  // namespace novelkit
