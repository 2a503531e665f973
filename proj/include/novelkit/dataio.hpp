#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "novelkit/common.hpp"

namespace novelkit {

enum class FileFormat { csv, bin };

FileFormat format_from_path(const std::string& path);

/// A set of embedding vectors with an optional class id per row.
/// Label -1 marks an unlabelled point. Datasets produced by synth_mixture
/// keep ground-truth ids on the "unlabelled" split; training code only ever
/// sees them through without_labels().
struct EmbeddingDataset {
  Matrix features;
  std::vector<long long> labels;  // size n, -1 = unlabelled
  long long class_count_labelled = 0;
  std::optional<long long> class_count_unlabelled_hint;
  bool has_labels = true;

  std::size_t size() const { return features.rows; }
  std::size_t dim() const { return features.cols; }
  bool any_label() const;

  EmbeddingDataset without_labels() const;
  void validate() const;
};

struct ProbeSplit {
  std::vector<long long> train_classes;
  std::vector<long long> anchor_probe;
  std::vector<long long> validation_probe;
};

struct SynthSpec {
  long long class_count_labelled = 5;
  long long class_count_unlabelled = 5;
  long long points_per_class = 200;
  long long dim = 16;
  double cluster_std = 1.0;
  double separation = 8.0;
  double box_scale = 3.0;  // hypercube side = box_scale * separation * std * C^(1/d)
  std::uint64_t seed = 0;
};

struct SynthResult {
  EmbeddingDataset labelled;    // classes [0, C^l)
  EmbeddingDataset unlabelled;  // classes [C^l, C^l+C^u), ids kept for evaluation
  EmbeddingDataset test;        // fresh points from every class
};

EmbeddingDataset load_dataset(const std::string& path, FileFormat format);
void save_dataset(const EmbeddingDataset& ds, const std::string& path,
                  FileFormat format);

/// Isotropic Gaussian clusters around means rejected to pairwise distance
/// >= separation * cluster_std inside a centered hypercube.
SynthResult synth_mixture(const SynthSpec& spec);

/// Withholds probe_class_count labelled classes and splits them into anchor
/// and validation probe sets (sizes round(anchor_ratio*C^l_r) and the rest).
ProbeSplit split_probe(const EmbeddingDataset& labelled,
                       long long probe_class_count, double anchor_ratio,
                       std::uint64_t seed);

std::vector<long long> load_label_file(const std::string& path);
void save_label_file(const std::vector<long long>& labels,
                     const std::string& path);

}  // namespace novelkit
