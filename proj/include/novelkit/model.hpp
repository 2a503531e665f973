#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "novelkit/common.hpp"

namespace novelkit {

/// Trainable trunk (one affine layer + rectifier, or identity) with two
/// softmax heads on top: a classifier over the known classes and a cluster
/// assignment head over the novel ones.
struct DualHeadModel {
  bool identity_trunk = false;
  long long d_in = 0;
  long long d_h = 0;
  long long class_count_labelled = 0;    // C^l
  long long class_count_unlabelled = 0;  // C^u
  bool extended = false;                 // head_l covers C^l + C^u after extension

  Matrix trunk_w;                 // d_h x d_in (empty for identity trunk)
  std::vector<double> trunk_b;    // d_h
  Matrix head_l_w;                // head_l_out x d_h
  std::vector<double> head_l_b;
  Matrix head_u_w;                // C^u x d_h
  std::vector<double> head_u_b;

  long long head_l_out() const {
    return extended ? class_count_labelled + class_count_unlabelled
                    : class_count_labelled;
  }
};

struct ModelGradients {
  Matrix trunk_w;
  std::vector<double> trunk_b;
  Matrix head_l_w;
  std::vector<double> head_l_b;
  Matrix head_u_w;
  std::vector<double> head_u_b;

  static ModelGradients zeros_like(const DualHeadModel& m);
  void check_finite() const;
};

struct ForwardResult {
  std::vector<double> z;    // trunk output
  std::vector<double> p_l;  // softmax over head_l
  std::vector<double> p_u;  // softmax over head_u
};

DualHeadModel init_model(long long d_in, long long d_h, long long c_l,
                         long long c_u, std::uint64_t seed,
                         bool identity_trunk = false);

ForwardResult forward(const DualHeadModel& model, std::span<const double> x);

/// Adds C^u randomly initialized rows to head_l; existing rows are preserved
/// bit-exactly. Extending twice is an error.
DualHeadModel extend_incremental(const DualHeadModel& model, std::uint64_t seed);

/// Numerically stable softmax (max subtraction), written into out.
void softmax(std::span<const double> logits, std::span<double> out);

void save_model(const DualHeadModel& model, const std::string& path,
                const std::vector<long long>* novel_class_map = nullptr);
DualHeadModel load_model(const std::string& path,
                         std::vector<long long>* novel_class_map = nullptr);

}  // namespace novelkit
