#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "s2fl/error.hpp"

namespace s2fl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One modality observed over N samples, stored channels x samples.
struct ModalityBlock {
  std::size_t id = 0;  // 0-based position in the modality list
  std::string name;
  Matrix data;

  Eigen::Index channels() const { return data.rows(); }
  Eigen::Index samples() const { return data.cols(); }
};

/// Validates shape and finiteness; throws Error on violation.
ModalityBlock make_block(std::size_t id, std::string name, Matrix data);

/// Aligned multimodal training set. The block-diagonal data matrix and the
/// replicated label matrix are never materialized; helpers below work blockwise.
class TrainingStack {
 public:
  TrainingStack() = default;

  const std::vector<ModalityBlock>& blocks() const { return blocks_; }
  const ModalityBlock& block(std::size_t k) const { return blocks_.at(k); }
  std::size_t num_modalities() const { return blocks_.size(); }
  Eigen::Index num_samples() const { return num_samples_; }
  int num_classes() const { return num_classes_; }

  /// 0-based class index of each sample.
  const std::vector<int>& labels() const { return labels_; }
  /// One-hot C x N matrix.
  const Matrix& onehot() const { return onehot_; }

  /// Column offset of modality k inside a Sum(d_k)-wide projection.
  const std::vector<Eigen::Index>& channel_offsets() const { return offsets_; }
  Eigen::Index total_channels() const { return offsets_.back(); }

  friend TrainingStack build_stack_zero_based(std::vector<ModalityBlock> blocks,
                                              const std::vector<int>& labels,
                                              int num_classes);

 private:
  std::vector<ModalityBlock> blocks_;
  std::vector<int> labels_;
  Matrix onehot_;
  std::vector<Eigen::Index> offsets_{0};
  Eigen::Index num_samples_ = 0;
  int num_classes_ = 0;
};

/// Builds a stack from 1-based labels in 1..num_classes.
TrainingStack build_stack(std::vector<ModalityBlock> blocks,
                          const std::vector<int>& labels, int num_classes);

/// Same as build_stack but takes labels already converted to 0-based.
TrainingStack build_stack_zero_based(std::vector<ModalityBlock> blocks,
                                     const std::vector<int>& labels,
                                     int num_classes);

/// Replicated label matrix [Y, ..., Y]; test helper, not used by the solver.
Matrix replicated_onehot(const TrainingStack& stack);

struct HyperParams {
  double alpha = 1.0;
  double beta = 0.1;
  double sigma = 1.0;
  int q = 10;
  int subspace_dim = 10;
  int max_outer = 100;
  int max_admm = 5000;
  double zeta = 1e-4;
  double eps = 1e-6;
  double mu0 = 1e-3;
  double rho = 1.5;
  double mu_max = 1e6;
  std::uint64_t seed = 0;
  /// Keep a block's previous value when its ADMM result did not converge or
  /// would raise the objective (only once that block holds a converged value).
  bool monotone = true;

  /// Checks scalar ranges and d_s <= total_channels. Throws InvalidDs for the
  /// latter so callers can surface it separately.
  void validate(Eigen::Index total_channels) const;
};

/// Learned shared projection (block-partitioned by modality), per-modality
/// specific projections, and the regressor.
struct ProjectionModel {
  Matrix theta0;                      // d_s x Sum(d_k)
  std::vector<Eigen::Index> offsets;  // size K+1, cumulative d_k
  std::vector<Matrix> theta_k;        // K entries, d_s x d_k
  Matrix P;                           // C x d_s

  std::size_t num_modalities() const { return theta_k.size(); }
  Eigen::Index subspace_dim() const { return theta0.rows(); }
  Eigen::Index channels(std::size_t k) const {
    return offsets[k + 1] - offsets[k];
  }

  auto shared_block(std::size_t k) const {
    return theta0.middleCols(offsets[k], channels(k));
  }
  /// Generalized projection Theta0 + [Theta_1, ..., Theta_K] for modality k.
  Matrix generalized_block(std::size_t k) const {
    return shared_block(k) + theta_k[k];
  }
  Matrix generalized() const;

  static ProjectionModel zeros(const TrainingStack& stack,
                               Eigen::Index subspace_dim);
};

enum class Termination { Tolerance, MaxIterations };

struct SubproblemRecord {
  int outer_iteration = 0;
  int target = -1;  // -1 shared, otherwise specific modality index
  int iterations = 0;
  std::vector<double> residual_h;
  std::vector<double> residual_g;
  std::vector<double> mu;  // value used during each iteration
  Termination terminated_by = Termination::MaxIterations;
  bool accepted = true;
};

struct ConvergenceTrace {
  std::vector<double> outer_objectives;
  std::vector<double> relative_deltas;  // NaN for the first iteration
  std::vector<SubproblemRecord> admm;
  Termination terminated_by = Termination::MaxIterations;
};

/// Computes Theta X~ = [Theta^(1) X_1 | ... | Theta^(K) X_K] for a projection
/// partitioned by the stack's channel offsets.
Matrix project_stack(const Matrix& projection, const TrainingStack& stack);

/// Same as project_stack for a per-modality list of projections.
Matrix project_stack(const std::vector<Matrix>& projections,
                     const TrainingStack& stack);

void check_model_matches(const ProjectionModel& model,
                         const TrainingStack& stack);

}  // namespace s2fl
