#pragma once

#include <vector>

#include "s2fl/model.hpp"

namespace s2fl {

enum class EmbedMode { SharedOnly, SpecificOnly, Both };
enum class Fusion { Concatenate, Sum, Mean };

struct EmbeddingConfig {
  EmbedMode mode = EmbedMode::Both;
  Fusion fusion = Fusion::Concatenate;
  std::vector<std::size_t> modalities;  // 0-based; empty means all

  /// Resolves an empty selection to all K modalities and range-checks the rest.
  std::vector<std::size_t> resolve(std::size_t num_modalities) const;
};

/// shared: Theta0^(k) X, specific: Theta_k X, both: (Theta0^(k) + Theta_k) X.
Matrix embed_modality(const ProjectionModel& model, const Matrix& X, std::size_t k,
                      EmbedMode mode);

Matrix fuse(const std::vector<Matrix>& embeddings, Fusion fusion);

/// Embeds every configured modality (data[k] is modality k) and fuses.
Matrix embed(const ProjectionModel& model, const std::vector<const Matrix*>& data,
             const EmbeddingConfig& config);

/// 1-NN by squared Euclidean distance; exact ties go to the smaller training
/// index. Labels are passed through unchanged.
std::vector<int> nn_classify(const Matrix& train_features,
                             const std::vector<int>& train_labels,
                             const Matrix& test_features);

/// Rows are reference classes, columns predictions. Labels are 1-based.
struct EvalReport {
  Eigen::MatrixXi confusion;
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  std::vector<double> per_class_accuracy;  // 0 for classes absent from reference
  std::vector<int> excluded_classes;       // 1-based, left out of AA
  bool kappa_degenerate = false;           // chance agreement was 1
};

EvalReport evaluate(const std::vector<int>& predictions,
                    const std::vector<int>& reference, int num_classes);

/// Cross-modality prediction: the training side uses the configured modalities
/// of train_stack, the test side only modality k. Concatenated training
/// features are replaced by the per-modality average so both sides live in the
/// same d_s-dimensional space. Returns 1-based labels.
std::vector<int> cml_predict(const ProjectionModel& model,
                             const TrainingStack& train_stack,
                             const Matrix& test_data, std::size_t k,
                             const EmbeddingConfig& config);

}  // namespace s2fl
