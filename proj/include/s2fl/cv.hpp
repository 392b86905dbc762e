#pragma once

#include <cstdint>
#include <vector>

#include "s2fl/classify.hpp"
#include "s2fl/model.hpp"

namespace s2fl {

/// Fold index (0-based) per sample. Within each class the samples are shuffled
/// with a seed-derived stream and dealt round-robin; the dealing position
/// carries over from one class to the next so remainders spread across folds.
std::vector<int> stratified_folds(const std::vector<int>& labels, int num_classes,
                                  int folds, std::uint64_t seed);

struct CvGrid {
  std::vector<int> q;
  std::vector<double> sigma;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<int> subspace_dim;

  /// sigma in 1e-2..1e2, alpha and beta in 1e-3..1e2 (decades), q and d_s in
  /// 5..50 step 5.
  static CvGrid defaults();
  std::size_t size() const;
};

struct CvPoint {
  HyperParams params;
  std::vector<double> fold_oa;  // empty when the point was skipped
  double mean_oa = 0.0;
  bool skipped = false;         // d_s or q out of range for this data
};

struct CvResult {
  std::vector<CvPoint> points;  // grid order: d_s, alpha, beta, sigma, q
  std::size_t best = 0;
};

/// Ordering used for selection: higher mean OA, then smaller d_s, alpha,
/// beta, sigma, q.
bool better_cv_point(const CvPoint& a, const CvPoint& b);

/// Validation OA of one train/validation split under the given parameters.
double split_accuracy(const TrainingStack& train, const TrainingStack& validation,
                      const HyperParams& hp, const EmbeddingConfig& config);

/// Sub-stack of the samples whose fold flag matches `keep`.
TrainingStack fold_stack(const TrainingStack& stack, const std::vector<int>& fold_of,
                         int fold, bool keep);

/// Mean validation OA over stratified folds for every grid point. `base`
/// supplies the solver settings that are not part of the grid.
CvResult cross_validate(const TrainingStack& stack, const CvGrid& grid,
                        const HyperParams& base, int folds,
                        const EmbeddingConfig& config);

}  // namespace s2fl
