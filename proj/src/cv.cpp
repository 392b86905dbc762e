#include "s2fl/cv.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

#include "s2fl/solver.hpp"

namespace s2fl {

std::vector<int> stratified_folds(const std::vector<int>& labels, int num_classes,
                                  int folds, std::uint64_t seed) {
  if (folds < 2) fail(ErrorCode::Validation, "need at least 2 folds");
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      fail(ErrorCode::Validation, "label out of range in fold assignment");
    }
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (int c = 0; c < num_classes; ++c) {
    const auto count = members[static_cast<std::size_t>(c)].size();
    if (count < static_cast<std::size_t>(folds)) {
      fail(ErrorCode::Validation,
           "class " + std::to_string(c + 1) + " has " + std::to_string(count) +
               " training samples, fewer than folds=" + std::to_string(folds) +
               "; use a smaller --folds");
    }
  }
  std::vector<int> fold_of(labels.size(), 0);
  std::mt19937_64 rng(seed);
  int position = 0;
  for (auto& m : members) {
    std::shuffle(m.begin(), m.end(), rng);
    for (auto i : m) {
      fold_of[i] = position;
      position = (position + 1) % folds;
    }
  }
  return fold_of;
}

CvGrid CvGrid::defaults() {
  CvGrid g;
  for (int v = 5; v <= 50; v += 5) {
    g.q.push_back(v);
    g.subspace_dim.push_back(v);
  }
  for (int e = -2; e <= 2; ++e) g.sigma.push_back(std::pow(10.0, e));
  for (int e = -3; e <= 2; ++e) {
    g.alpha.push_back(std::pow(10.0, e));
    g.beta.push_back(std::pow(10.0, e));
  }
  return g;
}

std::size_t CvGrid::size() const {
  return q.size() * sigma.size() * alpha.size() * beta.size() * subspace_dim.size();
}

bool better_cv_point(const CvPoint& a, const CvPoint& b) {
  if (a.skipped != b.skipped) return !a.skipped;
  if (a.mean_oa != b.mean_oa) return a.mean_oa > b.mean_oa;
  const auto key = [](const HyperParams& h) {
    return std::make_tuple(h.subspace_dim, h.alpha, h.beta, h.sigma, h.q);
  };
  return key(a.params) < key(b.params);
}

TrainingStack fold_stack(const TrainingStack& stack, const std::vector<int>& fold_of,
                         int fold, bool keep) {
  std::vector<Eigen::Index> cols;
  std::vector<int> labels;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if ((fold_of[i] == fold) == keep) {
      cols.push_back(static_cast<Eigen::Index>(i));
      labels.push_back(stack.labels()[i]);
    }
  }
  std::vector<ModalityBlock> blocks;
  for (const auto& b : stack.blocks()) {
    Matrix sub(b.channels(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      sub.col(static_cast<Eigen::Index>(j)) = b.data.col(cols[j]);
    }
    blocks.push_back(ModalityBlock{b.id, b.name, std::move(sub)});
  }
  return build_stack_zero_based(std::move(blocks), labels, stack.num_classes());
}

double split_accuracy(const TrainingStack& train, const TrainingStack& validation,
                      const HyperParams& hp, const EmbeddingConfig& config) {
  const auto model = fit(train, hp).model;
  std::vector<const Matrix*> tr, va;
  for (const auto& b : train.blocks()) tr.push_back(&b.data);
  for (const auto& b : validation.blocks()) va.push_back(&b.data);
  const auto pred = nn_classify(embed(model, tr, config), train.labels(),
                                embed(model, va, config));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == validation.labels()[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

CvResult cross_validate(const TrainingStack& stack, const CvGrid& grid,
                        const HyperParams& base, int folds,
                        const EmbeddingConfig& config) {
  if (grid.size() == 0) fail(ErrorCode::Validation, "cross-validation grid is empty");
  const auto fold_of =
      stratified_folds(stack.labels(), stack.num_classes(), folds, base.seed);

  std::vector<TrainingStack> train, valid;
  Eigen::Index smallest = stack.num_samples();
  for (int f = 0; f < folds; ++f) {
    train.push_back(fold_stack(stack, fold_of, f, false));
    valid.push_back(fold_stack(stack, fold_of, f, true));
    smallest = std::min(smallest, train.back().num_samples());
  }

  CvResult out;
  for (int ds : grid.subspace_dim) {
    for (double alpha : grid.alpha) {
      for (double beta : grid.beta) {
        for (double sigma : grid.sigma) {
          for (int q : grid.q) {
            CvPoint pt;
            pt.params = base;
            pt.params.subspace_dim = ds;
            pt.params.alpha = alpha;
            pt.params.beta = beta;
            pt.params.sigma = sigma;
            pt.params.q = q;
            pt.skipped = ds > stack.total_channels() || q >= smallest;
            if (!pt.skipped) {
              double sum = 0.0;
              for (int f = 0; f < folds; ++f) {
                pt.fold_oa.push_back(split_accuracy(train[f], valid[f], pt.params, config));
                sum += pt.fold_oa.back();
              }
              pt.mean_oa = sum / folds;
            }
            out.points.push_back(std::move(pt));
          }
        }
      }
    }
  }
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    if (better_cv_point(out.points[i], out.points[out.best])) out.best = i;
  }
  if (out.points[out.best].skipped) {
    fail(ErrorCode::Validation, "every grid point is out of range for this data");
  }
  return out;
}

}  // namespace s2fl
