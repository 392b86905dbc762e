#pragma once

// Shared helpers for the unit and acceptance suites. Everything here is an
// independent, deliberately naive reference: dense block-diagonal data,
// elementwise loops, central differences.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "s2fl/graph.hpp"
#include "s2fl/model.hpp"

namespace s2fl::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows,
                            Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  }
  return m;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Random stack with every class present; labels 1-based in build_stack.
inline TrainingStack random_stack(std::mt19937_64& rng, const std::vector<int>& dims,
                                  int n, int num_classes) {
  std::vector<ModalityBlock> blocks;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    blocks.push_back(make_block(k, "m" + std::to_string(k), random_matrix(rng, dims[k], n)));
  }
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    labels[static_cast<std::size_t>(i)] =
        i < num_classes ? i + 1 : uniform_int(rng, 1, num_classes);
  }
  return build_stack(std::move(blocks), labels, num_classes);
}

/// Materialized block-diagonal X~ (Sum d_k x K N).
inline Matrix dense_block_diag(const TrainingStack& stack) {
  const Eigen::Index n = stack.num_samples();
  const auto K = static_cast<Eigen::Index>(stack.num_modalities());
  Matrix X = Matrix::Zero(stack.total_channels(), K * n);
  Eigen::Index row = 0;
  for (Eigen::Index k = 0; k < K; ++k) {
    const Matrix& B = stack.block(static_cast<std::size_t>(k)).data;
    X.block(row, k * n, B.rows(), n) = B;
    row += B.rows();
  }
  return X;
}

/// Y~ by explicit replication, elementwise.
inline Matrix dense_replicated_labels(const TrainingStack& stack) {
  const Eigen::Index n = stack.num_samples();
  const auto K = static_cast<Eigen::Index>(stack.num_modalities());
  Matrix Y = Matrix::Zero(stack.num_classes(), K * n);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Y(stack.labels()[static_cast<std::size_t>(i)], k * n + i) = 1.0;
    }
  }
  return Y;
}

/// Central differences, one coordinate at a time.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f,
                          const Matrix& at, double h = 1e-6) {
  Matrix grad(at.rows(), at.cols());
  Matrix probe = at;
  for (Eigen::Index j = 0; j < at.cols(); ++j) {
    for (Eigen::Index i = 0; i < at.rows(); ++i) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = f(probe);
      probe(i, j) = orig - h;
      const double down = f(probe);
      probe(i, j) = orig;
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

inline double frobenius_inner(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b).sum();
}

/// Random model with orthonormal-row projections and a random regressor.
inline ProjectionModel random_model(std::mt19937_64& rng, const TrainingStack& stack,
                                    int ds) {
  ProjectionModel m = ProjectionModel::zeros(stack, ds);
  m.theta0 = random_matrix(rng, ds, stack.total_channels());
  for (auto& t : m.theta_k) t = random_matrix(rng, t.rows(), t.cols());
  m.P = random_matrix(rng, stack.num_classes(), ds);
  return m;
}

}  // namespace s2fl::testing
