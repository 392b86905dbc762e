#pragma once

#include <Eigen/Sparse>

#include <variant>
#include <vector>

#include "s2fl/model.hpp"

namespace s2fl {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Square graph matrix held dense or in compressed sparse form. Joint graphs
/// above kDenseGraphLimit nodes switch to sparse storage.
class GraphMatrix {
 public:
  GraphMatrix() = default;
  explicit GraphMatrix(Matrix dense) : storage_(std::move(dense)) {}
  explicit GraphMatrix(SparseMatrix sparse) : storage_(std::move(sparse)) {}

  bool is_dense() const { return std::holds_alternative<Matrix>(storage_); }
  Eigen::Index size() const;
  const Matrix& dense() const { return std::get<Matrix>(storage_); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(storage_); }
  Matrix to_dense() const;

  /// F * M
  Matrix right_multiply(const Matrix& F) const;
  /// tr(F M F^T)
  double trace_form(const Matrix& F) const;
  /// A * M(r0:r0+rows, c0:c0+cols) * B^T
  Matrix sandwich(const Matrix& A, Eigen::Index r0, Eigen::Index c0,
                  Eigen::Index rows, Eigen::Index cols, const Matrix& B) const;

 private:
  std::variant<Matrix, SparseMatrix> storage_;
};

inline constexpr Eigen::Index kDenseGraphLimit = 10000;

struct JointGraph {
  GraphMatrix W;
  Vector degree;  // diagonal of D
  GraphMatrix L;
  std::vector<SparseMatrix> intra;  // per-modality kNN blocks, N x N
  Eigen::Index block_size = 0;      // N
};

/// Symmetrized q-NN graph with Gaussian weights exp(-||xi - xj||^2 / sigma^2).
/// Distance ties are broken by the smaller column index.
SparseMatrix intra_adjacency(const Matrix& X, int q, double sigma);

/// Label graph: 1/N_c where both samples are in class c. Labels are 0-based.
Matrix inter_adjacency(const std::vector<int>& labels, int num_classes);

struct LaplacianParts {
  Vector degree;
  GraphMatrix L;
};

/// D - W. Rejects W with max |W - W^T| > 1e-12.
LaplacianParts laplacian(const Matrix& W);
LaplacianParts laplacian(const SparseMatrix& W);

/// Assembles the KN x KN joint adjacency (intra blocks on the diagonal, label
/// blocks elsewhere, zero diagonal) and its Laplacian.
JointGraph joint_adjacency(const TrainingStack& stack, const HyperParams& hp,
                           Eigen::Index dense_limit = kDenseGraphLimit);

}  // namespace s2fl
