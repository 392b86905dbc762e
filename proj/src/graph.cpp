#include "s2fl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace s2fl {

Eigen::Index GraphMatrix::size() const {
  return std::visit([](const auto& m) { return m.rows(); }, storage_);
}

Matrix GraphMatrix::to_dense() const {
  if (is_dense()) return dense();
  return Matrix(sparse());
}

Matrix GraphMatrix::right_multiply(const Matrix& F) const {
  return std::visit([&](const auto& m) -> Matrix { return F * m; }, storage_);
}

double GraphMatrix::trace_form(const Matrix& F) const {
  return right_multiply(F).cwiseProduct(F).sum();
}

Matrix GraphMatrix::sandwich(const Matrix& A, Eigen::Index r0, Eigen::Index c0,
                             Eigen::Index rows, Eigen::Index cols,
                             const Matrix& B) const {
  if (is_dense()) {
    return A * dense().block(r0, c0, rows, cols) * B.transpose();
  }
  const SparseMatrix blk = sparse().block(r0, c0, rows, cols);
  return (A * blk) * B.transpose();
}

SparseMatrix intra_adjacency(const Matrix& X, int q, double sigma) {
  const Eigen::Index n = X.cols();
  if (q < 1 || q >= n) {
    std::ostringstream msg;
    msg << "neighbor count q=" << q << " must satisfy 1 <= q < N=" << n;
    fail(ErrorCode::Validation, msg.str());
  }
  if (!(sigma > 0)) fail(ErrorCode::Validation, "kernel width sigma must be > 0");

  const double inv_s2 = 1.0 / (sigma * sigma);
  std::vector<Eigen::Triplet<double>> edges;
  edges.reserve(static_cast<std::size_t>(2 * n * q));
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      dist[m++] = {(X.col(i) - X.col(j)).squaredNorm(), j};
    }
    // pair ordering = distance, then smaller index
    std::partial_sort(dist.begin(), dist.begin() + q, dist.end());
    for (int r = 0; r < q; ++r) {
      const auto [d2, j] = dist[r];
      const double w = std::exp(-d2 * inv_s2);
      edges.emplace_back(i, j, w);
      edges.emplace_back(j, i, w);
    }
  }
  // Mutual neighbors contribute twice with identical weight; keep one copy.
  SparseMatrix W(n, n);
  W.setFromTriplets(edges.begin(), edges.end(),
                    [](double a, double b) { return std::max(a, b); });
  W.makeCompressed();
  return W;
}

Matrix inter_adjacency(const std::vector<int>& labels, int num_classes) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  std::vector<int> counts(num_classes, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = labels[i];
    if (c < 0 || c >= num_classes) {
      fail(ErrorCode::Validation, "label out of range at sample " + std::to_string(i));
    }
    ++counts[c];
  }
  Matrix W = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (labels[i] == labels[j]) W(i, j) = 1.0 / counts[labels[i]];
    }
  }
  return W;
}

namespace {

void check_symmetric(double asym) {
  if (asym > 1e-12) {
    std::ostringstream msg;
    msg << "adjacency is not symmetric (max |W - W^T| = " << asym << ")";
    fail(ErrorCode::Validation, msg.str());
  }
}

}  // namespace

LaplacianParts laplacian(const Matrix& W) {
  if (W.rows() != W.cols()) fail(ErrorCode::Dimension, "adjacency must be square");
  check_symmetric(W.rows() ? (W - W.transpose()).cwiseAbs().maxCoeff() : 0.0);
  const Eigen::Index n = W.rows();
  Vector degree(n);
  for (Eigen::Index i = 0; i < n; ++i) degree(i) = W.row(i).sum() - W(i, i);
  // self-loops are ignored on both sides of D - W
  Matrix L = -W;
  L.diagonal() = degree;
  return {std::move(degree), GraphMatrix(std::move(L))};
}

LaplacianParts laplacian(const SparseMatrix& W) {
  if (W.rows() != W.cols()) fail(ErrorCode::Dimension, "adjacency must be square");
  const SparseMatrix diff = W - SparseMatrix(W.transpose());
  double asym = 0.0;
  for (Eigen::Index c = 0; c < diff.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(diff, c); it; ++it) {
      asym = std::max(asym, std::abs(it.value()));
    }
  }
  check_symmetric(asym);
  const Eigen::Index n = W.rows();
  Vector degree = Vector::Zero(n);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(W.nonZeros() + n));
  for (Eigen::Index c = 0; c < W.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(W, c); it; ++it) {
      if (it.row() == it.col()) continue;
      degree(it.row()) += it.value();
      trip.emplace_back(it.row(), it.col(), -it.value());
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(i, i, degree(i));
  SparseMatrix L(n, n);
  L.setFromTriplets(trip.begin(), trip.end());
  L.makeCompressed();
  return {std::move(degree), GraphMatrix(std::move(L))};
}

JointGraph joint_adjacency(const TrainingStack& stack, const HyperParams& hp,
                           Eigen::Index dense_limit) {
  const Eigen::Index n = stack.num_samples();
  const auto K = static_cast<Eigen::Index>(stack.num_modalities());
  const Eigen::Index kn = K * n;

  JointGraph g;
  g.block_size = n;
  for (const auto& b : stack.blocks()) {
    g.intra.push_back(intra_adjacency(b.data, hp.q, hp.sigma));
  }
  const Matrix inter = K > 1 ? inter_adjacency(stack.labels(), stack.num_classes())
                             : Matrix();

  if (kn <= dense_limit) {
    Matrix W = Matrix::Zero(kn, kn);
    for (Eigen::Index a = 0; a < K; ++a) {
      W.block(a * n, a * n, n, n) = Matrix(g.intra[a]);
      for (Eigen::Index b = 0; b < K; ++b) {
        if (b != a) W.block(a * n, b * n, n, n) = inter;
      }
    }
    W.diagonal().setZero();
    auto parts = laplacian(W);
    g.W = GraphMatrix(std::move(W));
    g.degree = std::move(parts.degree);
    g.L = std::move(parts.L);
    return g;
  }

  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index a = 0; a < K; ++a) {
    const SparseMatrix& intra = g.intra[a];
    for (Eigen::Index c = 0; c < intra.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(intra, c); it; ++it) {
        trip.emplace_back(a * n + it.row(), a * n + it.col(), it.value());
      }
    }
    for (Eigen::Index b = 0; b < K; ++b) {
      if (b == a) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
          if (inter(i, j) != 0.0) trip.emplace_back(a * n + i, b * n + j, inter(i, j));
        }
      }
    }
  }
  SparseMatrix W(kn, kn);
  W.setFromTriplets(trip.begin(), trip.end());
  W.makeCompressed();
  auto parts = laplacian(W);
  g.W = GraphMatrix(std::move(W));
  g.degree = std::move(parts.degree);
  g.L = std::move(parts.L);
  return g;
}

}  // namespace s2fl
