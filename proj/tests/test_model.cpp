#include "doctest.h"

#include "s2fl/objective.hpp"
#include "test_support.hpp"

using namespace s2fl;
using namespace s2fl::testing;

TEST_CASE("build_stack one-hot and replication") {
  std::vector<ModalityBlock> blocks{make_block(0, "a", Matrix::Ones(2, 3)),
                                    make_block(1, "b", Matrix::Ones(4, 3))};
  const auto stack = build_stack(blocks, {1, 2, 1}, 2);
  Matrix expected(2, 3);
  expected << 1, 0, 1, 0, 1, 0;
  CHECK(stack.onehot() == expected);
  const Matrix Yt = replicated_onehot(stack);
  CHECK(Yt.cols() == 6);
  CHECK(Yt.leftCols(3) == expected);
  CHECK(Yt.rightCols(3) == expected);
  CHECK(stack.channel_offsets() == std::vector<Eigen::Index>{0, 2, 6});
  CHECK(stack.labels() == std::vector<int>{0, 1, 0});
}

TEST_CASE("build_stack single modality degenerates to Y and X1") {
  std::mt19937_64 rng(3);
  const Matrix X = random_matrix(rng, 3, 5);
  const auto stack = build_stack({make_block(0, "x", X)}, {1, 2, 2, 1, 2}, 2);
  CHECK(replicated_onehot(stack) == stack.onehot());
  CHECK(dense_block_diag(stack) == X);
}

TEST_CASE("build_stack rejects bad input") {
  auto err = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Unsupported;
  };
  CHECK(err([] {
          build_stack({make_block(0, "a", Matrix::Ones(2, 3)),
                       make_block(1, "b", Matrix::Ones(2, 4))},
                      {1, 1, 1}, 1);
        }) == ErrorCode::Dimension);
  CHECK(err([] { build_stack({make_block(0, "a", Matrix::Ones(2, 3))}, {1, 1, 1}, 2); }) ==
        ErrorCode::Validation);
  CHECK(err([] { build_stack({make_block(0, "a", Matrix::Ones(2, 3))}, {1, 3, 1}, 2); }) ==
        ErrorCode::Validation);
  CHECK(err([] { build_stack({make_block(0, "a", Matrix::Ones(2, 3))}, {0, 1, 1}, 1); }) ==
        ErrorCode::Validation);
  Matrix bad = Matrix::Ones(2, 2);
  bad(1, 1) = std::nan("");
  CHECK(err([&] { make_block(0, "nan", bad); }) == ErrorCode::Validation);
}

TEST_CASE("one-hot argmax reproduces labels") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const int C = uniform_int(rng, 1, 6);
    const auto stack = random_stack(rng, {2}, uniform_int(rng, C, 30), C);
    for (Eigen::Index i = 0; i < stack.num_samples(); ++i) {
      Eigen::Index arg;
      stack.onehot().col(i).maxCoeff(&arg);
      CHECK(arg == stack.labels()[static_cast<std::size_t>(i)]);
      CHECK(stack.onehot().col(i).sum() == 1.0);
    }
  }
}

TEST_CASE("hyperparameter validation") {
  HyperParams hp;
  hp.subspace_dim = 5;
  CHECK_NOTHROW(hp.validate(5));
  try {
    hp.validate(4);
    FAIL("expected InvalidDs");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidDs);
  }
  hp.rho = 1.0;
  CHECK_THROWS_AS(hp.validate(10), Error);
}

TEST_CASE("objective of the zero model is K N / 2") {
  std::mt19937_64 rng(5);
  const auto stack = random_stack(rng, {3, 4, 2}, 9, 3);
  HyperParams hp;
  hp.q = 2;
  const auto graph = joint_adjacency(stack, hp);
  const auto model = ProjectionModel::zeros(stack, 2);
  CHECK(objective(model, stack, graph.L, hp) == doctest::Approx(0.5 * 3 * 9));
}

TEST_CASE("objective with beta = 0 equals a naive ridge loss") {
  std::mt19937_64 rng(21);
  const auto stack = random_stack(rng, {3, 2}, 7, 3);
  const auto model = random_model(rng, stack, 2);
  HyperParams hp;
  hp.beta = 0.0;
  hp.alpha = 0.7;
  hp.q = 3;
  const auto graph = joint_adjacency(stack, hp);

  const Matrix X = dense_block_diag(stack);
  const Matrix Y = dense_replicated_labels(stack);
  const Matrix Theta = model.generalized();
  double loss = 0.0;
  for (Eigen::Index c = 0; c < Y.rows(); ++c) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      double fitted = 0.0;
      for (Eigen::Index s = 0; s < Theta.rows(); ++s) {
        double feat = 0.0;
        for (Eigen::Index r = 0; r < X.rows(); ++r) feat += Theta(s, r) * X(r, j);
        fitted += model.P(c, s) * feat;
      }
      loss += 0.5 * (Y(c, j) - fitted) * (Y(c, j) - fitted);
    }
  }
  double ridge = 0.0;
  for (Eigen::Index i = 0; i < model.P.size(); ++i) {
    ridge += 0.5 * hp.alpha * model.P.data()[i] * model.P.data()[i];
  }
  CHECK(objective(model, stack, graph.L, hp) == doctest::Approx(loss + ridge).epsilon(1e-12));
}

TEST_CASE("objective equals the sum of dense term evaluations") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const int K = uniform_int(rng, 1, 3);
    std::vector<int> dims;
    for (int k = 0; k < K; ++k) dims.push_back(uniform_int(rng, 2, 6));
    const auto stack = random_stack(rng, dims, uniform_int(rng, 6, 15), 3);
    const auto model = random_model(rng, stack, 2);
    HyperParams hp;
    hp.alpha = 0.3;
    hp.beta = 1.7;
    hp.q = 3;
    hp.sigma = 2.0;
    const auto graph = joint_adjacency(stack, hp);

    const Matrix X = dense_block_diag(stack);
    const Matrix Y = dense_replicated_labels(stack);
    const Matrix L = graph.L.to_dense();
    const double fit = 0.5 * (Y - model.P * model.generalized() * X).squaredNorm();
    const double ridge = 0.5 * hp.alpha * model.P.squaredNorm();
    const Matrix F0 = model.theta0 * X;
    const double align = 0.5 * hp.beta * (F0 * L * F0.transpose()).trace();
    const double total = objective(model, stack, graph.L, hp);
    CHECK(std::abs(total - (fit + ridge + align)) <= 1e-10 * std::abs(total));
    CHECK(regression_term(model, stack) == doctest::Approx(fit).epsilon(1e-12));
    CHECK(alignment_term(model, stack, graph.L, hp.beta) ==
          doctest::Approx(align).epsilon(1e-10));
  }
}

TEST_CASE("objective is invariant under a consistent sample permutation") {
  std::mt19937_64 rng(13);
  const int n = 12;
  const auto stack = random_stack(rng, {3, 4}, n, 3);
  const auto model = random_model(rng, stack, 3);
  HyperParams hp;
  hp.q = 3;
  hp.sigma = 1.5;
  hp.beta = 0.9;

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<ModalityBlock> blocks;
  for (const auto& b : stack.blocks()) {
    Matrix P(b.channels(), n);
    for (int i = 0; i < n; ++i) P.col(i) = b.data.col(perm[i]);
    blocks.push_back(make_block(b.id, b.name, P));
  }
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = stack.labels()[perm[i]];
  const auto permuted = build_stack_zero_based(blocks, labels, 3);

  const auto g1 = joint_adjacency(stack, hp);
  // L with rows/columns permuted the same way as the samples
  const Matrix L = g1.L.to_dense();
  Matrix Lp(2 * n, 2 * n);
  for (int a = 0; a < 2 * n; ++a) {
    for (int b = 0; b < 2 * n; ++b) {
      const int ia = (a / n) * n + perm[a % n];
      const int ib = (b / n) * n + perm[b % n];
      Lp(a, b) = L(ia, ib);
    }
  }
  const double e1 = objective(model, stack, g1.L, hp);
  const double e2 = objective(model, permuted, GraphMatrix(Lp), hp);
  CHECK(std::abs(e1 - e2) <= 1e-10 * std::abs(e1));
}

TEST_CASE("objective with beta = 0 ignores the Laplacian") {
  std::mt19937_64 rng(17);
  const auto stack = random_stack(rng, {3, 2}, 8, 2);
  const auto model = random_model(rng, stack, 2);
  HyperParams hp;
  hp.beta = 0.0;
  const Matrix A = random_matrix(rng, 16, 16);
  const double e1 = objective(model, stack, GraphMatrix(Matrix(A + A.transpose())), hp);
  const double e2 = objective(model, stack, GraphMatrix(Matrix::Zero(16, 16)), hp);
  CHECK(e1 == e2);
  CHECK_THROWS_AS(objective(model, stack, GraphMatrix(Matrix::Zero(15, 15)), hp), Error);
}

TEST_CASE("blockwise projection matches the dense product") {
  std::mt19937_64 rng(4);
  const auto stack = random_stack(rng, {3, 5, 2}, 6, 2);
  const Matrix T = random_matrix(rng, 4, stack.total_channels());
  CHECK((project_stack(T, stack) - T * dense_block_diag(stack)).norm() < 1e-12);
}
