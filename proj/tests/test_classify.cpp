#include "doctest.h"

#include <cmath>

#include "s2fl/classify.hpp"
#include "s2fl/solver.hpp"
#include "test_support.hpp"

using namespace s2fl;
using namespace s2fl::testing;

namespace {

// Exhaustive double loop, ties to the first index.
std::vector<int> nn_oracle(const Matrix& train, const std::vector<int>& labels,
                           const Matrix& test) {
  std::vector<int> out;
  for (Eigen::Index t = 0; t < test.cols(); ++t) {
    Eigen::Index best = -1;
    double bd = 0.0;
    for (Eigen::Index i = 0; i < train.cols(); ++i) {
      double d = 0.0;
      for (Eigen::Index r = 0; r < train.rows(); ++r) {
        d += (train(r, i) - test(r, t)) * (train(r, i) - test(r, t));
      }
      if (best < 0 || d < bd) {
        best = i;
        bd = d;
      }
    }
    out.push_back(labels[best]);
  }
  return out;
}

struct Metrics {
  double oa, aa, kappa;
};

// Counts straight from the label pairs.
Metrics metrics_oracle(const std::vector<int>& pred, const std::vector<int>& ref, int C) {
  const double n = static_cast<double>(ref.size());
  double agree = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) agree += pred[i] == ref[i];
  double aa = 0;
  int classes = 0;
  double pe = 0;
  for (int c = 1; c <= C; ++c) {
    double in_ref = 0, in_pred = 0, hit = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      in_ref += ref[i] == c;
      in_pred += pred[i] == c;
      hit += ref[i] == c && pred[i] == c;
    }
    if (in_ref > 0) {
      aa += hit / in_ref;
      ++classes;
    }
    pe += (in_ref / n) * (in_pred / n);
  }
  const double oa = agree / n;
  return {oa, aa / classes, (oa - pe) / (1 - pe)};
}

}  // namespace

TEST_CASE("nn_classify examples") {
  Matrix train(1, 3), test(1, 2);
  train << 0, 10, 5;
  test << 4, 9;
  CHECK(nn_classify(train, {1, 2, 3}, test) == std::vector<int>{3, 2});

  // equidistant: smaller training index wins
  Matrix tr2(1, 2), te2(1, 1);
  tr2 << -1, 1;
  te2 << 0;
  CHECK(nn_classify(tr2, {7, 9}, te2) == std::vector<int>{7});
  CHECK_THROWS_AS(nn_classify(tr2, {7}, te2), Error);
  CHECK_THROWS_AS(nn_classify(tr2, {7, 9}, Matrix::Zero(2, 1)), Error);
}

TEST_CASE("nn_classify matches the exhaustive oracle, ties included") {
  std::mt19937_64 rng(51);
  for (int rep = 0; rep < 50; ++rep) {
    const int d = uniform_int(rng, 1, 4);
    const int ntr = uniform_int(rng, 1, 30);
    // integer lattice features make exact ties common
    Matrix train(d, ntr), test(d, 20);
    for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = uniform_int(rng, -2, 2);
    for (Eigen::Index i = 0; i < test.size(); ++i) test.data()[i] = uniform_int(rng, -2, 2);
    std::vector<int> labels(ntr);
    for (auto& l : labels) l = uniform_int(rng, 1, 5);
    CHECK(nn_classify(train, labels, test) == nn_oracle(train, labels, test));
  }
}

TEST_CASE("nn_classify is invariant under a joint rotation") {
  std::mt19937_64 rng(52);
  const Matrix train = random_matrix(rng, 4, 25);
  const Matrix test = random_matrix(rng, 4, 30);
  std::vector<int> labels(25);
  for (auto& l : labels) l = uniform_int(rng, 1, 3);
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, 4, 4));
  const Matrix Q = qr.householderQ();
  CHECK(nn_classify(train, labels, test) == nn_classify(Q * train, labels, Q * test));
}

TEST_CASE("self-retrieval") {
  std::mt19937_64 rng(53);
  const Matrix X = random_matrix(rng, 3, 15);
  std::vector<int> labels(15);
  for (auto& l : labels) l = uniform_int(rng, 1, 4);
  CHECK(nn_classify(X, labels, X) == labels);
}

TEST_CASE("evaluate examples") {
  auto perfect = evaluate({1, 2, 3, 1}, {1, 2, 3, 1}, 3);
  CHECK(perfect.oa == 1.0);
  CHECK(perfect.aa == 1.0);
  CHECK(perfect.kappa == 1.0);

  // every prediction wrong across two balanced classes
  auto swapped = evaluate({2, 1, 2, 1}, {1, 2, 1, 2}, 2);
  CHECK(swapped.oa == 0.0);
  CHECK(swapped.kappa == doctest::Approx(-1.0));

  // class 3 absent from the reference is left out of AA
  auto partial = evaluate({1, 1, 2, 3}, {1, 1, 2, 2}, 3);
  CHECK(partial.excluded_classes == std::vector<int>{3});
  CHECK(partial.aa == doctest::Approx(0.75));
  CHECK(partial.confusion(1, 2) == 1);

  // a single class everywhere: chance agreement is 1
  auto single = evaluate({1, 1}, {1, 1}, 1);
  CHECK(single.kappa_degenerate);
  CHECK(single.oa == 1.0);

  CHECK_THROWS_AS(evaluate({1}, {1, 2}, 2), Error);
  CHECK_THROWS_AS(evaluate({3}, {1}, 2), Error);
}

TEST_CASE("evaluate matches an independent oracle on random confusions") {
  std::mt19937_64 rng(54);
  for (int rep = 0; rep < 1000; ++rep) {
    const int C = uniform_int(rng, 2, 10);
    const int n = uniform_int(rng, 1, 200);
    std::vector<int> ref(n), pred(n);
    for (int i = 0; i < n; ++i) {
      ref[i] = uniform_int(rng, 1, C);
      pred[i] = uniform_int(rng, 0, 2) == 0 ? ref[i] : uniform_int(rng, 1, C);
    }
    const auto rep_ = evaluate(pred, ref, C);
    const auto o = metrics_oracle(pred, ref, C);
    CHECK(std::abs(rep_.oa - o.oa) <= 1e-12);
    CHECK(std::abs(rep_.aa - o.aa) <= 1e-12);
    if (!rep_.kappa_degenerate) {
      CHECK(std::abs(rep_.kappa - o.kappa) <= 1e-12);
      CHECK(rep_.kappa <= rep_.oa + 1e-15);
    }
    CHECK(std::abs(rep_.oa - rep_.confusion.trace() / static_cast<double>(n)) <= 1e-15);
    CHECK(rep_.aa >= 0.0);
    CHECK(rep_.aa <= 1.0);
  }
}

TEST_CASE("embeddings: both equals shared plus specific") {
  std::mt19937_64 rng(55);
  const auto stack = random_stack(rng, {4, 3}, 10, 2);
  const auto model = random_model(rng, stack, 3);
  for (std::size_t k = 0; k < 2; ++k) {
    const Matrix& X = stack.block(k).data;
    const Matrix both = embed_modality(model, X, k, EmbedMode::Both);
    const Matrix sum = embed_modality(model, X, k, EmbedMode::SharedOnly) +
                       embed_modality(model, X, k, EmbedMode::SpecificOnly);
    CHECK((both - sum).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK_THROWS_AS(embed_modality(model, Matrix::Zero(5, 2), 0, EmbedMode::Both), Error);
}

TEST_CASE("fusion rules") {
  Matrix a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  Matrix cat(4, 2);
  cat << 1, 2, 3, 4, 5, 6, 7, 8;
  CHECK(fuse({a, b}, Fusion::Concatenate) == cat);
  CHECK(fuse({a, b}, Fusion::Sum) == a + b);
  CHECK(fuse({a, b}, Fusion::Mean) == (a + b) / 2.0);
  CHECK(fuse({a}, Fusion::Concatenate) == a);
  CHECK_THROWS_AS(fuse({a, Matrix::Zero(3, 2)}, Fusion::Sum), Error);
}

TEST_CASE("embed and fuse are linear") {
  std::mt19937_64 rng(56);
  const auto stack = random_stack(rng, {4, 3}, 10, 2);
  const auto model = random_model(rng, stack, 3);
  const Matrix X1 = random_matrix(rng, 4, 6), X2 = random_matrix(rng, 3, 6);
  const Matrix Y1 = random_matrix(rng, 4, 6), Y2 = random_matrix(rng, 3, 6);
  const double a = 0.7, b = -1.3;
  const Matrix Z1 = a * X1 + b * Y1, Z2 = a * X2 + b * Y2;
  for (auto fusion : {Fusion::Concatenate, Fusion::Sum, Fusion::Mean}) {
    EmbeddingConfig cfg;
    cfg.fusion = fusion;
    const Matrix lhs = embed(model, {&Z1, &Z2}, cfg);
    const Matrix rhs = a * embed(model, {&X1, &X2}, cfg) + b * embed(model, {&Y1, &Y2}, cfg);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("embedding config resolution") {
  EmbeddingConfig cfg;
  CHECK(cfg.resolve(3) == std::vector<std::size_t>{0, 1, 2});
  cfg.modalities = {1};
  CHECK(cfg.resolve(3) == std::vector<std::size_t>{1});
  cfg.modalities = {3};
  CHECK_THROWS_AS(cfg.resolve(3), Error);
}

TEST_CASE("cross-modality prediction") {
  std::mt19937_64 rng(57);
  const auto stack = random_stack(rng, {4, 3}, 12, 3);
  const auto model = random_model(rng, stack, 3);
  EmbeddingConfig cfg;

  // oracle: mean of per-modality training embeddings, 1-NN
  const Matrix train = 0.5 * (embed_modality(model, stack.block(0).data, 0, cfg.mode) +
                              embed_modality(model, stack.block(1).data, 1, cfg.mode));
  const Matrix test_data = random_matrix(rng, 3, 8);
  std::vector<int> labels(stack.labels());
  for (auto& l : labels) ++l;
  const auto expected =
      nn_oracle(train, labels, embed_modality(model, test_data, 1, cfg.mode));
  CHECK(cml_predict(model, stack, test_data, 1, cfg) == expected);
}
