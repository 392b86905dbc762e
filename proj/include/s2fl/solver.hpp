#pragma once

#include <functional>

#include "s2fl/graph.hpp"
#include "s2fl/model.hpp"

namespace s2fl {

/// Split variables, multipliers and penalty of one ADMM run.
///   H        ~ T X~        (d_s x columns)
///   G        ~ T           (d_s x channels), kept on the orthogonality set
///   lambda1  pairs with H - T X~
///   lambda2  pairs with G - T
struct AdmmState {
  Matrix H;
  Matrix G;
  Matrix lambda1;
  Matrix lambda2;
  double mu = 1e-3;
  int iteration = 0;
};

/// One orthogonality-constrained projection subproblem
///
///   min_T 1/2 ||R - P T X~||_F^2 + 1/2 tr(T A T^T)   s.t. T T^T = I
///
/// where X~ is block diagonal over the active modalities and A is the
/// precomputed alignment matrix beta X~ L X~^T (zero for specific targets).
/// Only the active modalities' columns take part; for a specific target the
/// other modalities' columns of T X~ are structurally zero and omitted.
struct Subproblem {
  std::vector<const Matrix*> blocks;     // active modality data, d_k x N
  std::vector<Eigen::Index> offsets;     // channel offsets inside T
  Matrix target;                         // R, C x (active * N)
  Matrix P;                              // C x d_s
  Matrix gram;                           // X~ X~^T
  Matrix alignment;                      // beta X~ L X~^T, or empty

  Eigen::Index channels() const { return offsets.back(); }
  Eigen::Index columns() const;
  Eigen::Index subspace_dim() const { return P.cols(); }
};

/// Shared target: all modalities, R = Y~ - P [Theta_1..Theta_K] X~.
Subproblem make_shared_subproblem(const ProjectionModel& model,
                                  const TrainingStack& stack,
                                  const JointGraph& graph, double beta);

/// Specific target k: modality k columns only, R = Y - P Theta0^(k) X_k, no
/// alignment term.
Subproblem make_specific_subproblem(const ProjectionModel& model,
                                    const TrainingStack& stack, std::size_t k);

/// T X~ restricted to the subproblem's columns.
Matrix apply_data(const Subproblem& sub, const Matrix& T);
/// H X~^T
Matrix apply_data_transpose(const Subproblem& sub, const Matrix& H);

/// Locality preserving projection rows for one modality: generalized
/// eigenvectors of X L X^T a = lambda X D X^T a with the smallest eigenvalues.
/// Rows beyond d_k are zero.
Matrix lpp_init(const Matrix& X, const SparseMatrix& w_intra, int subspace_dim);

/// Ridge regressor P = Y~ F^T (F F^T + alpha I)^{-1}, F = Theta X~, computed
/// by a Cholesky solve.
Matrix update_P(const TrainingStack& stack, const Matrix& theta, double alpha);

/// Minimizer of the H step: (P^T P + mu I)^{-1} (P^T R + mu T X~ - lambda1).
Matrix update_H(const Subproblem& sub, const AdmmState& state,
                const Matrix& projected);

/// Minimizer of the T step:
/// (mu H X~^T + lambda1 X~^T + mu G + lambda2)(mu X~X~^T + mu I + A)^{-1}.
Matrix update_theta(const Subproblem& sub, const AdmmState& state);

/// Nearest partial isometry to T - lambda2/mu via a thin SVD.
Matrix soc_project(const Matrix& theta, const Matrix& lambda2, double mu);

/// lambda1 += mu (H - T X~), lambda2 += mu (G - T)
void update_multipliers(AdmmState& state, const Matrix& projected,
                        const Matrix& theta);

inline double update_mu(double mu, double rho, double mu_max) {
  return std::min(rho * mu, mu_max);
}

/// 1/2 ||R - P T X~||^2 + 1/2 tr(T A T^T): the part of the global objective
/// that depends on the subproblem's projection.
double subproblem_objective(const Subproblem& sub, const Matrix& T);

struct SubproblemResult {
  Matrix projection;
  AdmmState state;
  SubproblemRecord record;
};

/// Runs the ADMM iteration from a warm start (H = T X~, G = T, zero
/// multipliers, mu = mu0) until both primal residuals drop below eps.
SubproblemResult solve_subproblem(const Subproblem& sub, const Matrix& initial,
                                  const HyperParams& hp);

struct OuterRecord {
  int iteration = 0;
  double objective = 0.0;
  double relative_delta = 0.0;  // NaN on the first iteration
  double residual_h = 0.0;      // largest final residual across subproblems
  double residual_g = 0.0;
};

using FitCallback = std::function<void(const OuterRecord&)>;

struct FitResult {
  ProjectionModel model;
  ConvergenceTrace trace;
};

/// Block coordinate descent over P, Theta0 and every Theta_k.
FitResult fit(const TrainingStack& stack, const HyperParams& hp,
              const FitCallback& on_iteration = {});

/// Same loop on a prebuilt graph.
FitResult fit(const TrainingStack& stack, const JointGraph& graph,
              const HyperParams& hp, const FitCallback& on_iteration = {});

}  // namespace s2fl
