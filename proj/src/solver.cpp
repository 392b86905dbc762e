#include "s2fl/solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <sstream>

#include "s2fl/objective.hpp"

namespace s2fl {

namespace {

// Flip each column so its largest-magnitude entry (first on ties) is positive.
// Returns the per-column sign that was applied.
Vector fix_column_signs(Matrix& M) {
  Vector signs = Vector::Ones(M.cols());
  for (Eigen::Index c = 0; c < M.cols(); ++c) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      const double a = std::abs(M(r, c));
      if (a > best_abs) {
        best_abs = a;
        best = r;
      }
    }
    if (M.rows() > 0 && M(best, c) < 0) {
      M.col(c) = -M.col(c);
      signs(c) = -1.0;
    }
  }
  return signs;
}

Matrix alignment_matrix(const TrainingStack& stack, const JointGraph& graph) {
  const Eigen::Index n = stack.num_samples();
  const auto& off = stack.channel_offsets();
  const Eigen::Index d = stack.total_channels();
  Matrix A(d, d);
  for (std::size_t a = 0; a < stack.num_modalities(); ++a) {
    const Matrix& Xa = stack.block(a).data;
    for (std::size_t b = a; b < stack.num_modalities(); ++b) {
      const Matrix& Xb = stack.block(b).data;
      const Matrix blk = graph.L.sandwich(Xa, static_cast<Eigen::Index>(a) * n,
                                          static_cast<Eigen::Index>(b) * n, n, n, Xb);
      A.block(off[a], off[b], Xa.rows(), Xb.rows()) = blk;
      if (b != a) A.block(off[b], off[a], Xb.rows(), Xa.rows()) = blk.transpose();
    }
  }
  // exact symmetry for the factorization
  return 0.5 * (A + A.transpose());
}

Subproblem make_shared_impl(const ProjectionModel& model,
                            const TrainingStack& stack, const Matrix& alignment,
                            double beta) {
  check_model_matches(model, stack);
  const Eigen::Index n = stack.num_samples();
  Subproblem sub;
  sub.offsets = stack.channel_offsets();
  sub.P = model.P;
  sub.target.resize(stack.num_classes(),
                    n * static_cast<Eigen::Index>(stack.num_modalities()));
  sub.gram = Matrix::Zero(stack.total_channels(), stack.total_channels());
  for (std::size_t k = 0; k < stack.num_modalities(); ++k) {
    const Matrix& X = stack.block(k).data;
    sub.blocks.push_back(&X);
    sub.target.middleCols(static_cast<Eigen::Index>(k) * n, n) =
        stack.onehot() - model.P * (model.theta_k[k] * X);
    sub.gram.block(sub.offsets[k], sub.offsets[k], X.rows(), X.rows()) =
        X * X.transpose();
  }
  if (beta != 0.0) sub.alignment = beta * alignment;
  return sub;
}

void check_finite(const Matrix& M, const char* what, int iteration) {
  if (!M.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite " << what << " at ADMM iteration " << iteration;
    fail(ErrorCode::Numerical, msg.str());
  }
}

// H and T steps with their factorizations cached per value of mu.
class StepSolver {
 public:
  explicit StepSolver(const Subproblem& sub)
      : sub_(sub),
        PtP_(sub.P.transpose() * sub.P),
        PtR_(sub.P.transpose() * sub.target) {}

  void refresh(double mu) {
    if (mu == factored_mu_) return;
    Matrix M = PtP_;
    M.diagonal().array() += mu;
    h_solver_.compute(M);
    Matrix S = mu * sub_.gram;
    S.diagonal().array() += mu;
    if (sub_.alignment.size() > 0) S += sub_.alignment;
    t_solver_.compute(S);
    factored_mu_ = mu;
  }

  Matrix H(const AdmmState& st, const Matrix& projected) {
    refresh(st.mu);
    return h_solver_.solve(PtR_ + st.mu * projected - st.lambda1);
  }

  Matrix theta(const AdmmState& st) {
    refresh(st.mu);
    const Matrix rhs = apply_data_transpose(sub_, st.mu * st.H + st.lambda1) +
                       st.mu * st.G + st.lambda2;
    // T S = rhs with S symmetric
    return t_solver_.solve(rhs.transpose()).transpose();
  }

 private:
  const Subproblem& sub_;
  Matrix PtP_;
  Matrix PtR_;
  Eigen::LLT<Matrix> h_solver_;
  Eigen::LDLT<Matrix> t_solver_;
  double factored_mu_ = -1.0;
};

}  // namespace

Eigen::Index Subproblem::columns() const {
  return blocks.empty() ? 0
                        : blocks.front()->cols() *
                              static_cast<Eigen::Index>(blocks.size());
}

Subproblem make_shared_subproblem(const ProjectionModel& model,
                                  const TrainingStack& stack,
                                  const JointGraph& graph, double beta) {
  return make_shared_impl(model, stack,
                          beta != 0.0 ? alignment_matrix(stack, graph) : Matrix(),
                          beta);
}

Subproblem make_specific_subproblem(const ProjectionModel& model,
                                    const TrainingStack& stack, std::size_t k) {
  check_model_matches(model, stack);
  if (k >= stack.num_modalities()) {
    fail(ErrorCode::Validation, "modality index out of range");
  }
  const Matrix& X = stack.block(k).data;
  Subproblem sub;
  sub.blocks.push_back(&X);
  sub.offsets = {0, X.rows()};
  sub.P = model.P;
  sub.target = stack.onehot() - model.P * (model.shared_block(k) * X);
  sub.gram = X * X.transpose();
  return sub;
}

Matrix apply_data(const Subproblem& sub, const Matrix& T) {
  const Eigen::Index n = sub.blocks.front()->cols();
  Matrix out(T.rows(), sub.columns());
  for (std::size_t a = 0; a < sub.blocks.size(); ++a) {
    const Matrix& X = *sub.blocks[a];
    out.middleCols(static_cast<Eigen::Index>(a) * n, n).noalias() =
        T.middleCols(sub.offsets[a], X.rows()) * X;
  }
  return out;
}

Matrix apply_data_transpose(const Subproblem& sub, const Matrix& H) {
  const Eigen::Index n = sub.blocks.front()->cols();
  Matrix out(H.rows(), sub.channels());
  for (std::size_t a = 0; a < sub.blocks.size(); ++a) {
    const Matrix& X = *sub.blocks[a];
    out.middleCols(sub.offsets[a], X.rows()).noalias() =
        H.middleCols(static_cast<Eigen::Index>(a) * n, n) * X.transpose();
  }
  return out;
}

Matrix lpp_init(const Matrix& X, const SparseMatrix& w_intra, int subspace_dim) {
  const Eigen::Index d = X.rows();
  if (w_intra.rows() != X.cols() || w_intra.cols() != X.cols()) {
    fail(ErrorCode::Dimension, "intra graph size does not match sample count");
  }
  if (subspace_dim < 1) fail(ErrorCode::Validation, "subspace dimension must be >= 1");

  const Vector degree = w_intra * Vector::Ones(X.cols());
  const Matrix XD = X * degree.asDiagonal();
  Matrix B = XD * X.transpose();
  const Matrix XW = X * w_intra;
  Matrix A = B - XW * X.transpose();
  A = 0.5 * (A + A.transpose());
  B = 0.5 * (B + B.transpose());

  double shift = 1e-10 * B.trace() / static_cast<double>(d);
  if (!(shift > 0.0)) shift = 1e-10;
  B.diagonal().array() += shift;

  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(A, B);
  if (ges.info() != Eigen::Success) {
    fail(ErrorCode::Numerical, "LPP generalized eigensolve failed");
  }
  const Eigen::Index r = std::min<Eigen::Index>(subspace_dim, d);
  Matrix vecs = ges.eigenvectors().leftCols(r);  // ascending eigenvalues
  fix_column_signs(vecs);

  Matrix out = Matrix::Zero(subspace_dim, d);
  out.topRows(r) = vecs.transpose();
  return out;
}

Matrix update_P(const TrainingStack& stack, const Matrix& theta, double alpha) {
  const Matrix F = project_stack(theta, stack);
  const Eigen::Index n = stack.num_samples();
  Matrix rhs = Matrix::Zero(theta.rows(), stack.num_classes());
  for (std::size_t k = 0; k < stack.num_modalities(); ++k) {
    rhs.noalias() += F.middleCols(static_cast<Eigen::Index>(k) * n, n) *
                     stack.onehot().transpose();
  }
  Matrix gram = F * F.transpose();
  gram.diagonal().array() += alpha;
  return gram.llt().solve(rhs).transpose();
}

Matrix update_H(const Subproblem& sub, const AdmmState& state,
                const Matrix& projected) {
  return StepSolver(sub).H(state, projected);
}

Matrix update_theta(const Subproblem& sub, const AdmmState& state) {
  return StepSolver(sub).theta(state);
}

Matrix soc_project(const Matrix& theta, const Matrix& lambda2, double mu) {
  if (theta.rows() != lambda2.rows() || theta.cols() != lambda2.cols()) {
    fail(ErrorCode::Dimension, "multiplier shape does not match projection");
  }
  const Matrix target = theta - lambda2 / mu;
  Eigen::JacobiSVD<Matrix> svd(target, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Matrix U = svd.matrixU();
  Matrix V = svd.matrixV();
  const Vector signs = fix_column_signs(U);
  V = V * signs.asDiagonal();
  return U * V.transpose();
}

void update_multipliers(AdmmState& state, const Matrix& projected,
                        const Matrix& theta) {
  state.lambda1 += state.mu * (state.H - projected);
  state.lambda2 += state.mu * (state.G - theta);
}

double subproblem_objective(const Subproblem& sub, const Matrix& T) {
  double value = 0.5 * (sub.target - sub.P * apply_data(sub, T)).squaredNorm();
  if (sub.alignment.size() > 0) {
    value += 0.5 * (T * sub.alignment).cwiseProduct(T).sum();
  }
  return value;
}

SubproblemResult solve_subproblem(const Subproblem& sub, const Matrix& initial,
                                  const HyperParams& hp) {
  if (initial.cols() != sub.channels()) {
    fail(ErrorCode::Dimension, "initial projection width mismatch");
  }
  SubproblemResult res;
  AdmmState& st = res.state;
  Matrix T = initial;
  Matrix projected = apply_data(sub, T);
  st.H = projected;
  st.G = T;
  st.lambda1 = Matrix::Zero(T.rows(), projected.cols());
  st.lambda2 = Matrix::Zero(T.rows(), T.cols());
  st.mu = hp.mu0;

  StepSolver step(sub);
  auto& rec = res.record;
  for (int it = 1; it <= hp.max_admm; ++it) {
    st.iteration = it;
    st.H = step.H(st, projected);
    check_finite(st.H, "H", it);
    T = step.theta(st);
    check_finite(T, "projection", it);
    st.G = soc_project(T, st.lambda2, st.mu);
    projected = apply_data(sub, T);
    update_multipliers(st, projected, T);

    const double rh = (st.H - projected).norm();
    const double rg = (st.G - T).norm();
    rec.residual_h.push_back(rh);
    rec.residual_g.push_back(rg);
    rec.mu.push_back(st.mu);
    rec.iterations = it;
    st.mu = update_mu(st.mu, hp.rho, hp.mu_max);
    if (!std::isfinite(rh) || !std::isfinite(rg)) {
      fail(ErrorCode::Numerical,
           "non-finite residual at ADMM iteration " + std::to_string(it));
    }
    if (rh < hp.eps && rg < hp.eps) {
      rec.terminated_by = Termination::Tolerance;
      break;
    }
  }
  res.projection = std::move(T);
  return res;
}

FitResult fit(const TrainingStack& stack, const HyperParams& hp,
              const FitCallback& on_iteration) {
  hp.validate(stack.total_channels());
  const JointGraph graph = joint_adjacency(stack, hp);
  return fit(stack, graph, hp, on_iteration);
}

FitResult fit(const TrainingStack& stack, const JointGraph& graph,
              const HyperParams& hp, const FitCallback& on_iteration) {
  hp.validate(stack.total_channels());
  const Eigen::Index kn =
      stack.num_samples() * static_cast<Eigen::Index>(stack.num_modalities());
  if (graph.L.size() != kn || graph.intra.size() != stack.num_modalities()) {
    fail(ErrorCode::Dimension, "graph does not match training stack");
  }

  FitResult out;
  ProjectionModel& model = out.model;
  model = ProjectionModel::zeros(stack, hp.subspace_dim);
  for (std::size_t k = 0; k < stack.num_modalities(); ++k) {
    model.theta_k[k] = lpp_init(stack.block(k).data, graph.intra[k], hp.subspace_dim);
  }
  const Matrix alignment =
      hp.beta != 0.0 ? alignment_matrix(stack, graph) : Matrix();

  auto& trace = out.trace;
  bool shared_feasible = false;
  std::vector<bool> specific_feasible(stack.num_modalities(), false);
  double previous = 0.0;
  for (int t = 1; t <= hp.max_outer; ++t) {
    model.P = update_P(stack, model.generalized(), hp.alpha);

    double worst_h = 0.0;
    double worst_g = 0.0;
    auto keep = [&](const Subproblem& sub, SubproblemResult&& r, Matrix& current,
                    bool& feasible, int target) {
      auto& rec = r.record;
      rec.outer_iteration = t;
      rec.target = target;
      const bool converged = rec.terminated_by == Termination::Tolerance;
      rec.accepted = true;
      if (hp.monotone && feasible) {
        rec.accepted = converged && subproblem_objective(sub, r.projection) <=
                                        subproblem_objective(sub, current);
      }
      if (rec.accepted) {
        current = std::move(r.projection);
        feasible = converged;
        if (!rec.residual_h.empty()) {
          worst_h = std::max(worst_h, rec.residual_h.back());
          worst_g = std::max(worst_g, rec.residual_g.back());
        }
      }
      trace.admm.push_back(std::move(rec));
    };

    const Subproblem shared = make_shared_impl(model, stack, alignment, hp.beta);
    keep(shared, solve_subproblem(shared, model.theta0, hp), model.theta0,
         shared_feasible, -1);

    for (std::size_t k = 0; k < stack.num_modalities(); ++k) {
      const Subproblem specific = make_specific_subproblem(model, stack, k);
      bool feasible = specific_feasible[k];
      keep(specific, solve_subproblem(specific, model.theta_k[k], hp),
           model.theta_k[k], feasible, static_cast<int>(k));
      specific_feasible[k] = feasible;
    }

    const double energy = objective(model, stack, graph.L, hp);
    if (!std::isfinite(energy)) {
      fail(ErrorCode::Numerical,
           "objective is not finite at outer iteration " + std::to_string(t));
    }
    double delta = std::numeric_limits<double>::quiet_NaN();
    if (t > 1) delta = previous == 0.0 ? 0.0 : std::abs((energy - previous) / previous);
    trace.outer_objectives.push_back(energy);
    trace.relative_deltas.push_back(delta);
    if (on_iteration) on_iteration({t, energy, delta, worst_h, worst_g});
    previous = energy;
    if (t > 1 && delta < hp.zeta) {
      trace.terminated_by = Termination::Tolerance;
      break;
    }
  }
  return out;
}

}  // namespace s2fl
