#include "s2fl/objective.hpp"

namespace s2fl {

double regression_term(const ProjectionModel& model, const TrainingStack& stack) {
  check_model_matches(model, stack);
  const Matrix& Y = stack.onehot();
  double total = 0.0;
  for (std::size_t k = 0; k < stack.num_modalities(); ++k) {
    const Matrix fitted = model.P * (model.generalized_block(k) * stack.block(k).data);
    total += (Y - fitted).squaredNorm();
  }
  return 0.5 * total;
}

double ridge_term(const ProjectionModel& model, double alpha) {
  return 0.5 * alpha * model.P.squaredNorm();
}

double alignment_term(const ProjectionModel& model, const TrainingStack& stack,
                      const GraphMatrix& laplacian, double beta) {
  check_model_matches(model, stack);
  const Eigen::Index kn =
      stack.num_samples() * static_cast<Eigen::Index>(stack.num_modalities());
  if (laplacian.size() != kn) {
    fail(ErrorCode::Dimension, "Laplacian size does not match K*N");
  }
  if (beta == 0.0) return 0.0;
  return 0.5 * beta * laplacian.trace_form(project_stack(model.theta0, stack));
}

double objective(const ProjectionModel& model, const TrainingStack& stack,
                 const GraphMatrix& laplacian, const HyperParams& hp) {
  return regression_term(model, stack) + ridge_term(model, hp.alpha) +
         alignment_term(model, stack, laplacian, hp.beta);
}

}  // namespace s2fl
