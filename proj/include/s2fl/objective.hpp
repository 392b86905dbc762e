#pragma once

#include "s2fl/graph.hpp"
#include "s2fl/model.hpp"

namespace s2fl {

/// 1/2 ||Y~ - P Theta X~||_F^2 with Theta the generalized projection.
double regression_term(const ProjectionModel& model, const TrainingStack& stack);

/// alpha/2 ||P||_F^2
double ridge_term(const ProjectionModel& model, double alpha);

/// beta/2 tr(Theta0 X~ L (Theta0 X~)^T)
double alignment_term(const ProjectionModel& model, const TrainingStack& stack,
                      const GraphMatrix& laplacian, double beta);

/// Sum of the three terms above; the quantity monitored by the outer loop.
double objective(const ProjectionModel& model, const TrainingStack& stack,
                 const GraphMatrix& laplacian, const HyperParams& hp);

}  // namespace s2fl
