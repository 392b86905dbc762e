#include "s2fl/model.hpp"

#include <sstream>

namespace s2fl {

ModalityBlock make_block(std::size_t id, std::string name, Matrix data) {
  if (data.rows() < 1 || data.cols() < 1) {
    fail(ErrorCode::Dimension, "modality '" + name + "' is empty");
  }
  if (!data.allFinite()) {
    fail(ErrorCode::Validation,
         "modality '" + name + "' contains non-finite values");
  }
  return ModalityBlock{id, std::move(name), std::move(data)};
}

TrainingStack build_stack(std::vector<ModalityBlock> blocks,
                          const std::vector<int>& labels, int num_classes) {
  std::vector<int> zero_based(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > num_classes) {
      std::ostringstream msg;
      msg << "label " << labels[i] << " at sample " << i
          << " outside 1.." << num_classes;
      fail(ErrorCode::Validation, msg.str());
    }
    zero_based[i] = labels[i] - 1;
  }
  return build_stack_zero_based(std::move(blocks), zero_based, num_classes);
}

TrainingStack build_stack_zero_based(std::vector<ModalityBlock> blocks,
                                     const std::vector<int>& labels,
                                     int num_classes) {
  if (blocks.empty()) fail(ErrorCode::Dimension, "no modalities");
  if (num_classes < 1) fail(ErrorCode::Validation, "need at least one class");

  const Eigen::Index n = blocks.front().samples();
  TrainingStack stack;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& b = blocks[k];
    if (b.samples() != n) {
      std::ostringstream msg;
      msg << "modality " << k << " ('" << b.name << "') has " << b.samples()
          << " samples, expected " << n;
      fail(ErrorCode::Dimension, msg.str());
    }
    if (b.channels() < 1) fail(ErrorCode::Dimension, "modality without channels");
    if (!b.data.allFinite()) {
      fail(ErrorCode::Validation,
           "modality '" + b.name + "' contains non-finite values");
    }
    stack.offsets_.push_back(stack.offsets_.back() + b.channels());
  }
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    std::ostringstream msg;
    msg << labels.size() << " labels for " << n << " samples";
    fail(ErrorCode::Dimension, msg.str());
  }

  std::vector<int> counts(num_classes, 0);
  stack.onehot_ = Matrix::Zero(num_classes, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = labels[i];
    if (c < 0 || c >= num_classes) {
      std::ostringstream msg;
      msg << "label " << c + 1 << " at sample " << i << " outside 1.."
          << num_classes;
      fail(ErrorCode::Validation, msg.str());
    }
    ++counts[c];
    stack.onehot_(c, i) = 1.0;
  }
  for (int c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) {
      fail(ErrorCode::Validation,
           "class " + std::to_string(c + 1) + " has no samples");
    }
  }

  for (std::size_t k = 0; k < blocks.size(); ++k) blocks[k].id = k;
  stack.blocks_ = std::move(blocks);
  stack.labels_ = labels;
  stack.num_samples_ = n;
  stack.num_classes_ = num_classes;
  return stack;
}

Matrix replicated_onehot(const TrainingStack& stack) {
  const Eigen::Index n = stack.num_samples();
  const auto K = static_cast<Eigen::Index>(stack.num_modalities());
  Matrix out(stack.num_classes(), K * n);
  for (Eigen::Index k = 0; k < K; ++k) out.middleCols(k * n, n) = stack.onehot();
  return out;
}

void HyperParams::validate(Eigen::Index total_channels) const {
  auto bad = [](const std::string& what) { fail(ErrorCode::Validation, what); };
  if (!(alpha > 0)) bad("alpha must be > 0");
  if (!(beta >= 0)) bad("beta must be >= 0");
  if (!(sigma > 0)) bad("sigma must be > 0");
  if (q < 1) bad("q must be >= 1");
  if (max_outer < 1) bad("max_outer must be >= 1");
  if (max_admm < 1) bad("max_admm must be >= 1");
  if (!(zeta > 0)) bad("zeta must be > 0");
  if (!(eps > 0)) bad("eps must be > 0");
  if (!(mu0 > 0)) bad("mu0 must be > 0");
  if (!(rho > 1)) bad("rho must be > 1");
  if (!(mu_max > mu0)) bad("mu_max must exceed mu0");
  if (subspace_dim < 1 || subspace_dim > total_channels) {
    std::ostringstream msg;
    msg << "subspace dimension " << subspace_dim << " must lie in 1.."
        << total_channels << " (total channels)";
    fail(ErrorCode::InvalidDs, msg.str());
  }
}

Matrix ProjectionModel::generalized() const {
  Matrix out = theta0;
  for (std::size_t k = 0; k < theta_k.size(); ++k) {
    out.middleCols(offsets[k], channels(k)) += theta_k[k];
  }
  return out;
}

ProjectionModel ProjectionModel::zeros(const TrainingStack& stack,
                                       Eigen::Index subspace_dim) {
  ProjectionModel m;
  m.offsets = stack.channel_offsets();
  m.theta0 = Matrix::Zero(subspace_dim, stack.total_channels());
  for (const auto& b : stack.blocks()) {
    m.theta_k.push_back(Matrix::Zero(subspace_dim, b.channels()));
  }
  m.P = Matrix::Zero(stack.num_classes(), subspace_dim);
  return m;
}

Matrix project_stack(const Matrix& projection, const TrainingStack& stack) {
  if (projection.cols() != stack.total_channels()) {
    fail(ErrorCode::Dimension, "projection width does not match stack channels");
  }
  const Eigen::Index n = stack.num_samples();
  const auto& off = stack.channel_offsets();
  Matrix out(projection.rows(), n * static_cast<Eigen::Index>(stack.num_modalities()));
  for (std::size_t k = 0; k < stack.num_modalities(); ++k) {
    const auto& X = stack.block(k).data;
    out.middleCols(static_cast<Eigen::Index>(k) * n, n).noalias() =
        projection.middleCols(off[k], X.rows()) * X;
  }
  return out;
}

Matrix project_stack(const std::vector<Matrix>& projections,
                     const TrainingStack& stack) {
  if (projections.size() != stack.num_modalities()) {
    fail(ErrorCode::Dimension, "one projection per modality required");
  }
  const Eigen::Index n = stack.num_samples();
  const Eigen::Index rows = projections.front().rows();
  Matrix out(rows, n * static_cast<Eigen::Index>(stack.num_modalities()));
  for (std::size_t k = 0; k < stack.num_modalities(); ++k) {
    const auto& X = stack.block(k).data;
    if (projections[k].cols() != X.rows() || projections[k].rows() != rows) {
      fail(ErrorCode::Dimension, "projection shape mismatch for modality " +
                                     std::to_string(k));
    }
    out.middleCols(static_cast<Eigen::Index>(k) * n, n).noalias() =
        projections[k] * X;
  }
  return out;
}

void check_model_matches(const ProjectionModel& model,
                         const TrainingStack& stack) {
  if (model.offsets != stack.channel_offsets() ||
      model.theta_k.size() != stack.num_modalities() ||
      model.theta0.cols() != stack.total_channels() ||
      model.P.rows() != stack.num_classes() ||
      model.P.cols() != model.theta0.rows()) {
    fail(ErrorCode::Dimension, "model dimensions do not match training stack");
  }
  for (std::size_t k = 0; k < model.theta_k.size(); ++k) {
    if (model.theta_k[k].rows() != model.theta0.rows() ||
        model.theta_k[k].cols() != model.channels(k)) {
      fail(ErrorCode::Dimension,
           "specific projection " + std::to_string(k) + " has wrong shape");
    }
  }
}

}  // namespace s2fl
