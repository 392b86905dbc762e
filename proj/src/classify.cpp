#include "s2fl/classify.hpp"

#include <limits>
#include <sstream>

namespace s2fl {

std::vector<std::size_t> EmbeddingConfig::resolve(std::size_t num_modalities) const {
  if (modalities.empty()) {
    std::vector<std::size_t> all(num_modalities);
    for (std::size_t k = 0; k < num_modalities; ++k) all[k] = k;
    return all;
  }
  for (auto k : modalities) {
    if (k >= num_modalities) {
      fail(ErrorCode::Validation, "modality " + std::to_string(k + 1) +
                                      " out of range 1.." +
                                      std::to_string(num_modalities));
    }
  }
  return modalities;
}

Matrix embed_modality(const ProjectionModel& model, const Matrix& X, std::size_t k,
                      EmbedMode mode) {
  if (k >= model.num_modalities()) {
    fail(ErrorCode::Validation, "modality index out of range");
  }
  if (X.rows() != model.channels(k)) {
    std::ostringstream msg;
    msg << "modality " << k + 1 << " expects " << model.channels(k)
        << " channels, got " << X.rows();
    fail(ErrorCode::Dimension, msg.str());
  }
  switch (mode) {
    case EmbedMode::SharedOnly: return model.shared_block(k) * X;
    case EmbedMode::SpecificOnly: return model.theta_k[k] * X;
    case EmbedMode::Both: break;
  }
  return model.generalized_block(k) * X;
}

Matrix fuse(const std::vector<Matrix>& embeddings, Fusion fusion) {
  if (embeddings.empty()) fail(ErrorCode::Validation, "nothing to fuse");
  const Eigen::Index m = embeddings.front().cols();
  const Eigen::Index d = embeddings.front().rows();
  for (const auto& e : embeddings) {
    if (e.cols() != m) fail(ErrorCode::Dimension, "embeddings disagree on sample count");
    if (fusion != Fusion::Concatenate && e.rows() != d) {
      fail(ErrorCode::Dimension, "embeddings disagree on dimension");
    }
  }
  if (embeddings.size() == 1) return embeddings.front();
  if (fusion == Fusion::Concatenate) {
    Eigen::Index rows = 0;
    for (const auto& e : embeddings) rows += e.rows();
    Matrix out(rows, m);
    Eigen::Index r = 0;
    for (const auto& e : embeddings) {
      out.middleRows(r, e.rows()) = e;
      r += e.rows();
    }
    return out;
  }
  Matrix out = embeddings.front();
  for (std::size_t i = 1; i < embeddings.size(); ++i) out += embeddings[i];
  if (fusion == Fusion::Mean) out /= static_cast<double>(embeddings.size());
  return out;
}

Matrix embed(const ProjectionModel& model, const std::vector<const Matrix*>& data,
             const EmbeddingConfig& config) {
  std::vector<Matrix> parts;
  for (auto k : config.resolve(model.num_modalities())) {
    if (k >= data.size() || data[k] == nullptr) {
      fail(ErrorCode::Validation, "no data for modality " + std::to_string(k + 1));
    }
    parts.push_back(embed_modality(model, *data[k], k, config.mode));
  }
  return fuse(parts, config.fusion);
}

std::vector<int> nn_classify(const Matrix& train_features,
                             const std::vector<int>& train_labels,
                             const Matrix& test_features) {
  const Eigen::Index ntr = train_features.cols();
  if (ntr == 0) fail(ErrorCode::Validation, "empty training set");
  if (static_cast<Eigen::Index>(train_labels.size()) != ntr) {
    fail(ErrorCode::Dimension, "training label count mismatch");
  }
  if (test_features.rows() != train_features.rows()) {
    fail(ErrorCode::Dimension, "train/test feature dimensions differ");
  }
  const Eigen::Index d = train_features.rows();
  std::vector<int> out(static_cast<std::size_t>(test_features.cols()));
  for (Eigen::Index t = 0; t < test_features.cols(); ++t) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = 0;
    for (Eigen::Index i = 0; i < ntr; ++i) {
      double dist = 0.0;
      for (Eigen::Index r = 0; r < d; ++r) {
        const double diff = test_features(r, t) - train_features(r, i);
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        arg = i;
      }
    }
    out[static_cast<std::size_t>(t)] = train_labels[static_cast<std::size_t>(arg)];
  }
  return out;
}

EvalReport evaluate(const std::vector<int>& predictions,
                    const std::vector<int>& reference, int num_classes) {
  if (predictions.size() != reference.size()) {
    fail(ErrorCode::Validation, "prediction and reference lengths differ");
  }
  if (num_classes < 1) fail(ErrorCode::Validation, "need at least one class");
  EvalReport rep;
  rep.confusion = Eigen::MatrixXi::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const int r = reference[i];
    const int p = predictions[i];
    if (r < 1 || r > num_classes || p < 1 || p > num_classes) {
      fail(ErrorCode::Validation,
           "label outside 1.." + std::to_string(num_classes) + " at position " +
               std::to_string(i));
    }
    ++rep.confusion(r - 1, p - 1);
  }
  const double total = static_cast<double>(reference.size());
  rep.per_class_accuracy.assign(static_cast<std::size_t>(num_classes), 0.0);
  if (reference.empty()) {
    rep.kappa_degenerate = true;
    for (int c = 1; c <= num_classes; ++c) rep.excluded_classes.push_back(c);
    return rep;
  }

  const auto conf = rep.confusion.cast<double>();
  rep.oa = conf.trace() / total;
  double recall_sum = 0.0;
  int counted = 0;
  double chance = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const double row = conf.row(c).sum();
    const double col = conf.col(c).sum();
    chance += row * col;
    if (row == 0.0) {
      rep.excluded_classes.push_back(c + 1);
      continue;
    }
    rep.per_class_accuracy[static_cast<std::size_t>(c)] = conf(c, c) / row;
    recall_sum += conf(c, c) / row;
    ++counted;
  }
  rep.aa = recall_sum / counted;
  const double pe = chance / (total * total);
  if (pe >= 1.0) {
    rep.kappa = 0.0;
    rep.kappa_degenerate = true;
  } else {
    rep.kappa = (rep.oa - pe) / (1.0 - pe);
  }
  return rep;
}

std::vector<int> cml_predict(const ProjectionModel& model,
                             const TrainingStack& train_stack,
                             const Matrix& test_data, std::size_t k,
                             const EmbeddingConfig& config) {
  check_model_matches(model, train_stack);
  std::vector<const Matrix*> data;
  for (const auto& b : train_stack.blocks()) data.push_back(&b.data);

  EmbeddingConfig train_cfg = config;
  if (config.fusion == Fusion::Concatenate &&
      config.resolve(model.num_modalities()).size() > 1) {
    train_cfg.fusion = Fusion::Mean;
  }
  const Matrix train_features = embed(model, data, train_cfg);
  const Matrix test_features = embed_modality(model, test_data, k, config.mode);

  std::vector<int> labels(train_stack.labels());
  for (auto& l : labels) ++l;
  return nn_classify(train_features, labels, test_features);
}

}  // namespace s2fl
