#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "s2fl/data_io.hpp"
#include "s2fl/model.hpp"

namespace s2fl {

/// A fitted model as persisted by the CLI: projections, regressor, the
/// hyperparameters that produced them and the input standardization.
struct StoredModel {
  ProjectionModel model;
  HyperParams params;
  Standardization standardization = Standardization::None;
  BandStatistics stats;  // empty unless standardization is z-score
  std::vector<std::string> modality_names;
  int num_classes = 0;
};

/// Directory layout (same conventions as bundles):
///   manifest.txt    magic=S2FLv1, kind=model, shapes, hyperparameters
///   theta0.f64      d_s x Sum(d_k)
///   theta_<k>.f64   d_s x d_k, k 1-based
///   P.f64           C x d_s
///   mean_<k>.f64, scale_<k>.f64   d_k x 1, z-score only
void save_model(const StoredModel& stored, const std::filesystem::path& dir);
StoredModel load_model(const std::filesystem::path& dir);

}  // namespace s2fl
