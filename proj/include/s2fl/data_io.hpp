#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "s2fl/model.hpp"

namespace s2fl {

/// Full image grid of co-registered modalities plus train/test ground truth.
/// Mask values: 0 = unlabeled, otherwise a 1-based class id.
struct DatasetBundle {
  std::vector<ModalityBlock> modalities;  // each d_k x (height * width)
  std::vector<std::uint32_t> train_mask;
  std::vector<std::uint32_t> test_mask;
  std::vector<std::string> class_names;  // one per class
  Eigen::Index height = 0;
  Eigen::Index width = 0;

  Eigen::Index num_pixels() const { return height * width; }
  int num_classes() const { return static_cast<int>(class_names.size()); }
};

void validate_bundle(const DatasetBundle& bundle);

/// Directory layout:
///   manifest.txt      key=value lines, first line magic=S2FLv1
///   modality_<k>.f64  little-endian float64, row-major d_k x N_all (k 1-based)
///   train_mask.u32    little-endian uint32, N_all values
///   test_mask.u32
DatasetBundle load_bundle(const std::filesystem::path& dir);
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);

/// One CSV per modality (rows = pixels, columns = channels) and a label CSV
/// with `train,test` columns per pixel. A non-numeric first row is a header.
DatasetBundle import_csv(const std::vector<std::filesystem::path>& modality_csvs,
                         const std::filesystem::path& labels_csv,
                         Eigen::Index height, Eigen::Index width,
                         std::vector<std::string> class_names = {});

enum class Standardization { None, PerBandZScore };

/// Per-band statistics fitted on training pixels. Bands whose standard
/// deviation is below 1e-12 keep scale 1 and are flagged.
struct BandStatistics {
  std::vector<Vector> mean;
  std::vector<Vector> scale;
  std::vector<std::vector<bool>> degenerate;

  bool any_degenerate() const;
};

struct Standardized {
  DatasetBundle bundle;
  BandStatistics stats;
};

Standardized standardize(const DatasetBundle& bundle, Standardization mode);
/// (x - mean) / scale per band, for data not used to fit the statistics.
Matrix apply_statistics(const Matrix& X, const BandStatistics& stats,
                        std::size_t k);

struct SyntheticSpec {
  int num_classes = 5;
  std::vector<int> channels{12, 6};
  int train_per_class = 60;
  int test_per_class = 60;
  double separation = 3.0;       // scale of the class codes in latent space
  double noise = 0.5;            // stdev of per-channel Gaussian noise
  double shared_fraction = 0.5;  // energy share of the shared latent
  int shared_latent_dim = 4;
  int private_latent_dim = 3;
  std::uint64_t seed = 7;
};

/// Each sample draws a shared latent around its class code and one private,
/// class-independent latent per modality; modality k observes
///   sqrt(f) A_k z_shared + sqrt(1 - f) B_k z_private_k + noise.
/// Pixels are shuffled over a num_classes x (train + test) grid.
DatasetBundle make_synthetic(const SyntheticSpec& spec);

/// Indices of pixels whose mask value is nonzero, ascending.
std::vector<Eigen::Index> masked_pixels(const std::vector<std::uint32_t>& mask);

Matrix gather_columns(const Matrix& X, const std::vector<Eigen::Index>& columns);

/// Training stack over the nonzero pixels of `mask`.
TrainingStack stack_from_mask(const DatasetBundle& bundle,
                              const std::vector<std::uint32_t>& mask);

/// Binary PGM (P5, maxval 255), pixel value = class id, plus a text legend
/// written next to it with the extension replaced by `.legend.txt`.
void write_class_map(const std::vector<std::uint32_t>& predictions,
                     Eigen::Index height, Eigen::Index width,
                     const std::filesystem::path& path,
                     const std::vector<std::string>& class_names = {});

}  // namespace s2fl
