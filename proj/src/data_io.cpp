#include "s2fl/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "s2fl/container.hpp"

namespace s2fl {

namespace fs = std::filesystem;

namespace {

int max_label(const DatasetBundle& b) {
  std::uint32_t m = 0;
  for (auto v : b.train_mask) m = std::max(m, v);
  for (auto v : b.test_mask) m = std::max(m, v);
  return static_cast<int>(m);
}

std::vector<std::string> resolved_names(const DatasetBundle& b) {
  if (!b.class_names.empty()) return b.class_names;
  std::vector<std::string> names;
  for (int c = 1; c <= max_label(b); ++c) names.push_back("class_" + std::to_string(c));
  return names;
}

std::string trim_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

bool parse_real(const std::string& cell, double& out) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  if (first < last && *first == '+') ++first;
  if (first == last) return false;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

/// Parsed numeric table; rows are the file's data rows.
std::vector<std::vector<double>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim_cr(line);
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    std::vector<double> row(cells.size());
    bool ok = true;
    std::size_t bad = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!parse_real(cells[c], row[c])) {
        ok = false;
        bad = c;
        break;
      }
    }
    if (!ok) {
      if (lineno == 1) continue;  // header
      std::ostringstream msg;
      msg << path.string() << ": row " << lineno << " col " << bad + 1
          << ": cannot parse '" << cells[bad] << "'";
      fail(ErrorCode::Format, msg.str());
    }
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      std::ostringstream msg;
      msg << path.string() << ": row " << lineno << " has " << row.size()
          << " columns, expected " << width;
      fail(ErrorCode::Format, msg.str());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

fs::path modality_file(const fs::path& dir, std::size_t k) {
  return dir / ("modality_" + std::to_string(k + 1) + ".f64");
}

}  // namespace

void validate_bundle(const DatasetBundle& b) {
  if (b.height < 1 || b.width < 1) fail(ErrorCode::Dimension, "grid must be nonempty");
  if (b.modalities.empty()) fail(ErrorCode::Dimension, "bundle has no modalities");
  const Eigen::Index n = b.num_pixels();
  for (const auto& m : b.modalities) {
    if (m.channels() < 1 || m.samples() != n) {
      std::ostringstream msg;
      msg << "modality '" << m.name << "' is " << m.channels() << " x "
          << m.samples() << ", expected d_k x " << n;
      fail(ErrorCode::Dimension, msg.str());
    }
    if (!m.data.allFinite()) {
      fail(ErrorCode::Validation, "modality '" + m.name + "' has non-finite values");
    }
  }
  if (static_cast<Eigen::Index>(b.train_mask.size()) != n ||
      static_cast<Eigen::Index>(b.test_mask.size()) != n) {
    fail(ErrorCode::Dimension, "mask length does not match grid");
  }
  const auto classes = static_cast<std::uint32_t>(
      b.class_names.empty() ? max_label(b) : b.num_classes());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (b.train_mask[i] != 0 && b.test_mask[i] != 0) {
      fail(ErrorCode::Validation,
           "train and test masks overlap at pixel " + std::to_string(i));
    }
    if (b.train_mask[i] > classes || b.test_mask[i] > classes) {
      std::ostringstream msg;
      msg << "class id " << std::max(b.train_mask[i], b.test_mask[i])
          << " at pixel " << i << " exceeds class count " << classes;
      fail(ErrorCode::Validation, msg.str());
    }
  }
}

void save_bundle(const DatasetBundle& bundle, const fs::path& dir) {
  validate_bundle(bundle);
  ensure_directory(dir);
  Manifest m;
  m.set("height", static_cast<long long>(bundle.height));
  m.set("width", static_cast<long long>(bundle.width));
  m.set("modalities", static_cast<long long>(bundle.modalities.size()));
  for (std::size_t k = 0; k < bundle.modalities.size(); ++k) {
    const auto prefix = "modality." + std::to_string(k + 1);
    m.set(prefix + ".name", bundle.modalities[k].name);
    m.set(prefix + ".channels", static_cast<long long>(bundle.modalities[k].channels()));
  }
  const auto names = resolved_names(bundle);
  m.set("classes", static_cast<long long>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) {
    m.set("class." + std::to_string(c + 1) + ".name", names[c]);
  }
  m.write(dir / "manifest.txt");
  for (std::size_t k = 0; k < bundle.modalities.size(); ++k) {
    write_f64(modality_file(dir, k), bundle.modalities[k].data);
  }
  write_u32(dir / "train_mask.u32", bundle.train_mask);
  write_u32(dir / "test_mask.u32", bundle.test_mask);
}

DatasetBundle load_bundle(const fs::path& dir) {
  const Manifest m = Manifest::read(dir / "manifest.txt");
  DatasetBundle b;
  b.height = m.get_int("height");
  b.width = m.get_int("width");
  if (b.height < 1 || b.width < 1) {
    fail(ErrorCode::Format, (dir / "manifest.txt").string() + ": grid must be positive");
  }
  const auto K = m.get_int("modalities");
  if (K < 1) fail(ErrorCode::Format, (dir / "manifest.txt").string() + ": no modalities");
  const Eigen::Index n = b.num_pixels();
  for (long long k = 0; k < K; ++k) {
    const auto prefix = "modality." + std::to_string(k + 1);
    const std::string name = m.get(prefix + ".name");
    const auto channels = m.get_int(prefix + ".channels");
    if (channels < 1) fail(ErrorCode::Format, prefix + ".channels must be positive");
    Matrix data = read_f64(modality_file(dir, static_cast<std::size_t>(k)), channels, n,
                           "modality " + std::to_string(k + 1) + " '" + name + "'");
    b.modalities.push_back(ModalityBlock{static_cast<std::size_t>(k), name, std::move(data)});
  }
  const auto C = m.get_int("classes");
  for (long long c = 0; c < C; ++c) {
    b.class_names.push_back(m.get("class." + std::to_string(c + 1) + ".name"));
  }
  b.train_mask = read_u32(dir / "train_mask.u32", static_cast<std::size_t>(n), "train mask");
  b.test_mask = read_u32(dir / "test_mask.u32", static_cast<std::size_t>(n), "test mask");
  validate_bundle(b);
  return b;
}

DatasetBundle import_csv(const std::vector<fs::path>& modality_csvs,
                         const fs::path& labels_csv, Eigen::Index height,
                         Eigen::Index width, std::vector<std::string> class_names) {
  if (modality_csvs.empty()) fail(ErrorCode::Validation, "no modality CSV given");
  DatasetBundle b;
  b.height = height;
  b.width = width;
  const auto n = static_cast<std::size_t>(height * width);
  for (std::size_t k = 0; k < modality_csvs.size(); ++k) {
    const auto rows = read_csv(modality_csvs[k]);
    if (rows.size() != n) {
      std::ostringstream msg;
      msg << modality_csvs[k].string() << ": " << rows.size() << " data rows, expected "
          << n << " (grid " << height << " x " << width << ")";
      fail(ErrorCode::Dimension, msg.str());
    }
    const auto d = static_cast<Eigen::Index>(rows.front().size());
    Matrix data(d, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < d; ++c) data(c, static_cast<Eigen::Index>(i)) = rows[i][c];
    }
    b.modalities.push_back(
        make_block(k, modality_csvs[k].stem().string(), std::move(data)));
  }
  const auto labels = read_csv(labels_csv);
  if (labels.size() != n || labels.front().size() != 2) {
    fail(ErrorCode::Dimension,
         labels_csv.string() + ": expected " + std::to_string(n) + " rows of train,test");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 2; ++c) {
      const double v = labels[i][c];
      if (v < 0 || v != std::floor(v) || v > 4294967295.0) {
        std::ostringstream msg;
        msg << labels_csv.string() << ": row " << i + 1 << " col " << c + 1
            << ": label must be a nonnegative integer";
        fail(ErrorCode::Format, msg.str());
      }
    }
    b.train_mask.push_back(static_cast<std::uint32_t>(labels[i][0]));
    b.test_mask.push_back(static_cast<std::uint32_t>(labels[i][1]));
  }
  b.class_names = std::move(class_names);
  if (b.class_names.empty()) b.class_names = resolved_names(b);
  validate_bundle(b);
  return b;
}

bool BandStatistics::any_degenerate() const {
  for (const auto& d : degenerate) {
    if (std::find(d.begin(), d.end(), true) != d.end()) return true;
  }
  return false;
}

Standardized standardize(const DatasetBundle& bundle, Standardization mode) {
  Standardized out{bundle, {}};
  const auto train = masked_pixels(bundle.train_mask);
  for (std::size_t k = 0; k < bundle.modalities.size(); ++k) {
    const Matrix& X = bundle.modalities[k].data;
    const Eigen::Index d = X.rows();
    Vector mean = Vector::Zero(d);
    Vector scale = Vector::Ones(d);
    std::vector<bool> flags(static_cast<std::size_t>(d), false);
    if (mode == Standardization::PerBandZScore) {
      if (train.empty()) {
        std::fill(flags.begin(), flags.end(), true);
      } else {
        const Matrix T = gather_columns(X, train);
        mean = T.rowwise().mean();
        const Vector var =
            (T.colwise() - mean).rowwise().squaredNorm() / static_cast<double>(T.cols());
        for (Eigen::Index c = 0; c < d; ++c) {
          const double sd = std::sqrt(var(c));
          if (sd < 1e-12) {
            flags[static_cast<std::size_t>(c)] = true;
          } else {
            scale(c) = sd;
          }
        }
      }
    }
    out.stats.mean.push_back(mean);
    out.stats.scale.push_back(scale);
    out.stats.degenerate.push_back(std::move(flags));
    if (mode == Standardization::PerBandZScore) {
      out.bundle.modalities[k].data = apply_statistics(X, out.stats, k);
    }
  }
  return out;
}

Matrix apply_statistics(const Matrix& X, const BandStatistics& stats, std::size_t k) {
  if (k >= stats.mean.size() || stats.mean[k].size() != X.rows()) {
    fail(ErrorCode::Dimension, "band statistics do not match modality " + std::to_string(k));
  }
  return (X.colwise() - stats.mean[k]).array().colwise() / stats.scale[k].array();
}

DatasetBundle make_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 1) fail(ErrorCode::Validation, "synthetic: zero classes");
  if (spec.channels.empty()) fail(ErrorCode::Validation, "synthetic: no modalities");
  for (int d : spec.channels) {
    if (d < 1) fail(ErrorCode::Validation, "synthetic: modality without channels");
  }
  if (spec.train_per_class < 0 || spec.test_per_class < 0 ||
      spec.train_per_class + spec.test_per_class < 1) {
    fail(ErrorCode::Validation, "synthetic: zero samples per class");
  }
  if (spec.shared_latent_dim < 1 || spec.private_latent_dim < 1) {
    fail(ErrorCode::Validation, "synthetic: latent dimensions must be positive");
  }
  if (!(spec.shared_fraction >= 0.0 && spec.shared_fraction <= 1.0) ||
      !(spec.noise >= 0.0) || !(spec.separation >= 0.0)) {
    fail(ErrorCode::Validation, "synthetic: invalid noise/separation/fraction");
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j) {
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(rng);
    }
    return m;
  };

  const int C = spec.num_classes;
  const int rs = spec.shared_latent_dim;
  const int rp = spec.private_latent_dim;
  const int per_class = spec.train_per_class + spec.test_per_class;
  const Eigen::Index n = static_cast<Eigen::Index>(C) * per_class;

  const Matrix codes = spec.separation * gaussian(rs, C);
  std::vector<Matrix> shared_maps, private_maps;
  for (int d : spec.channels) {
    shared_maps.push_back(gaussian(d, rs) / std::sqrt(static_cast<double>(rs)));
    private_maps.push_back(gaussian(d, rp) / std::sqrt(static_cast<double>(rp)));
  }

  // sample s lives at pixel order[s]
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);

  DatasetBundle b;
  b.height = C;
  b.width = per_class;
  b.train_mask.assign(static_cast<std::size_t>(n), 0);
  b.test_mask.assign(static_cast<std::size_t>(n), 0);
  std::vector<Matrix> data;
  for (int d : spec.channels) data.push_back(Matrix::Zero(d, n));

  const double ws = std::sqrt(spec.shared_fraction);
  const double wp = std::sqrt(1.0 - spec.shared_fraction);
  Eigen::Index s = 0;
  for (int c = 0; c < C; ++c) {
    for (int j = 0; j < per_class; ++j, ++s) {
      const Eigen::Index px = order[static_cast<std::size_t>(s)];
      const Vector z_shared = codes.col(c) + gaussian(rs, 1).col(0);
      for (std::size_t k = 0; k < spec.channels.size(); ++k) {
        const Vector z_private = gaussian(rp, 1).col(0);
        const Vector noise = spec.noise * gaussian(spec.channels[k], 1).col(0);
        data[k].col(px) =
            ws * shared_maps[k] * z_shared + wp * private_maps[k] * z_private + noise;
      }
      auto& mask = j < spec.train_per_class ? b.train_mask : b.test_mask;
      mask[static_cast<std::size_t>(px)] = static_cast<std::uint32_t>(c + 1);
    }
  }
  for (std::size_t k = 0; k < data.size(); ++k) {
    b.modalities.push_back(
        ModalityBlock{k, "modality_" + std::to_string(k + 1), std::move(data[k])});
  }
  for (int c = 1; c <= C; ++c) b.class_names.push_back("class_" + std::to_string(c));
  return b;
}

std::vector<Eigen::Index> masked_pixels(const std::vector<std::uint32_t>& mask) {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

Matrix gather_columns(const Matrix& X, const std::vector<Eigen::Index>& columns) {
  Matrix out(X.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = X.col(columns[j]);
  }
  return out;
}

TrainingStack stack_from_mask(const DatasetBundle& bundle,
                              const std::vector<std::uint32_t>& mask) {
  const auto pixels = masked_pixels(mask);
  if (pixels.empty()) fail(ErrorCode::Validation, "mask selects no pixels");
  std::vector<ModalityBlock> blocks;
  for (const auto& m : bundle.modalities) {
    blocks.push_back(ModalityBlock{m.id, m.name, gather_columns(m.data, pixels)});
  }
  std::vector<int> labels;
  for (auto p : pixels) labels.push_back(static_cast<int>(mask[static_cast<std::size_t>(p)]));
  const int C = bundle.class_names.empty() ? max_label(bundle) : bundle.num_classes();
  return build_stack(std::move(blocks), labels, C);
}

void write_class_map(const std::vector<std::uint32_t>& predictions,
                     Eigen::Index height, Eigen::Index width, const fs::path& path,
                     const std::vector<std::string>& class_names) {
  if (static_cast<Eigen::Index>(predictions.size()) != height * width) {
    fail(ErrorCode::Dimension, "prediction count does not match grid");
  }
  std::uint32_t top = 0;
  for (auto v : predictions) top = std::max(top, v);
  if (top > 255 || class_names.size() > 255) {
    fail(ErrorCode::Unsupported, "class map supports at most 255 classes");
  }
  std::string header =
      "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (auto v : predictions) out.put(static_cast<char>(static_cast<unsigned char>(v)));
    if (!out) fail(ErrorCode::Io, "short write to " + path.string());
  }
  fs::path legend = path;
  legend.replace_extension(".legend.txt");
  std::ofstream out(legend, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + legend.string());
  out << "0 unlabeled\n";
  const auto classes = std::max<std::size_t>(class_names.size(), top);
  for (std::size_t c = 1; c <= classes; ++c) {
    out << c << ' '
        << (c <= class_names.size() ? class_names[c - 1] : "class_" + std::to_string(c))
        << '\n';
  }
  if (!out) fail(ErrorCode::Io, "short write to " + legend.string());
}

}  // namespace s2fl
