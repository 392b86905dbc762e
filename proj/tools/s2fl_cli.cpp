// s2fl: synth / fit / transform / classify / evaluate / cv over bundle
// directories. Errors leave a single `S2FL-ERR:<CODE>: message` line on stderr.

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "s2fl/classify.hpp"
#include "s2fl/container.hpp"
#include "s2fl/cv.hpp"
#include "s2fl/data_io.hpp"
#include "s2fl/model_io.hpp"
#include "s2fl/solver.hpp"

namespace fs = std::filesystem;
using namespace s2fl;

namespace {

enum class LogLevel { Quiet, Info, Debug };

LogLevel log_level() {
  const char* env = std::getenv("S2FL_LOG");
  if (!env) return LogLevel::Info;
  const std::string v(env);
  if (v == "quiet") return LogLevel::Quiet;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

void log(LogLevel at, const std::string& msg) {
  static const LogLevel level = log_level();
  if (static_cast<int>(at) <= static_cast<int>(level)) std::cerr << "s2fl: " << msg << '\n';
}

std::string num(double v) {
  // shortest representation that round-trips
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) ensure_directory(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

const std::map<std::string, Fusion> kFusion{
    {"concat", Fusion::Concatenate}, {"sum", Fusion::Sum}, {"mean", Fusion::Mean}};
const std::map<std::string, EmbedMode> kMode{{"shared", EmbedMode::SharedOnly},
                                             {"specific", EmbedMode::SpecificOnly},
                                             {"both", EmbedMode::Both}};
const std::map<std::string, Standardization> kStandardize{
    {"none", Standardization::None}, {"zscore", Standardization::PerBandZScore}};

struct Options {
  fs::path bundle, model, out;
  HyperParams hp;
  std::string fusion = "concat";
  std::string mode = "both";
  std::string standardize = "zscore";
  int cml_modality = 0;  // 1-based, 0 = off
  int folds = 10;
  bool map = false;
  std::string mask = "test";
  fs::path predictions, reference;
  int classes = 0;
  SyntheticSpec synth;
  std::vector<int> grid_q, grid_ds;
  std::vector<double> grid_sigma, grid_alpha, grid_beta;
};

void add_hyperparams(CLI::App* cmd, Options& o) {
  cmd->add_option("--alpha", o.hp.alpha, "ridge weight on P")->capture_default_str();
  cmd->add_option("--beta", o.hp.beta, "manifold alignment weight")->capture_default_str();
  cmd->add_option("--sigma", o.hp.sigma, "Gaussian kernel width")->capture_default_str();
  cmd->add_option("--q", o.hp.q, "neighbours per sample")->capture_default_str();
  cmd->add_option("--ds", o.hp.subspace_dim, "subspace dimension")->capture_default_str();
  cmd->add_option("--max-outer", o.hp.max_outer)->capture_default_str();
  cmd->add_option("--max-admm", o.hp.max_admm)->capture_default_str();
  cmd->add_option("--zeta", o.hp.zeta, "outer relative tolerance")->capture_default_str();
  cmd->add_option("--eps", o.hp.eps, "ADMM residual tolerance")->capture_default_str();
  cmd->add_option("--seed", o.hp.seed)->capture_default_str();
}

void add_embedding(CLI::App* cmd, Options& o) {
  cmd->add_option("--fusion", o.fusion)->check(CLI::IsMember({"concat", "sum", "mean"}))
      ->capture_default_str();
  cmd->add_option("--mode", o.mode)->check(CLI::IsMember({"shared", "specific", "both"}))
      ->capture_default_str();
}

void add_standardize(CLI::App* cmd, Options& o) {
  cmd->add_option("--standardize", o.standardize)->check(CLI::IsMember({"none", "zscore"}))
      ->capture_default_str();
}

EmbeddingConfig embedding(const Options& o) {
  EmbeddingConfig cfg;
  cfg.fusion = kFusion.at(o.fusion);
  cfg.mode = kMode.at(o.mode);
  return cfg;
}

/// Bundle with the model's standardization applied to every pixel.
DatasetBundle prepared_bundle(const fs::path& path, const StoredModel& stored) {
  DatasetBundle b = load_bundle(path);
  if (b.modalities.size() != stored.model.num_modalities()) {
    fail(ErrorCode::Dimension, "bundle has " + std::to_string(b.modalities.size()) +
                                   " modalities, model expects " +
                                   std::to_string(stored.model.num_modalities()));
  }
  for (std::size_t k = 0; k < b.modalities.size(); ++k) {
    if (b.modalities[k].channels() != stored.model.channels(k)) {
      fail(ErrorCode::Dimension, "modality " + std::to_string(k + 1) + " has " +
                                     std::to_string(b.modalities[k].channels()) +
                                     " channels, model expects " +
                                     std::to_string(stored.model.channels(k)));
    }
    if (stored.standardization == Standardization::PerBandZScore) {
      b.modalities[k].data = apply_statistics(b.modalities[k].data, stored.stats, k);
    }
  }
  return b;
}

std::vector<const Matrix*> block_pointers(const std::vector<Matrix>& blocks) {
  std::vector<const Matrix*> out;
  for (const auto& b : blocks) out.push_back(&b);
  return out;
}

std::vector<Matrix> gather(const DatasetBundle& b, const std::vector<Eigen::Index>& px) {
  std::vector<Matrix> out;
  for (const auto& m : b.modalities) out.push_back(gather_columns(m.data, px));
  return out;
}

// ---- commands -------------------------------------------------------------

void cmd_synth(const Options& o) {
  save_bundle(make_synthetic(o.synth), o.out);
  log(LogLevel::Info, "wrote synthetic bundle to " + o.out.string());
}

void cmd_fit(const Options& o) {
  const DatasetBundle raw = load_bundle(o.bundle);
  Eigen::Index total = 0;
  for (const auto& m : raw.modalities) total += m.channels();
  o.hp.validate(total);

  const auto mode = kStandardize.at(o.standardize);
  const Standardized st = standardize(raw, mode);
  const TrainingStack stack = stack_from_mask(st.bundle, st.bundle.train_mask);
  if (st.stats.any_degenerate()) log(LogLevel::Info, "some bands are constant on training pixels");
  log(LogLevel::Info, "fitting " + std::to_string(stack.num_samples()) + " samples, " +
                          std::to_string(stack.num_modalities()) + " modalities");

  ensure_directory(o.model);
  auto csv = open_out(o.model / "convergence.csv");
  csv << "iter,objective,rel_delta,res_H,res_G\n";
  const auto result = fit(stack, o.hp, [&](const OuterRecord& r) {
    csv << r.iteration << ',' << num(r.objective) << ','
        << (std::isnan(r.relative_delta) ? std::string("nan") : num(r.relative_delta)) << ','
        << num(r.residual_h) << ',' << num(r.residual_g) << '\n';
    log(LogLevel::Info, "iter " + std::to_string(r.iteration) + " E=" + num(r.objective));
  });
  if (log_level() == LogLevel::Debug) {
    for (const auto& rec : result.trace.admm) {
      log(LogLevel::Debug,
          "outer " + std::to_string(rec.outer_iteration) + " target " +
              std::to_string(rec.target) + " admm " + std::to_string(rec.iterations) +
              (rec.terminated_by == Termination::Tolerance ? " converged" : " capped") +
              (rec.accepted ? "" : " rejected"));
    }
  }

  StoredModel stored;
  stored.model = result.model;
  stored.params = o.hp;
  stored.standardization = mode;
  stored.stats = st.stats;
  stored.num_classes = raw.num_classes();
  for (const auto& m : raw.modalities) stored.modality_names.push_back(m.name);
  save_model(stored, o.model);
  log(LogLevel::Info, std::string("fit ") +
                          (result.trace.terminated_by == Termination::Tolerance
                               ? "converged"
                               : "stopped at max-outer") +
                          " after " + std::to_string(result.trace.outer_objectives.size()) +
                          " iterations");
}

void cmd_transform(const Options& o) {
  const StoredModel stored = load_model(o.model);
  const DatasetBundle b = prepared_bundle(o.bundle, stored);
  std::vector<Eigen::Index> px;
  if (o.mask == "all") {
    for (Eigen::Index i = 0; i < b.num_pixels(); ++i) px.push_back(i);
  } else {
    px = masked_pixels(o.mask == "train" ? b.train_mask : b.test_mask);
  }
  const auto data = gather(b, px);
  const Matrix F = embed(stored.model, block_pointers(data), embedding(o));
  auto out = open_out(o.out);
  out << "pixel";
  for (Eigen::Index r = 0; r < F.rows(); ++r) out << ",f" << r + 1;
  out << '\n';
  for (std::size_t j = 0; j < px.size(); ++j) {
    out << px[j];
    for (Eigen::Index r = 0; r < F.rows(); ++r) out << ',' << num(F(r, static_cast<Eigen::Index>(j)));
    out << '\n';
  }
}

void cmd_classify(const Options& o) {
  const StoredModel stored = load_model(o.model);
  const DatasetBundle b = prepared_bundle(o.bundle, stored);
  const auto cfg = embedding(o);
  const TrainingStack train = stack_from_mask(b, b.train_mask);
  std::vector<int> train_labels(train.labels());
  for (auto& l : train_labels) ++l;

  auto predict = [&](const std::vector<Eigen::Index>& px) {
    if (px.empty()) return std::vector<int>{};
    const auto data = gather(b, px);
    if (o.cml_modality > 0) {
      const auto k = static_cast<std::size_t>(o.cml_modality - 1);
      if (k >= data.size()) {
        fail(ErrorCode::Validation, "--cml-modality out of range 1.." + std::to_string(data.size()));
      }
      return cml_predict(stored.model, train, data[k], k, cfg);
    }
    std::vector<const Matrix*> tr;
    for (const auto& blk : train.blocks()) tr.push_back(&blk.data);
    return nn_classify(embed(stored.model, tr, cfg), train_labels,
                       embed(stored.model, block_pointers(data), cfg));
  };

  const auto test_px = masked_pixels(b.test_mask);
  const auto pred = predict(test_px);
  ensure_directory(o.out);
  auto csv = open_out(o.out / "predictions.csv");
  csv << "pixel,prediction\n";
  for (std::size_t i = 0; i < test_px.size(); ++i) csv << test_px[i] << ',' << pred[i] << '\n';

  if (o.map) {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(b.num_pixels()));
    for (Eigen::Index i = 0; i < b.num_pixels(); ++i) all[static_cast<std::size_t>(i)] = i;
    const auto full = predict(all);
    std::vector<std::uint32_t> grid(full.begin(), full.end());
    write_class_map(grid, b.height, b.width, o.out / "map.pgm", b.class_names);
  }
  log(LogLevel::Info, "classified " + std::to_string(test_px.size()) + " test pixels");
}

/// pixel,label CSV with a header row.
std::map<long long, int> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::map<long long, int> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      std::size_t used = 0;
      const long long pixel = std::stoll(line.substr(0, comma), &used);
      if (used != comma) throw std::invalid_argument("pixel");
      const std::string rest = line.substr(comma + 1);
      const int label = std::stoi(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("label");
      if (!out.emplace(pixel, label).second) {
        fail(ErrorCode::Validation, path.string() + ": duplicate pixel " + std::to_string(pixel));
      }
    } catch (const std::logic_error&) {
      if (row == 1) continue;  // header
      fail(ErrorCode::Format, path.string() + ": row " + std::to_string(row) +
                                  ": expected pixel,label");
    }
  }
  return out;
}

void cmd_evaluate(const Options& o) {
  const auto pred = read_labels(o.predictions);
  std::map<long long, int> ref;
  int classes = o.classes;
  if (!o.reference.empty()) {
    ref = read_labels(o.reference);
  } else if (!o.bundle.empty()) {
    const DatasetBundle b = load_bundle(o.bundle);
    for (Eigen::Index i = 0; i < b.num_pixels(); ++i) {
      if (b.test_mask[i] != 0) ref.emplace(i, static_cast<int>(b.test_mask[i]));
    }
    if (classes == 0) classes = b.num_classes();
  } else {
    fail(ErrorCode::Validation, "evaluate needs --reference or --bundle");
  }
  std::vector<int> p, r;
  for (const auto& [pixel, label] : ref) {
    const auto it = pred.find(pixel);
    if (it == pred.end()) {
      fail(ErrorCode::Validation, "no prediction for reference pixel " + std::to_string(pixel));
    }
    p.push_back(it->second);
    r.push_back(label);
  }
  if (classes == 0) {
    for (int v : p) classes = std::max(classes, v);
    for (int v : r) classes = std::max(classes, v);
  }
  const EvalReport rep = evaluate(p, r, classes);

  std::ostringstream text;
  text << "OA=" << fixed6(rep.oa) << "\nAA=" << fixed6(rep.aa) << "\nkappa=" << fixed6(rep.kappa)
       << "\nsamples=" << r.size() << "\nclasses=" << classes << '\n';
  for (int c = 0; c < classes; ++c) {
    text << "class." << c + 1 << ".accuracy=" << fixed6(rep.per_class_accuracy[c]) << '\n';
  }
  text << "excluded_classes=";
  for (std::size_t i = 0; i < rep.excluded_classes.size(); ++i) {
    text << (i ? ";" : "") << rep.excluded_classes[i];
  }
  text << "\nkappa_degenerate=" << (rep.kappa_degenerate ? 1 : 0) << '\n';

  ensure_directory(o.out);
  open_out(o.out / "report.txt") << text.str();
  auto conf = open_out(o.out / "confusion.csv");
  conf << "reference";
  for (int c = 0; c < classes; ++c) conf << ",pred_" << c + 1;
  conf << '\n';
  for (int i = 0; i < classes; ++i) {
    conf << i + 1;
    for (int j = 0; j < classes; ++j) conf << ',' << rep.confusion(i, j);
    conf << '\n';
  }
  if (log_level() != LogLevel::Quiet) std::cout << text.str();
}

void cmd_cv(const Options& o) {
  const DatasetBundle raw = load_bundle(o.bundle);
  const Standardized st = standardize(raw, kStandardize.at(o.standardize));
  const TrainingStack stack = stack_from_mask(st.bundle, st.bundle.train_mask);

  CvGrid grid = CvGrid::defaults();
  if (!o.grid_q.empty()) grid.q = o.grid_q;
  if (!o.grid_sigma.empty()) grid.sigma = o.grid_sigma;
  if (!o.grid_alpha.empty()) grid.alpha = o.grid_alpha;
  if (!o.grid_beta.empty()) grid.beta = o.grid_beta;
  if (!o.grid_ds.empty()) grid.subspace_dim = o.grid_ds;
  log(LogLevel::Info, "cross-validating " + std::to_string(grid.size()) + " grid points, " +
                          std::to_string(o.folds) + " folds");

  const CvResult res = cross_validate(stack, grid, o.hp, o.folds, embedding(o));

  ensure_directory(o.out);
  auto csv = open_out(o.out / "cv_report.csv");
  csv << "ds,alpha,beta,sigma,q,mean_oa,skipped";
  for (int f = 0; f < o.folds; ++f) csv << ",fold_" << f + 1;
  csv << '\n';
  for (const auto& pt : res.points) {
    const auto& h = pt.params;
    csv << h.subspace_dim << ',' << num(h.alpha) << ',' << num(h.beta) << ',' << num(h.sigma)
        << ',' << h.q << ',' << (pt.skipped ? std::string("nan") : num(pt.mean_oa)) << ','
        << (pt.skipped ? 1 : 0);
    for (int f = 0; f < o.folds; ++f) {
      csv << ',' << (pt.skipped ? std::string("nan") : num(pt.fold_oa[f]));
    }
    csv << '\n';
  }
  const auto& best = res.points[res.best];
  std::ostringstream text;
  text << "ds=" << best.params.subspace_dim << "\nalpha=" << num(best.params.alpha)
       << "\nbeta=" << num(best.params.beta) << "\nsigma=" << num(best.params.sigma)
       << "\nq=" << best.params.q << "\nmean_oa=" << fixed6(best.mean_oa) << '\n';
  open_out(o.out / "best.txt") << text.str();
  if (log_level() != LogLevel::Quiet) std::cout << text.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"S2FL shared and specific subspace learning for multimodal data"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "generate a synthetic multimodal bundle");
  synth->add_option("--out", o.out, "bundle directory")->required();
  synth->add_option("--seed", o.synth.seed)->capture_default_str();
  synth->add_option("--classes", o.synth.num_classes)->capture_default_str();
  synth->add_option("--channels", o.synth.channels, "channels per modality, e.g. 12,6")
      ->delimiter(',');
  synth->add_option("--train-per-class", o.synth.train_per_class)->capture_default_str();
  synth->add_option("--test-per-class", o.synth.test_per_class)->capture_default_str();
  synth->add_option("--separation", o.synth.separation)->capture_default_str();
  synth->add_option("--noise", o.synth.noise)->capture_default_str();
  synth->add_option("--shared-fraction", o.synth.shared_fraction)->capture_default_str();

  auto* fitc = app.add_subcommand("fit", "learn projections on the bundle's training pixels");
  fitc->add_option("--bundle", o.bundle)->required();
  fitc->add_option("--model", o.model, "output model directory")->required();
  add_hyperparams(fitc, o);
  add_standardize(fitc, o);

  auto* transform = app.add_subcommand("transform", "write embedded features as CSV");
  transform->add_option("--bundle", o.bundle)->required();
  transform->add_option("--model", o.model)->required();
  transform->add_option("--out", o.out, "features CSV")->required();
  transform->add_option("--mask", o.mask)->check(CLI::IsMember({"train", "test", "all"}))
      ->capture_default_str();
  add_embedding(transform, o);

  auto* classify = app.add_subcommand("classify", "1-NN prediction of the test pixels");
  classify->add_option("--bundle", o.bundle)->required();
  classify->add_option("--model", o.model)->required();
  classify->add_option("--out", o.out, "output directory")->required();
  classify->add_option("--cml-modality", o.cml_modality,
                       "test with this modality only (1-based)");
  classify->add_flag("--map", o.map, "also classify every pixel and write map.pgm");
  add_embedding(classify, o);

  auto* evaluate_c = app.add_subcommand("evaluate", "OA, AA, kappa and confusion matrix");
  evaluate_c->add_option("--predictions", o.predictions, "pixel,label CSV")->required();
  evaluate_c->add_option("--reference", o.reference, "pixel,label CSV");
  evaluate_c->add_option("--bundle", o.bundle, "use the bundle's test mask as reference");
  evaluate_c->add_option("--classes", o.classes, "class count (default: inferred)");
  evaluate_c->add_option("--out", o.out, "output directory")->required();

  auto* cv = app.add_subcommand("cv", "grid search with stratified k-fold cross-validation");
  cv->add_option("--bundle", o.bundle)->required();
  cv->add_option("--out", o.out, "output directory")->required();
  cv->add_option("--folds", o.folds)->capture_default_str()->check(CLI::Range(2, 1000));
  cv->add_option("--grid-q", o.grid_q)->delimiter(',');
  cv->add_option("--grid-sigma", o.grid_sigma)->delimiter(',');
  cv->add_option("--grid-alpha", o.grid_alpha)->delimiter(',');
  cv->add_option("--grid-beta", o.grid_beta)->delimiter(',');
  cv->add_option("--grid-ds", o.grid_ds)->delimiter(',');
  add_hyperparams(cv, o);
  add_embedding(cv, o);
  add_standardize(cv, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0) {
      std::cerr << "S2FL-ERR:USAGE: " << e.what() << '\n';
      return 64;
    }
    return app.exit(e);
  }

  try {
    if (*synth) cmd_synth(o);
    if (*fitc) cmd_fit(o);
    if (*transform) cmd_transform(o);
    if (*classify) cmd_classify(o);
    if (*evaluate_c) cmd_evaluate(o);
    if (*cv) cmd_cv(o);
  } catch (const Error& e) {
    std::cerr << "S2FL-ERR:" << code_name(e.code()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "S2FL-ERR:INTERNAL: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
