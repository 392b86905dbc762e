#include "s2fl/model_io.hpp"

#include <charconv>
#include <cstdio>

#include "s2fl/container.hpp"

namespace s2fl {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  // shortest representation that round-trips
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const Manifest& m, const std::string& key) {
  const std::string& s = m.get(key);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    fail(ErrorCode::Format, "model manifest: cannot parse " + key + "='" + s + "'");
  }
  return v;
}

fs::path indexed(const fs::path& dir, const char* stem, std::size_t k) {
  return dir / (std::string(stem) + "_" + std::to_string(k + 1) + ".f64");
}

}  // namespace

void save_model(const StoredModel& s, const fs::path& dir) {
  ensure_directory(dir);
  const auto& model = s.model;
  const std::size_t K = model.num_modalities();
  Manifest m;
  m.set("kind", "model");
  m.set("modalities", static_cast<long long>(K));
  for (std::size_t k = 0; k < K; ++k) {
    const auto prefix = "modality." + std::to_string(k + 1);
    m.set(prefix + ".name", k < s.modality_names.size() ? s.modality_names[k]
                                                         : "modality_" + std::to_string(k + 1));
    m.set(prefix + ".channels", static_cast<long long>(model.channels(k)));
  }
  m.set("classes", static_cast<long long>(s.num_classes));
  m.set("ds", static_cast<long long>(model.subspace_dim()));
  m.set("standardize", s.standardization == Standardization::PerBandZScore ? "zscore" : "none");
  const auto& hp = s.params;
  m.set("alpha", format_double(hp.alpha));
  m.set("beta", format_double(hp.beta));
  m.set("sigma", format_double(hp.sigma));
  m.set("q", static_cast<long long>(hp.q));
  m.set("max_outer", static_cast<long long>(hp.max_outer));
  m.set("max_admm", static_cast<long long>(hp.max_admm));
  m.set("zeta", format_double(hp.zeta));
  m.set("eps", format_double(hp.eps));
  m.set("seed", static_cast<long long>(hp.seed));
  m.write(dir / "manifest.txt");

  write_f64(dir / "theta0.f64", model.theta0);
  for (std::size_t k = 0; k < K; ++k) write_f64(indexed(dir, "theta", k), model.theta_k[k]);
  write_f64(dir / "P.f64", model.P);
  if (s.standardization == Standardization::PerBandZScore) {
    for (std::size_t k = 0; k < K; ++k) {
      write_f64(indexed(dir, "mean", k), s.stats.mean[k]);
      write_f64(indexed(dir, "scale", k), s.stats.scale[k]);
    }
  }
}

StoredModel load_model(const fs::path& dir) {
  const Manifest m = Manifest::read(dir / "manifest.txt");
  if (m.get("kind") != "model") {
    fail(ErrorCode::Format, (dir / "manifest.txt").string() + ": not a model directory");
  }
  StoredModel s;
  const auto K = m.get_int("modalities");
  const auto ds = m.get_int("ds");
  s.num_classes = static_cast<int>(m.get_int("classes"));
  if (K < 1 || ds < 1 || s.num_classes < 1) {
    fail(ErrorCode::Format, (dir / "manifest.txt").string() + ": bad model shape");
  }
  auto& model = s.model;
  model.offsets.push_back(0);
  for (long long k = 0; k < K; ++k) {
    const auto prefix = "modality." + std::to_string(k + 1);
    s.modality_names.push_back(m.get(prefix + ".name"));
    const auto d = m.get_int(prefix + ".channels");
    if (d < 1) fail(ErrorCode::Format, prefix + ".channels must be positive");
    model.offsets.push_back(model.offsets.back() + d);
  }
  model.theta0 = read_f64(dir / "theta0.f64", ds, model.offsets.back(), "theta0");
  for (std::size_t k = 0; k < static_cast<std::size_t>(K); ++k) {
    model.theta_k.push_back(read_f64(indexed(dir, "theta", k), ds, model.channels(k),
                                     "theta_" + std::to_string(k + 1)));
  }
  model.P = read_f64(dir / "P.f64", s.num_classes, ds, "P");

  auto& hp = s.params;
  hp.subspace_dim = static_cast<int>(ds);
  hp.alpha = parse_double(m, "alpha");
  hp.beta = parse_double(m, "beta");
  hp.sigma = parse_double(m, "sigma");
  hp.q = static_cast<int>(m.get_int("q"));
  hp.max_outer = static_cast<int>(m.get_int("max_outer"));
  hp.max_admm = static_cast<int>(m.get_int("max_admm"));
  hp.zeta = parse_double(m, "zeta");
  hp.eps = parse_double(m, "eps");
  hp.seed = static_cast<std::uint64_t>(m.get_int("seed"));

  const std::string mode = m.get("standardize");
  if (mode == "zscore") {
    s.standardization = Standardization::PerBandZScore;
    for (std::size_t k = 0; k < static_cast<std::size_t>(K); ++k) {
      const auto d = model.channels(k);
      s.stats.mean.push_back(read_f64(indexed(dir, "mean", k), d, 1, "mean").col(0));
      s.stats.scale.push_back(read_f64(indexed(dir, "scale", k), d, 1, "scale").col(0));
      s.stats.degenerate.emplace_back(static_cast<std::size_t>(d), false);
    }
  } else if (mode != "none") {
    fail(ErrorCode::Format, "model manifest: unknown standardize='" + mode + "'");
  }
  return s;
}

}  // namespace s2fl
