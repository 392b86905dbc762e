#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("s2fl_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Run {
  int status;
  std::string err;
};

Run run(const std::string& args) {
  const auto err = workdir() / "stderr.txt";
  const std::string cmd = "cd '" + workdir().string() + "' && S2FL_LOG=quiet '" +
                          std::string(S2FL_CLI_PATH) + "' " + args + " 2> '" + err.string() +
                          "'";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(err);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1,
          {std::istreambuf_iterator<char>(in), {}}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(workdir() / p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void require_bundle() {
  static bool done = false;
  if (done) return;
  REQUIRE(run("synth --out bundle --seed 7 --train-per-class 30 --test-per-class 20").status == 0);
  done = true;
}

const char* kFit = "--ds 4 --sigma 3 --max-outer 30";

}  // namespace

TEST_CASE("fit, transform, classify, evaluate end to end") {
  require_bundle();
  REQUIRE(run(std::string("fit --bundle bundle --model model ") + kFit).status == 0);
  for (auto f : {"manifest.txt", "theta0.f64", "theta_1.f64", "theta_2.f64", "P.f64",
                 "convergence.csv", "mean_1.f64", "scale_2.f64"}) {
    CHECK(fs::exists(workdir() / "model" / f));
  }
  const auto conv = slurp("model/convergence.csv");
  CHECK(conv.rfind("iter,objective,rel_delta,res_H,res_G\n1,", 0) == 0);
  CHECK(slurp("model/manifest.txt").rfind("magic=S2FLv1\nkind=model\n", 0) == 0);

  CHECK(run("transform --bundle bundle --model model --out feats.csv --mode shared").status == 0);
  CHECK(slurp("feats.csv").rfind("pixel,f1,f2,f3,f4,f5,f6,f7,f8\n", 0) == 0);

  REQUIRE(run("classify --bundle bundle --model model --out cls --map").status == 0);
  CHECK(slurp("cls/predictions.csv").rfind("pixel,prediction\n", 0) == 0);
  CHECK(slurp("cls/map.pgm").rfind("P5\n50 5\n255\n", 0) == 0);
  CHECK(fs::exists(workdir() / "cls/map.legend.txt"));

  REQUIRE(run("evaluate --predictions cls/predictions.csv --bundle bundle --out ev").status == 0);
  const auto report = slurp("ev/report.txt");
  CHECK(report.rfind("OA=", 0) == 0);
  CHECK(report.find("\nkappa=") != std::string::npos);
  CHECK(slurp("ev/confusion.csv").rfind("reference,pred_1,pred_2,pred_3,pred_4,pred_5\n", 0) == 0);

  CHECK(run("classify --bundle bundle --model model --out cml --cml-modality 2").status == 0);
  CHECK(run("classify --bundle bundle --model model --out cml --cml-modality 3").status == 2);
}

TEST_CASE("fit is byte-for-byte deterministic") {
  require_bundle();
  REQUIRE(run(std::string("fit --bundle bundle --model a ") + kFit).status == 0);
  REQUIRE(run(std::string("fit --bundle bundle --model b ") + kFit).status == 0);
  for (auto f : {"manifest.txt", "theta0.f64", "theta_1.f64", "theta_2.f64", "P.f64",
                 "convergence.csv"}) {
    CHECK(slurp(fs::path("a") / f) == slurp(fs::path("b") / f));
  }
}

TEST_CASE("subspace larger than the channel count") {
  require_bundle();
  const auto r = run("fit --bundle bundle --model bad --ds 19");
  CHECK(r.status != 0);
  CHECK(r.err.rfind("S2FL-ERR:INVALID_DS:", 0) == 0);
}

TEST_CASE("evaluate identical predictions and reference") {
  std::ofstream(workdir() / "same.csv") << "pixel,label\n0,1\n1,2\n5,2\n9,3\n";
  REQUIRE(run("evaluate --predictions same.csv --reference same.csv --out same").status == 0);
  const auto report = slurp("same/report.txt");
  CHECK(report.rfind("OA=1.000000\nAA=1.000000\nkappa=1.000000\n", 0) == 0);
}

TEST_CASE("errors carry a machine-parsable prefix") {
  auto r = run("fit --bundle missing --model x");
  CHECK(r.status != 0);
  CHECK(r.err.rfind("S2FL-ERR:IO:", 0) == 0);

  fs::create_directories(workdir() / "junk");
  std::ofstream(workdir() / "junk/manifest.txt") << "magic=NOPE\n";
  r = run("fit --bundle junk --model x");
  CHECK(r.err.rfind("S2FL-ERR:FORMAT:", 0) == 0);

  r = run("classify --bundle bundle --model model --out x --fusion product");
  CHECK(r.status != 0);
  CHECK(r.err.rfind("S2FL-ERR:USAGE:", 0) == 0);
}

TEST_CASE("cross-validation command") {
  require_bundle();
  auto r = run("cv --bundle bundle --out cv1 --folds 3 --grid-ds 4 --grid-q 10 --grid-sigma 3 "
               "--grid-alpha 1 --grid-beta 0.1 --max-admm 2000");
  REQUIRE(r.status == 0);
  const auto report = slurp("cv1/cv_report.csv");
  CHECK(report.rfind("ds,alpha,beta,sigma,q,mean_oa,skipped,fold_1,fold_2,fold_3\n4,1,0.1,3,10,", 0) == 0);
  CHECK(std::count(report.begin(), report.end(), '\n') == 2);
  CHECK(slurp("cv1/best.txt").rfind("ds=4\nalpha=1\nbeta=0.1\nsigma=3\nq=10\n", 0) == 0);

  r = run("cv --bundle bundle --out cv2 --folds 31 --grid-ds 4 --grid-q 10 --grid-sigma 3 "
          "--grid-alpha 1 --grid-beta 0.1");
  CHECK(r.err.rfind("S2FL-ERR:VALIDATION:", 0) == 0);
  CHECK(r.err.find("smaller --folds") != std::string::npos);
}

TEST_CASE("cleanup") { fs::remove_all(workdir()); }
