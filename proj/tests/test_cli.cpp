#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#include "adaptgd/experiment.hpp"

using namespace adaptgd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "adaptgd_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" + std::string(ADAPTGD_CLI) + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const Json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

Json quadratic_grid(const fs::path& out) {
  Json j = Json::parse(R"({
    "name": "grid",
    "problem": {"kind": "delta_quadratic", "params": {"delta": 0.01}},
    "methods": [
      {"type": "gd", "params": {"lambda": 1.0}},
      {"type": "adgd"},
      {"type": "nesterov"}
    ],
    "termination": {"grad_tol": 1e-8, "max_iter": 2000},
    "seeds": [3],
    "x0": "normal"
  })");
  j["output_dir"] = out.string();
  return j;
}

}  // namespace

TEST_CASE("config round trip and defaults") {
  const Json j = quadratic_grid("/tmp/unused");
  const ExperimentConfig c = ExperimentConfig::from_json(j);
  const ExperimentConfig again = ExperimentConfig::from_json(c.to_json());
  CHECK(c == again);
  CHECK(c.to_json() == again.to_json());
  CHECK(c.methods.size() == 3);
  CHECK(c.methods[1].label == "adgd");
  CHECK(c.methods[1].params["lambda0"] == 1e-10);
  CHECK(c.termination.max_iter == 2000);

  for (const auto& path : {"configs/quadratic_grid.json", "configs/logistic.json", "configs/factorization.json"}) {
    const fs::path p = fs::path(ADAPTGD_SOURCE_DIR) / path;
    CAPTURE(p.string());
    const ExperimentConfig loaded = ExperimentConfig::load(p.string());
    CHECK(ExperimentConfig::from_json(loaded.to_json()) == loaded);
  }
}

TEST_CASE("strict config parsing") {
  Json j = quadratic_grid("/tmp/unused");
  j["extra"] = 1;
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

  j = quadratic_grid("/tmp/unused");
  j["methods"][0]["params"]["lambdaa"] = 1.0;
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

  j = quadratic_grid("/tmp/unused");
  j["methods"][1]["type"] = "no_such_method";
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

  j = quadratic_grid("/tmp/unused");
  j["termination"]["max_iter"] = 0;
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

  j = quadratic_grid("/tmp/unused");
  j["methods"].push_back(Json{{"type", "adgd"}});
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

  j = quadratic_grid("/tmp/unused");
  j["problem"]["params"]["delta"] = "small";
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
}

TEST_CASE("run writes one trace per cell and a summary, deterministically") {
  const fs::path dir = scratch("grid");
  const fs::path out1 = dir / "a";
  const fs::path out2 = dir / "b";
  CHECK(cli("run \"" + write_config(dir, quadratic_grid(out1)).string() + "\"") == 0);
  const fs::path cfg2 = dir / "config2.json";
  std::ofstream(cfg2) << quadratic_grid(out2).dump();
  CHECK(cli("run \"" + cfg2.string() + "\"") == 0);

  for (const auto* stem : {"gd_seed3.csv", "adgd_seed3.csv", "nesterov_seed3.csv"}) {
    CAPTURE(stem);
    REQUIRE(fs::exists(out1 / stem));
    const std::string a = slurp(out1 / stem);
    CHECK(a.substr(0, a.find('\n')) == kCsvHeader);
    CHECK(a == slurp(out2 / stem));
  }
  REQUIRE(fs::exists(out1 / "summary.json"));
  const Json summary = Json::parse(slurp(out1 / "summary.json"));
  CHECK(summary["cells"].size() == 3);
  CHECK(summary["f_ref"] == 0.0);
  for (const auto& cell : summary["cells"]) CHECK(cell["status"] == "converged");
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  CHECK(cli("") == kExitConfig);
  CHECK(cli("run /nonexistent/config.json") == kExitConfig);

  Json bad = quadratic_grid(dir / "bad");
  bad["seeds"] = "zero";
  CHECK(cli("run \"" + write_config(dir, bad).string() + "\"") == kExitConfig);

  Json missing = quadratic_grid(dir / "missing");
  missing["problem"] = Json{{"kind", "logistic_libsvm"}, {"params", {{"path", "no_such_file"}}}};
  missing["methods"] = Json::array({Json{{"type", "adgd"}}});
  CHECK(cli("run \"" + write_config(dir, missing).string() + "\"", "ADAPTGD_DATA=/nonexistent") == kExitDataset);

  Json diverge = quadratic_grid(dir / "diverge");
  diverge["methods"] = Json::array({Json{{"type", "gd"}, {"params", {{"lambda", 3.0}}}, {"must_converge", true}}});
  CHECK(cli("run \"" + write_config(dir, diverge).string() + "\"") == kExitDiverged);

  CHECK(cli("verify") == kExitOk);
  CHECK(cli("plotdata \"" + (dir / "empty").string() + "\"") == kExitDataset);
}

TEST_CASE("plot data") {
  const fs::path dir = scratch("plot");
  const fs::path out = dir / "run";
  REQUIRE(cli("run \"" + write_config(dir, quadratic_grid(out)).string() + "\"") == 0);
  REQUIRE(cli("plotdata \"" + out.string() + "\"") == 0);
  const fs::path gap = out / "plot" / "adgd_seed3_gap.dat";
  const fs::path lam = out / "plot" / "adgd_seed3_lambda.dat";
  REQUIRE(fs::exists(gap));
  REQUIRE(fs::exists(lam));
  std::istringstream in(slurp(lam));
  int k = -1;
  double value = 0.0;
  int rows = 0;
  while (in >> k >> value) {
    CHECK(value > 0.0);
    ++rows;
  }
  CHECK(rows > 2);
  CHECK(fs::exists(out / "plot" / "gd_seed3_gap.dat"));
}

TEST_CASE("verify suite passes in process") {
  std::ostringstream out;
  CHECK(cmd_verify(out) == 0);
  CHECK(out.str().find("[FAIL]") == std::string::npos);
  CHECK(out.str().find("[PASS]") != std::string::npos);
}

TEST_CASE("adaptive steps vary widely on mushrooms") {
  const char* root = std::getenv(kDataEnv);
  if (!root || !fs::exists(fs::path(root) / "mushrooms")) {
    MESSAGE("mushrooms not found under ADAPTGD_DATA; skipped");
    return;
  }
  const fs::path dir = scratch("mushrooms");
  Json j = Json::parse(R"({
    "problem": {"kind": "logistic_libsvm", "params": {"path": "mushrooms"}},
    "methods": [{"type": "adgd"}],
    "termination": {"grad_tol": 1e-8, "max_iter": 1000}
  })");
  j["output_dir"] = (dir / "out").string();
  REQUIRE(cli("run \"" + write_config(dir, j).string() + "\"") == 0);
  std::istringstream csv(slurp(dir / "out" / "adgd_seed0.csv"));
  std::string line;
  std::getline(csv, line);
  double lo = kInf, hi = 0.0;
  while (std::getline(csv, line)) {
    std::stringstream row(line);
    std::string iter, f, g, lambda;
    std::getline(row, iter, ',');
    std::getline(row, f, ',');
    std::getline(row, g, ',');
    std::getline(row, lambda, ',');
    if (iter == "0" || lambda.empty()) continue;  // bootstrap step is lambda_0
    lo = std::min(lo, std::stod(lambda));
    hi = std::max(hi, std::stod(lambda));
  }
  CHECK(hi > 10.0 * lo);
}
