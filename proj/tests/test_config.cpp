#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "normscaler/harness.hpp"

using namespace normscaler;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal() {
  return json::parse(R"({
    "target": {"kind": "SingleSpike"},
    "design": {"mode": "Proportional", "kappa": 4},
    "selector": {"ExplicitP": [1.5]},
    "n_grid": [10, 20],
    "r_list": [1.0]
  })");
}

ErrorKind kind_of(const json& j) {
  try {
    sweep_config_from_json(j);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::SpecInvalid;
}

}  // namespace

TEST_CASE("minimal config gets defaults") {
  const auto cfg = sweep_config_from_json(minimal());
  CHECK(cfg.target.kind == TargetKind::SingleSpike);
  CHECK(cfg.design.mode == DesignSpec::Mode::Proportional);
  CHECK(cfg.design.kappa == 4.0);
  CHECK(cfg.seeds_per_cell == 1);
  CHECK(cfg.sigma_list == std::vector<double>{0.0});
  CHECK(cfg.n_grid == std::vector<int>{10, 20});
}

TEST_CASE("unknown keys are rejected at every level") {
  auto j = minimal();
  j["typo"] = 1;
  CHECK(kind_of(j) == ErrorKind::ConfigError);
  j = minimal();
  j["target"]["magnitude"] = 2;
  CHECK(kind_of(j) == ErrorKind::ConfigError);
  j = minimal();
  j["solver_opts"] = {{"tolerance", 1e-6}};
  CHECK(kind_of(j) == ErrorKind::ConfigError);
  j = minimal();
  j["dln_cfg"] = {{"epochs", 10}};
  CHECK(kind_of(j) == ErrorKind::ConfigError);
  j = minimal();
  j["selector"] = {{"DlnAlpha", {{{"alpha", 0.1}, {"lr", 0.01}, {"beta", 1}}}}};
  CHECK(kind_of(j) == ErrorKind::ConfigError);
}

TEST_CASE("missing or malformed fields") {
  auto j = minimal();
  j.erase("r_list");
  CHECK(kind_of(j) == ErrorKind::ConfigError);
  j = minimal();
  j["design"] = {{"mode", "Proportional"}, {"kappa", 0.5}};
  CHECK(kind_of(j) == ErrorKind::ConfigError);
  j = minimal();
  j["selector"] = {{"ExplicitP", {1.5}}, {"DlnAlpha", json::array()}};
  CHECK(kind_of(j) == ErrorKind::ConfigError);
  j = minimal();
  j["n_grid"] = "many";
  CHECK(kind_of(j) == ErrorKind::ConfigError);
  j = minimal();
  j["target"]["kind"] = "Spiky";
  CHECK(kind_of(j) == ErrorKind::ConfigError);
  j = minimal();
  j["solver_opts"] = {{"line_search", "Newton"}};
  CHECK(kind_of(j) == ErrorKind::ConfigError);
}

TEST_CASE("aliases and structured fields") {
  auto j = minimal();
  j["target"] = {{"kind", "flat"}, {"s", 7}, {"signs", {{"Rademacher", 99}}}};
  j["n_grid"] = {{"lo", 20}, {"hi", 2000}, {"count", 12}};
  j["selector"] = {{"DlnAlpha", {{{"alpha", 0.00102}, {"lr", 0.1}}}}};
  const auto cfg = sweep_config_from_json(j);
  CHECK(cfg.target.kind == TargetKind::FlatSupport);
  CHECK(cfg.target.s == 7);
  CHECK(cfg.target.signs.rademacher);
  CHECK(cfg.target.signs.seed == 99);
  CHECK(cfg.n_grid == log_spaced_grid(20, 2000, 12));
  CHECK(cfg.selector.kind == Selector::Kind::DlnAlpha);
  CHECK(cfg.selector.dln_settings.at(0).alpha == 0.00102);

  j["target"] = {{"kind", "e1"}, {"s", 30}};
  CHECK(sweep_config_from_json(j).target.s == 1);
}

TEST_CASE("json round trip is a fixed point") {
  auto j = minimal();
  j["target"] = {{"kind", "FlatSupport"}, {"s", 5}, {"a", 0.3}};
  j["sigma_list"] = {0.0, 0.5};
  j["solver_opts"] = {{"line_search", "Backtracking"}, {"max_iters", 123}};
  j["dln_cfg"] = {{"max_epochs", 77}, {"grad_noise_std", 0.01}};
  const auto once = to_json(sweep_config_from_json(j));
  const auto twice = to_json(sweep_config_from_json(once));
  CHECK(once == twice);
  CHECK(once["solver_opts"]["max_iters"] == 123);
  CHECK(once["dln_cfg"]["max_epochs"] == 77);
  CHECK(once["target"]["a"] == 0.3);
}

TEST_CASE("loading from disk") {
  const fs::path dir = fs::temp_directory_path() / "normscaler_tests";
  fs::create_directories(dir);
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << "{ not json";
  try {
    load_sweep_config(bad.string());
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
  }
  try {
    load_sweep_config((dir / "missing.json").string());
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IoError);
  }
}

TEST_CASE("every shipped recipe parses") {
  const fs::path recipes = fs::path(NORMSCALER_SOURCE_DIR) / "recipes";
  int count = 0;
  for (const auto& entry : fs::directory_iterator(recipes)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    const auto cfg = load_sweep_config(entry.path().string());
    CHECK(cfg.experiment_id == entry.path().stem().string());
    CHECK_FALSE(cfg.output_path.empty());
    ++count;
  }
  CHECK(count >= 3);
}
