#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "durations/mc_engine.hpp"
#include "durations/stats.hpp"

using namespace durations;
namespace fs = std::filesystem;

namespace {

const TrialDesign kDesign = TrialDesign::default_design();

std::vector<ReplicateResult> repeat_results(
    const std::vector<std::pair<int, int>>& counted) {
  std::vector<ReplicateResult> out;
  for (const auto& [rec, count] : counted) {
    for (int i = 0; i < count; ++i) {
      out.push_back({rec != 0, rec});
    }
  }
  return out;
}

fs::path fresh_dir(const char* tag) {
  const fs::path dir = fs::temp_directory_path() /
                       (std::string("durations_mc_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cell metrics split partial, full and type-1 mass") {
  // Scenario 1, risk-diff 0.10: days 12 and 13 sit below the threshold,
  // 14 is the shortest acceptable whole day.
  const auto results =
      repeat_results({{14, 60}, {13, 20}, {12, 20}});
  const CellMetrics m = compute_metrics(1, Method::conf_bands,
                                        RiskDifference{0.10}, kDesign, results);
  CHECK(m.reps == 100);
  CHECK(m.failures == 0);
  CHECK(m.partial_power == doctest::Approx(60.0).epsilon(1e-12));
  CHECK(m.full_power == doctest::Approx(60.0).epsilon(1e-12));
  CHECK(m.type1 == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(m.true_min_duration == doctest::Approx(13.0909).epsilon(5e-5));
  CHECK(m.rec_min == 12);
  CHECK(m.rec_p2_5 == 12);
  CHECK(m.rec_median == 14);

  const auto [lo, hi] = wald_ci(0.4, 100);
  CHECK(m.type1_ci_lo == doctest::Approx(100 * lo).epsilon(1e-10));
  CHECK(m.type1_ci_hi == doctest::Approx(100 * hi).epsilon(1e-10));
}

TEST_CASE("the published interval string falls out of the Wald arithmetic") {
  const auto results = repeat_results({{14, 952}, {13, 48}});
  const CellMetrics m = compute_metrics(1, Method::boot_duration,
                                        RiskDifference{0.10}, kDesign, results);
  CHECK(m.type1 == doctest::Approx(4.8).epsilon(1e-12));
  char buf[32];
  std::snprintf(buf, sizeof buf, "(%.1f,%.1f)", m.type1_ci_lo, m.type1_ci_hi);
  CHECK(std::string(buf) == "(3.5,6.1)");
}

TEST_CASE("failures stay out of every denominator") {
  std::vector<ReplicateResult> results = repeat_results({{14, 50}});
  for (int i = 0; i < 50; ++i) results.push_back({false, 0});
  const CellMetrics m = compute_metrics(1, Method::conf_bands,
                                        RiskDifference{0.10}, kDesign, results);
  CHECK(m.reps == 100);
  CHECK(m.failures == 50);
  CHECK(m.partial_power == doctest::Approx(100.0));
  CHECK(m.full_power == doctest::Approx(100.0));
  CHECK(m.type1 == doctest::Approx(0.0));
  CHECK(m.type1_ci_lo == 0.0);
  CHECK(m.type1_ci_hi == 0.0);
}

TEST_CASE("recommendation quantiles use the histogram convention") {
  const auto results = repeat_results({{8, 3}, {9, 5}, {20, 2}});
  const CellMetrics m = compute_metrics(4, Method::conf_bands,
                                        RiskDifference{0.10}, kDesign, results);
  CHECK(m.rec_min == 8);
  CHECK(m.rec_p2_5 == 8);
  CHECK(m.rec_median == 9);
  CHECK(m.partial_power == doctest::Approx(100.0));
  CHECK(m.full_power == doctest::Approx(30.0));
}

TEST_CASE("an all-failed cell reports NaN rates") {
  std::vector<ReplicateResult> results(5, ReplicateResult{false, 0});
  const CellMetrics m = compute_metrics(1, Method::conf_bands,
                                        RiskDifference{0.10}, kDesign, results);
  CHECK(m.failures == 5);
  CHECK(std::isnan(m.partial_power));
  CHECK(std::isnan(m.full_power));
  CHECK(std::isnan(m.type1));

  SimulationConfig cfg;
  cfg.scenarios = {1};
  cfg.methods = {Method::conf_bands};
  SimulationSummary summary;
  summary.config = cfg;
  summary.cells = {m};
  CHECK(all_cells_failed(summary));

  summary.cells.push_back(compute_metrics(1, Method::conf_bands,
                                          RiskDifference{0.10}, kDesign,
                                          repeat_results({{14, 3}})));
  CHECK_FALSE(all_cells_failed(summary));
}

TEST_CASE("gradient cells without an integer optimum have no full power") {
  const auto results = repeat_results({{20, 5}});
  const CellMetrics m = compute_metrics(14, Method::gradient_point,
                                        MaxGradient{0.02}, kDesign, results);
  CHECK(std::isnan(m.full_power));
  CHECK(m.partial_power == doctest::Approx(0.0));  // 20 is not acceptable
  CHECK(m.type1 == doctest::Approx(100.0));
}

TEST_CASE("simulation cells are scenario-major and reproducible") {
  SimulationConfig cfg;
  cfg.seed = 77;
  cfg.scenarios = {1, 4};
  cfg.methods = {Method::conf_bands, Method::boot_duration};
  cfg.target = RiskDifference{0.10};
  cfg.reps = 6;
  cfg.workers = 1;
  cfg.method.bootstrap.m = 15;

  const SimulationSummary a = run_simulation(cfg);
  REQUIRE(a.cells.size() == 4);
  CHECK(a.cells[0].scenario == 1);
  CHECK(a.cells[0].method == Method::conf_bands);
  CHECK(a.cells[1].scenario == 1);
  CHECK(a.cells[1].method == Method::boot_duration);
  CHECK(a.cells[2].scenario == 4);
  CHECK(a.cells[2].method == Method::conf_bands);
  CHECK(a.cells[3].scenario == 4);
  CHECK(a.cells[3].method == Method::boot_duration);
  for (const CellMetrics& cell : a.cells) {
    CHECK(cell.reps == 6);
    CHECK(cell.failures == 0);
  }

  const SimulationSummary b = run_simulation(cfg);
  CHECK(a.config_hash == b.config_hash);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].partial_power == b.cells[i].partial_power);
    CHECK(a.cells[i].rec_median == b.cells[i].rec_median);
  }

  SimulationConfig other = cfg;
  other.seed = 78;
  CHECK(compute_config_hash(other) != a.config_hash);
}

TEST_CASE("worker count changes nothing but the wall clock") {
  SimulationConfig cfg;
  cfg.seed = 99;
  cfg.scenarios = {2, 9};
  cfg.methods = {Method::conf_bands, Method::delta};
  cfg.target = RiskDifference{0.10};
  cfg.reps = 8;
  cfg.workers = 1;

  const SimulationSummary serial = run_simulation(cfg);
  cfg.workers = 3;
  const SimulationSummary threaded = run_simulation(cfg);

  CHECK(serial.config_hash == threaded.config_hash);
  REQUIRE(serial.cells.size() == threaded.cells.size());
  for (std::size_t i = 0; i < serial.cells.size(); ++i) {
    CHECK(serial.cells[i].partial_power == threaded.cells[i].partial_power);
    CHECK(serial.cells[i].full_power == threaded.cells[i].full_power);
    CHECK(serial.cells[i].type1 == threaded.cells[i].type1);
    CHECK(serial.cells[i].rec_min == threaded.cells[i].rec_min);
    CHECK(serial.cells[i].rec_p2_5 == threaded.cells[i].rec_p2_5);
    CHECK(serial.cells[i].rec_median == threaded.cells[i].rec_median);
  }

  const fs::path da = fresh_dir("workers_a");
  const fs::path db = fresh_dir("workers_b");
  write_summary_csv(serial, (da / "summary.csv").string());
  write_summary_csv(threaded, (db / "summary.csv").string());
  CHECK(slurp(da / "summary.csv") == slurp(db / "summary.csv"));
}

TEST_CASE("replicate datasets do not depend on the method list") {
  SimulationConfig combined;
  combined.seed = 55;
  combined.scenarios = {3};
  combined.methods = {Method::conf_bands, Method::delta};
  combined.target = RiskDifference{0.10};
  combined.reps = 10;
  combined.workers = 1;
  const SimulationSummary both = run_simulation(combined);

  SimulationConfig solo = combined;
  solo.methods = {Method::delta};
  const SimulationSummary only = run_simulation(solo);

  REQUIRE(both.cells.size() == 2);
  REQUIRE(only.cells.size() == 1);
  CHECK(both.cells[1].partial_power == only.cells[0].partial_power);
  CHECK(both.cells[1].full_power == only.cells[0].full_power);
  CHECK(both.cells[1].type1 == only.cells[0].type1);
  CHECK(both.cells[1].rec_min == only.cells[0].rec_min);
  CHECK(both.cells[1].rec_median == only.cells[0].rec_median);
}

TEST_CASE("the config hash ignores execution details") {
  SimulationConfig cfg;
  cfg.scenarios = {1};
  cfg.methods = {Method::conf_bands};
  cfg.reps = 5;

  cfg.workers = 0;
  const std::string h0 = compute_config_hash(cfg);
  cfg.workers = 4;
  CHECK(compute_config_hash(cfg) == h0);

  const std::string canon = canonical_config_json(cfg);
  CHECK(canon.find("workers") == std::string::npos);
  CHECK(canon.find("\"out\"") == std::string::npos);
  CHECK(canon.find("\"seed\"") != std::string::npos);
  CHECK(canon.find("\"bootstrap\"") != std::string::npos);

  cfg.method.bootstrap.m = 123;
  CHECK(compute_config_hash(cfg) != h0);
  CHECK(h0.size() == 16);
}

TEST_CASE("bad simulation configs are rejected up front") {
  SimulationConfig cfg;
  cfg.scenarios = {1};
  cfg.methods = {Method::conf_bands};

  SimulationConfig no_reps = cfg;
  no_reps.reps = 0;
  CHECK_THROWS_AS(run_simulation(no_reps), std::invalid_argument);

  SimulationConfig no_scen = cfg;
  no_scen.scenarios = {};
  CHECK_THROWS_AS(run_simulation(no_scen), std::invalid_argument);

  SimulationConfig bad_scen = cfg;
  bad_scen.scenarios = {17};
  CHECK_THROWS_AS(run_simulation(bad_scen), std::invalid_argument);

  SimulationConfig bad_method = cfg;
  bad_method.target = MaxGradient{0.02};
  CHECK_THROWS_AS(run_simulation(bad_method), std::invalid_argument);
}

TEST_CASE("summary files spell missing rates as nan and null") {
  SimulationConfig cfg;
  cfg.seed = 5;
  cfg.scenarios = {14};
  cfg.methods = {Method::gradient_point};
  cfg.target = MaxGradient{0.02};
  cfg.reps = 3;
  cfg.workers = 1;
  const SimulationSummary summary = run_simulation(cfg);
  REQUIRE(summary.cells.size() == 1);
  CHECK(std::isnan(summary.cells[0].full_power));

  const fs::path dir = fresh_dir("nan");
  write_summary_csv(summary, (dir / "summary.csv").string());
  write_summary_json(summary, (dir / "summary.json").string());
  write_config_json(cfg, (dir / "config.json").string());

  const std::string csv = slurp(dir / "summary.csv");
  CHECK(csv.find("scenario,method,target,reps,partial_power,full_power,type1,"
                 "type1_ci_lo,type1_ci_hi,true_min_duration,rec_min,rec_p2_5,"
                 "rec_median,seed,config_hash,version") == 0);
  CHECK(csv.find("nan") != std::string::npos);

  const nlohmann::json parsed = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(parsed.at("config_hash").get<std::string>() == summary.config_hash);
  CHECK(parsed.at("cells").at(0).at("full_power").is_null());
  CHECK(parsed.at("cells").at(0).at("scenario").get<int>() == 14);

  const nlohmann::json config = nlohmann::json::parse(slurp(dir / "config.json"));
  CHECK(config.at("seed").get<std::uint64_t>() == 5);
  CHECK_FALSE(config.contains("workers"));
}
