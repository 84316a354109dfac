#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "durations/analysis.hpp"
#include "durations/design.hpp"
#include "durations/inference.hpp"
#include "durations/mc_engine.hpp"
#include "durations/scenarios.hpp"
#include "durations/targets.hpp"
#include "durations/version.hpp"

namespace {

using durations::EstimationTarget;
using durations::Method;
using durations::MethodConfig;
using durations::TrialDesign;

std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

int parse_int(const std::string& text) {
  size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid integer '" + text + "'");
  }
  if (used != text.size()) {
    throw std::invalid_argument("invalid integer '" + text + "'");
  }
  return v;
}

double parse_double(const std::string& text) {
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid number '" + text + "'");
  }
  if (used != text.size()) {
    throw std::invalid_argument("invalid number '" + text + "'");
  }
  return v;
}

// "1,4,9-12" -> {1, 4, 9, 10, 11, 12}
std::vector<int> parse_scenario_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) {
      throw std::invalid_argument("empty entry in scenario list");
    }
    const size_t dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse_int(part));
    } else {
      const int lo = parse_int(trim(part.substr(0, dash)));
      const int hi = parse_int(trim(part.substr(dash + 1)));
      if (hi < lo) {
        throw std::invalid_argument("descending scenario range '" + part +
                                    "'");
      }
      for (int s = lo; s <= hi; ++s) out.push_back(s);
    }
  }
  if (out.empty()) throw std::invalid_argument("no scenarios given");
  return out;
}

std::vector<Method> parse_method_list(const std::string& text) {
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) throw std::invalid_argument("empty entry in method list");
    out.push_back(durations::parse_method(part));
  }
  if (out.empty()) throw std::invalid_argument("no methods given");
  return out;
}

std::vector<double> parse_arm_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) throw std::invalid_argument("empty entry in arm list");
    out.push_back(parse_double(part));
  }
  if (out.empty()) throw std::invalid_argument("no arms given");
  return out;
}

durations::FpAlgorithm parse_algorithm(const std::string& text) {
  if (text == "exact2") return durations::FpAlgorithm::exact2;
  if (text == "closed-test") return durations::FpAlgorithm::closed_test;
  throw std::invalid_argument(
      "unknown curve selection algorithm '" + text +
      "' (expected exact2 or closed-test)");
}

// Options shared by simulate and analyze.
struct FitFlags {
  std::string fp = "exact2";
  double sig_level = 0.05;
  double conf_level = 0.95;
  bool bands_eta = false;
  int boot_m = 500;
  std::string boot_interval = "bca";
  double boot_level = 0.95;
  int boot_retries = 5;
  int jackknife_groups = 50;

  void attach(CLI::App* cmd) {
    cmd->add_option("--fp", fp,
                    "Curve selection: exact2 or closed-test");
    cmd->add_option("--sig-level", sig_level,
                    "Closed-test significance threshold");
    cmd->add_option("--conf-level", conf_level,
                    "Band / difference CI coverage");
    cmd->add_flag("--bands-eta", bands_eta,
                  "Build bands on the linear predictor scale");
    cmd->add_option("--boot-m", boot_m, "Bootstrap resamples");
    cmd->add_option("--boot-interval", boot_interval,
                    "Bootstrap interval: bca or percentile");
    cmd->add_option("--boot-level", boot_level, "Bootstrap interval coverage");
    cmd->add_option("--boot-retries", boot_retries,
                    "Refit attempts per failed resample");
    cmd->add_option("--jackknife-groups", jackknife_groups,
                    "Deletion groups for the acceleration term");
  }

  MethodConfig to_config() const {
    MethodConfig cfg;
    cfg.algorithm = parse_algorithm(fp);
    cfg.sig_level = sig_level;
    cfg.conf_level = conf_level;
    cfg.bands_on_linear_predictor = bands_eta;
    cfg.bootstrap.m = boot_m;
    if (boot_interval != "bca" && boot_interval != "percentile") {
      throw std::invalid_argument("unknown bootstrap interval '" +
                                  boot_interval + "'");
    }
    cfg.bootstrap.interval = boot_interval;
    cfg.bootstrap.level = boot_level;
    cfg.bootstrap.max_retries = boot_retries;
    cfg.bootstrap.jackknife_groups = jackknife_groups;
    if (cfg.bootstrap.m < 1) {
      throw std::invalid_argument("bootstrap resamples must be positive");
    }
    return cfg;
  }
};

// Values in a --config JSON object become extra "--key value" arguments,
// except for keys already given on the command line, which win.
void inject_config_defaults(std::vector<std::string>& args) {
  size_t sub = args.size();
  for (size_t i = 0; i < args.size(); ++i) {
    if (!args[i].empty() && args[i][0] != '-') {
      sub = i;
      break;
    }
  }
  if (sub == args.size()) return;

  std::string path;
  for (size_t i = sub + 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 < args.size()) path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  if (path.empty()) return;

  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw std::invalid_argument("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) {
    throw std::invalid_argument("config file " + path +
                                " must hold a JSON object");
  }

  for (const auto& [key, value] : j.items()) {
    const std::string token = "--" + key;
    bool present = false;
    for (size_t i = sub + 1; i < args.size(); ++i) {
      if (args[i] == token || args[i].rfind(token + "=", 0) == 0) {
        present = true;
        break;
      }
    }
    if (present) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(token);
      continue;
    }
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array()) {
      for (size_t k = 0; k < value.size(); ++k) {
        if (k > 0) text += ',';
        text += value[k].is_string() ? value[k].get<std::string>()
                                     : value[k].dump();
      }
    } else {
      text = value.dump();
    }
    args.push_back(token);
    args.push_back(text);
  }
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

int run_simulate(const std::string& scenarios_text,
                 const std::string& methods_text,
                 const std::string& target_text, uint64_t seed, int reps,
                 int workers, const std::string& arms_text, int n_total,
                 const FitFlags& flags, const std::string& out_dir) {
  durations::SimulationConfig cfg;
  cfg.seed = seed;
  cfg.scenarios = parse_scenario_list(scenarios_text);
  cfg.methods = parse_method_list(methods_text);
  cfg.target = durations::parse_target(target_text);
  durations::validate_target(cfg.target);
  cfg.design = TrialDesign::make(parse_arm_list(arms_text), n_total);
  cfg.reps = reps;
  cfg.workers = workers;
  cfg.method = flags.to_config();

  const durations::SimulationSummary summary = durations::run_simulation(cfg);

  std::filesystem::create_directories(out_dir);
  const std::string csv_path = out_dir + "/summary.csv";
  const std::string json_path = out_dir + "/summary.json";
  const std::string config_path = out_dir + "/config.json";
  durations::write_summary_csv(summary, csv_path);
  durations::write_summary_json(summary, json_path);
  durations::write_config_json(cfg, config_path);

  std::printf("%-9s %-14s %6s %6s %9s %9s %8s %9s %8s\n", "scenario",
              "method", "reps", "fail", "partial", "full", "type1",
              "true_min", "rec_med");
  for (const durations::CellMetrics& c : summary.cells) {
    std::printf("%-9d %-14s %6d %6d %9.1f %9.1f %8.1f %9.2f %8d\n",
                c.scenario, durations::method_to_string(c.method).c_str(),
                c.reps, c.failures, c.partial_power, c.full_power, c.type1,
                c.true_min_duration, c.rec_median);
  }
  std::printf("wrote %s\nwrote %s\nwrote %s\n", csv_path.c_str(),
              json_path.c_str(), config_path.c_str());

  if (durations::all_cells_failed(summary)) {
    std::cerr << "error: every replicate in every cell failed to fit\n";
    return 3;
  }
  return 0;
}

int run_analyze(const std::string& data_path, const std::string& method_text,
                const std::string& target_text, uint64_t seed,
                double grid_step, bool lax, const FitFlags& flags,
                const std::string& out_dir) {
  durations::AnalysisOptions options;
  options.method = durations::parse_method(method_text);
  options.target = durations::parse_target(target_text);
  options.method_config = flags.to_config();
  options.seed = seed;
  options.grid_step = grid_step;

  durations::TrialDataset data;
  try {
    data = durations::read_dataset_csv(data_path, lax);
  } catch (const durations::CsvError& e) {
    std::cerr << "error: " << data_path << ": " << e.what() << "\n";
    return 2;
  }

  const durations::AnalysisReport report =
      durations::analyze_dataset(data, options);

  std::filesystem::create_directories(out_dir);
  const std::string report_path = out_dir + "/report.json";
  const std::string curve_path = out_dir + "/curve.csv";
  durations::write_report_json(report, report_path);
  durations::write_curve_csv(report, curve_path);

  std::printf("recommended_duration=%d\n", report.recommendation.recommended);
  std::printf("wrote %s\nwrote %s\n", report_path.c_str(), curve_path.c_str());
  return 0;
}

int run_scenarios(const std::string& emit, const std::string& scenarios_text,
                  const std::string& target_text, double grid,
                  const std::string& out_dir) {
  const std::vector<int> ids = parse_scenario_list(scenarios_text);
  const TrialDesign design = TrialDesign::default_design();

  std::string content;
  std::string filename;
  if (emit == "truth") {
    if (!(grid > 0)) throw std::invalid_argument("grid step must be positive");
    filename = "scenario_truth.csv";
    content = "scenario,d,pi\n";
    const long count = std::lround((design.d_max - design.d_min) / grid);
    for (int id : ids) {
      for (long i = 0; i <= count; ++i) {
        const double d = i == count
                             ? design.d_max
                             : design.d_min + grid * static_cast<double>(i);
        content += std::to_string(id);
        content += ',';
        content += fmt_g(d);
        content += ',';
        content += fmt_g(durations::true_curve(id, d));
        content += '\n';
      }
    }
  } else if (emit == "optima") {
    filename = "scenario_optima.csv";
    const EstimationTarget target = durations::parse_target(target_text);
    durations::validate_target(target);
    content = "scenario,d_star,d_star_continuous,d_star_integer\n";
    for (int id : ids) {
      const durations::TrueOptimum opt =
          durations::true_optimal(id, target, design);
      content += std::to_string(id);
      content += ',';
      content += opt.attained ? fmt_g(opt.d_star) : "not-attained";
      content += ',';
      content += opt.attained ? fmt_g(opt.d_star_continuous) : "not-attained";
      content += ',';
      content += opt.d_star_integer ? std::to_string(*opt.d_star_integer)
                                    : std::string("none");
      content += '\n';
    }
  } else {
    throw std::invalid_argument("unknown emit kind '" + emit +
                                "' (expected truth or optima)");
  }

  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/" + filename;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << content;
  f.close();

  std::fputs(content.c_str(), stdout);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Duration-response estimation and simulation toolkit"};
  app.set_version_flag("--version", durations::kVersion);
  app.require_subcommand(1);

  // simulate
  CLI::App* simulate =
      app.add_subcommand("simulate", "Run the operating-characteristics "
                                     "simulation and write summary tables");
  std::string sim_scenarios = "1-16";
  std::string sim_methods = "conf-bands";
  std::string sim_target = "risk-diff:0.10";
  uint64_t sim_seed = 1;
  int sim_reps = 100;
  int sim_workers = 0;
  std::string sim_arms = "8,10,12,14,16,18,20";
  int sim_n_total = 500;
  std::string sim_out = ".";
  std::string sim_config;
  FitFlags sim_flags;
  simulate->add_option("--scenarios", sim_scenarios,
                       "Scenario ids, e.g. 1-16 or 1,4,9-12");
  simulate->add_option("--methods", sim_methods,
                       "Comma-separated method ids");
  simulate->add_option("--target", sim_target, "Estimation target");
  simulate->add_option("--seed", sim_seed, "Simulation seed");
  simulate->add_option("--reps", sim_reps, "Replicates per cell");
  simulate->add_option("--workers", sim_workers,
                       "Worker threads (0 = hardware)");
  simulate->add_option("--arms", sim_arms, "Arm durations in days");
  simulate->add_option("--n-total", sim_n_total, "Total patients");
  simulate->add_option("--out", sim_out, "Output directory");
  simulate->add_option("--config", sim_config,
                       "JSON file with option defaults");
  sim_flags.attach(simulate);

  // analyze
  CLI::App* analyze = app.add_subcommand(
      "analyze", "Estimate the shortest adequate duration from a dataset");
  std::string an_data;
  std::string an_method = "conf-bands";
  std::string an_target = "risk-diff:0.10";
  uint64_t an_seed = 1;
  double an_grid_step = 0.1;
  bool an_lax = false;
  std::string an_out = ".";
  std::string an_config;
  FitFlags an_flags;
  analyze->add_option("--data", an_data, "Patient-level CSV file")
      ->required();
  analyze->add_option("--method", an_method, "Recommendation method");
  analyze->add_option("--target", an_target, "Estimation target");
  analyze->add_option("--seed", an_seed, "Bootstrap seed");
  analyze->add_option("--grid-step", an_grid_step,
                      "Spacing of the exported curve table");
  analyze->add_option("--out", an_out, "Output directory");
  analyze->add_flag("--lax", an_lax, "Ignore columns other than duration and cure");
  analyze->add_option("--config", an_config,
                      "JSON file with option defaults");
  an_flags.attach(analyze);

  // scenarios
  CLI::App* scen = app.add_subcommand(
      "scenarios", "Emit true curves or true optima for the built-in "
                   "scenario library");
  std::string sc_emit = "truth";
  std::string sc_scenarios = "1-16";
  std::string sc_target = "risk-diff:0.10";
  double sc_grid = 0.1;
  std::string sc_out = ".";
  scen->add_option("--emit", sc_emit, "What to emit: truth or optima");
  scen->add_option("--scenarios", sc_scenarios, "Scenario ids");
  scen->add_option("--target", sc_target, "Target for optima");
  scen->add_option("--grid", sc_grid, "Duration spacing for truth curves");
  scen->add_option("--out", sc_out, "Output directory");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    inject_config_defaults(args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (simulate->parsed()) {
      return run_simulate(sim_scenarios, sim_methods, sim_target, sim_seed,
                          sim_reps, sim_workers, sim_arms, sim_n_total,
                          sim_flags, sim_out);
    }
    if (analyze->parsed()) {
      return run_analyze(an_data, an_method, an_target, an_seed, an_grid_step,
                         an_lax, an_flags, an_out);
    }
    if (scen->parsed()) {
      return run_scenarios(sc_emit, sc_scenarios, sc_target, sc_grid, sc_out);
    }
  } catch (const durations::FitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
