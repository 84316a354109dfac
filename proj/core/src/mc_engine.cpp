#include "durations/mc_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "durations/rng.hpp"
#include "durations/scenarios.hpp"
#include "durations/stats.hpp"
#include "durations/version.hpp"

namespace durations {

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void validate_config(const SimulationConfig& cfg) {
  if (cfg.scenarios.empty()) {
    throw std::invalid_argument("no scenarios selected");
  }
  for (int s : cfg.scenarios) {
    if (s < 1 || s > kScenarioCount) {
      throw std::invalid_argument("scenario id out of range: " +
                                  std::to_string(s));
    }
  }
  if (cfg.methods.empty()) throw std::invalid_argument("no methods selected");
  for (Method m : cfg.methods) {
    if (!method_supports(m, cfg.target)) {
      throw std::invalid_argument("method " + method_to_string(m) +
                                  " cannot address target " +
                                  target_to_string(cfg.target));
    }
  }
  if (cfg.reps < 1) throw std::invalid_argument("reps must be positive");
  validate_target(cfg.target);
  cfg.design.validate();
}

// Smallest recommended day whose cumulative count reaches q of the total.
int hist_quantile(const std::vector<int>& sorted, double q) {
  const double need = q * static_cast<double>(sorted.size()) - 1e-9;
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (static_cast<double>(i + 1) >= need) return sorted[i];
  }
  return sorted.back();
}

}  // namespace

std::string canonical_config_json(const SimulationConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["scenarios"] = cfg.scenarios;
  std::vector<std::string> methods;
  methods.reserve(cfg.methods.size());
  for (Method m : cfg.methods) methods.push_back(method_to_string(m));
  j["methods"] = methods;
  j["target"] = target_to_string(cfg.target);
  j["design"] = {{"arms", cfg.design.arms}, {"n_total", cfg.design.n_total}};
  j["reps"] = cfg.reps;
  j["fp_algorithm"] = cfg.method.algorithm == FpAlgorithm::exact2
                          ? "exact2"
                          : "closed-test";
  j["sig_level"] = cfg.method.sig_level;
  j["conf_level"] = cfg.method.conf_level;
  j["bands_on_linear_predictor"] = cfg.method.bands_on_linear_predictor;
  j["bootstrap"] = {{"m", cfg.method.bootstrap.m},
                    {"interval", cfg.method.bootstrap.interval},
                    {"level", cfg.method.bootstrap.level},
                    {"max_retries", cfg.method.bootstrap.max_retries},
                    {"jackknife_groups", cfg.method.bootstrap.jackknife_groups}};
  return j.dump(2);
}

std::string compute_config_hash(const SimulationConfig& cfg) {
  const std::string text = canonical_config_json(cfg);
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

CellMetrics compute_metrics(int scenario, Method method,
                            const EstimationTarget& target,
                            const TrialDesign& design,
                            const std::vector<ReplicateResult>& results) {
  CellMetrics m;
  m.scenario = scenario;
  m.method = method;
  m.reps = static_cast<int>(results.size());

  std::vector<int> recs;
  recs.reserve(results.size());
  for (const ReplicateResult& r : results) {
    if (r.success) recs.push_back(r.recommended);
  }
  m.failures = m.reps - static_cast<int>(recs.size());

  const TrueOptimum opt = true_optimal(scenario, target, design);
  m.true_min_duration = opt.d_star;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (recs.empty()) {
    m.partial_power = m.full_power = m.type1 = nan;
    m.type1_ci_lo = m.type1_ci_hi = nan;
    return m;
  }

  const double n = static_cast<double>(recs.size());
  std::map<int, bool> accept_cache;
  int accepted = 0;
  int exact = 0;
  for (int rec : recs) {
    auto it = accept_cache.find(rec);
    if (it == accept_cache.end()) {
      it = accept_cache
               .emplace(rec, true_accepts(scenario, target, design, rec))
               .first;
    }
    if (it->second) ++accepted;
    if (opt.d_star_integer && rec == *opt.d_star_integer) ++exact;
  }
  m.partial_power = 100.0 * accepted / n;
  m.type1 = 100.0 - m.partial_power;
  m.full_power = opt.d_star_integer ? 100.0 * exact / n : nan;

  const double p_type1 = static_cast<double>(recs.size() - accepted) / n;
  const auto ci = wald_ci(p_type1, recs.size());
  m.type1_ci_lo = 100.0 * ci.first;
  m.type1_ci_hi = 100.0 * ci.second;

  std::sort(recs.begin(), recs.end());
  m.rec_min = recs.front();
  m.rec_p2_5 = hist_quantile(recs, 0.025);
  m.rec_median = hist_quantile(recs, 0.5);
  return m;
}

SimulationSummary run_simulation(const SimulationConfig& cfg) {
  validate_config(cfg);

  const size_t n_methods = cfg.methods.size();
  const size_t n_cells = cfg.scenarios.size() * n_methods;
  const size_t reps = static_cast<size_t>(cfg.reps);
  const size_t total = n_cells * reps;

  std::vector<ReplicateResult> results(total);

  size_t workers = cfg.workers > 0
                       ? static_cast<size_t>(cfg.workers)
                       : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, total);

  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);

  auto work = [&](size_t w) {
    try {
      while (true) {
        const size_t t = next.fetch_add(1);
        if (t >= total) break;
        const size_t cell = t / reps;
        const size_t rep = t % reps;
        const int scenario = cfg.scenarios[cell / n_methods];
        const Method method = cfg.methods[cell % n_methods];

        RngStream stream = RngStream::from_words(
            {cfg.seed, static_cast<uint64_t>(scenario),
             static_cast<uint64_t>(rep), 0});
        const TrialDataset data =
            generate_dataset(scenario, cfg.design, stream);
        try {
          const Recommendation rec = recommend_with_method(
              method, data, cfg.design, cfg.target, cfg.method, stream);
          results[t] = {true, rec.recommended};
        } catch (const FitError&) {
          results[t] = {false, 0};
        }
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };

  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SimulationSummary summary;
  summary.config = cfg;
  summary.config_hash = compute_config_hash(cfg);
  summary.cells.reserve(n_cells);
  for (size_t cell = 0; cell < n_cells; ++cell) {
    const std::vector<ReplicateResult> slice(
        results.begin() + static_cast<long>(cell * reps),
        results.begin() + static_cast<long>((cell + 1) * reps));
    summary.cells.push_back(compute_metrics(
        cfg.scenarios[cell / n_methods], cfg.methods[cell % n_methods],
        cfg.target, cfg.design, slice));
  }
  return summary;
}

bool all_cells_failed(const SimulationSummary& summary) {
  for (const CellMetrics& c : summary.cells) {
    if (c.failures < c.reps) return false;
  }
  return !summary.cells.empty();
}

void write_summary_csv(const SimulationSummary& summary,
                       const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "scenario,method,target,reps,partial_power,full_power,type1,"
       "type1_ci_lo,type1_ci_hi,true_min_duration,rec_min,rec_p2_5,"
       "rec_median,seed,config_hash,version\n";
  const std::string target = csv_field(target_to_string(summary.config.target));
  for (const CellMetrics& c : summary.cells) {
    f << c.scenario << ',' << method_to_string(c.method) << ',' << target
      << ',' << c.reps << ',' << fmt_g(c.partial_power) << ','
      << fmt_g(c.full_power) << ',' << fmt_g(c.type1) << ','
      << fmt_g(c.type1_ci_lo) << ',' << fmt_g(c.type1_ci_hi) << ','
      << fmt_g(c.true_min_duration) << ',' << c.rec_min << ',' << c.rec_p2_5
      << ',' << c.rec_median << ',' << summary.config.seed << ','
      << summary.config_hash << ',' << kVersion << "\n";
  }
}

namespace {

nlohmann::json cell_to_json(const CellMetrics& c) {
  nlohmann::json j;
  j["scenario"] = c.scenario;
  j["method"] = method_to_string(c.method);
  j["reps"] = c.reps;
  j["failures"] = c.failures;
  j["partial_power"] = c.partial_power;
  j["full_power"] = c.full_power;
  j["type1"] = c.type1;
  j["type1_ci_lo"] = c.type1_ci_lo;
  j["type1_ci_hi"] = c.type1_ci_hi;
  j["true_min_duration"] = c.true_min_duration;
  j["rec_min"] = c.rec_min;
  j["rec_p2_5"] = c.rec_p2_5;
  j["rec_median"] = c.rec_median;
  return j;
}

}  // namespace

void write_summary_json(const SimulationSummary& summary,
                        const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(canonical_config_json(summary.config));
  j["config_hash"] = summary.config_hash;
  j["version"] = kVersion;
  nlohmann::json cells = nlohmann::json::array();
  for (const CellMetrics& c : summary.cells) cells.push_back(cell_to_json(c));
  j["cells"] = cells;
  f << j.dump(2) << "\n";
}

void write_config_json(const SimulationConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << canonical_config_json(cfg) << "\n";
}

}  // namespace durations
