#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "durations/design.hpp"
#include "durations/inference.hpp"
#include "durations/targets.hpp"

namespace durations {

struct SimulationConfig {
  uint64_t seed = 1;
  std::vector<int> scenarios;
  std::vector<Method> methods;
  EstimationTarget target = RiskDifference{};
  TrialDesign design = TrialDesign::default_design();
  int reps = 100;
  // Worker threads; 0 means the hardware count. Results are identical for
  // any value.
  int workers = 0;
  MethodConfig method;
};

struct ReplicateResult {
  bool success = false;
  int recommended = 0;
};

struct CellMetrics {
  int scenario = 0;
  Method method = Method::conf_bands;
  int reps = 0;
  int failures = 0;
  // Percentages over successful replicates. partial_power counts
  // recommendations the true curve accepts; full_power counts exact hits
  // on the true smallest adequate whole day (NaN when no whole day
  // qualifies); type1 is the complement of partial_power.
  double partial_power = 0;
  double full_power = 0;
  double type1 = 0;
  double type1_ci_lo = 0;
  double type1_ci_hi = 0;
  double true_min_duration = 0;
  int rec_min = 0;
  int rec_p2_5 = 0;
  int rec_median = 0;
};

struct SimulationSummary {
  SimulationConfig config;
  std::string config_hash;
  std::vector<CellMetrics> cells;  // scenario-major, then method
};

// Canonical configuration snapshot: sorted-key JSON excluding execution
// details (worker count), so reruns at different parallelism hash alike.
std::string canonical_config_json(const SimulationConfig& cfg);
std::string compute_config_hash(const SimulationConfig& cfg);

CellMetrics compute_metrics(int scenario, Method method,
                            const EstimationTarget& target,
                            const TrialDesign& design,
                            const std::vector<ReplicateResult>& results);

SimulationSummary run_simulation(const SimulationConfig& cfg);

bool all_cells_failed(const SimulationSummary& summary);

void write_summary_csv(const SimulationSummary& summary,
                       const std::string& path);
void write_summary_json(const SimulationSummary& summary,
                        const std::string& path);
void write_config_json(const SimulationConfig& cfg, const std::string& path);

}  // namespace durations
