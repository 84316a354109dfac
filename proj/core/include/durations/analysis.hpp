#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "durations/design.hpp"
#include "durations/fp_model.hpp"
#include "durations/inference.hpp"
#include "durations/targets.hpp"

namespace durations {

// Parse failure in a dataset file. `line` is the physical line number in
// the file, counting the header as line 1.
struct CsvError : std::runtime_error {
  int line;
  CsvError(int line_, const std::string& msg)
      : std::runtime_error("row " + std::to_string(line_) + ": " + msg),
        line(line_) {}
};

// Reads a patient-level dataset: a header naming a duration column and a
// cure column, then one row per patient. Extra columns are ignored.
TrialDataset read_dataset_csv(const std::string& path, bool lax = false);

// Arms and allocation as observed: distinct durations in ascending order
// with their record counts.
TrialDesign design_from_data(const TrialDataset& data);

struct AnalysisOptions {
  Method method = Method::conf_bands;
  EstimationTarget target = RiskDifference{};
  MethodConfig method_config;
  uint64_t seed = 1;
  double grid_step = 0.1;  // spacing of the exported curve table
};

struct CurvePoint {
  double d = 0;
  double pi_hat = 0;
  double lower = 0;
  double upper = 0;
};

struct AnalysisReport {
  AnalysisOptions options;
  TrialDesign design;
  FittedCurve curve;
  Recommendation recommendation;
  std::vector<DurationCiRow> table;  // empty for non-tabular methods
  std::vector<CurvePoint> curve_points;
};

AnalysisReport analyze_dataset(const TrialDataset& data,
                               const AnalysisOptions& options);

void write_report_json(const AnalysisReport& report, const std::string& path);
void write_curve_csv(const AnalysisReport& report, const std::string& path);

}  // namespace durations
