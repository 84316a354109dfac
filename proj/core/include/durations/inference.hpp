#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "durations/design.hpp"
#include "durations/fp_model.hpp"
#include "durations/rng.hpp"
#include "durations/targets.hpp"

namespace durations {

// Curve selection strategy shared by every method.
//   exact2: minimum-deviance search over all two-term power pairs.
//   closed_test: hierarchical test stepping down through the two-term
//   winner, the one-term winner, a straight line, and a flat model.
enum class FpAlgorithm { exact2, closed_test };

enum class Method {
  conf_bands,     // lower confidence band crossing
  delta,          // per-day difference CI via the delta method
  boot_diff,      // bootstrap CI of the acceptance margin per day
  boot_duration,  // bootstrap distribution of the solved duration
  gradient_point, // plug-in solve on the fitted curve, no uncertainty
};

Method parse_method(const std::string& id);
std::string method_to_string(Method method);
bool method_supports(Method method, const EstimationTarget& target);

struct BootstrapConfig {
  int m = 500;
  std::string interval = "bca";  // "bca" or "percentile"
  double level = 0.95;
  int max_retries = 5;       // per-resample refit attempts on fresh draws
  int jackknife_groups = 50; // grouped jackknife size for acceleration
};

struct MethodConfig {
  FpAlgorithm algorithm = FpAlgorithm::exact2;
  double sig_level = 0.05;  // closed-test significance threshold
  double conf_level = 0.95; // band and difference-CI coverage
  // Build bands by offsetting the linear predictor before transforming,
  // instead of offsetting on the probability scale.
  bool bands_on_linear_predictor = false;
  BootstrapConfig bootstrap;
};

struct Diagnostics {
  int bootstrap_requested = 0;
  int bootstrap_dropped = 0;
  int bootstrap_retries = 0;
  bool unreliable = false;          // over 10% of resamples dropped
  bool clamped = false;             // recommendation hit the longest arm
  bool degenerate_interval = false; // collapsed or clamped interval internals
  bool not_attained = false;        // condition never met where required
};

struct Recommendation {
  int recommended = 0;  // whole days
  double d_star_hat = 0;
  // conf_bands: (point solve, band solve). boot_duration: percentile
  // interval of solved durations. delta / boot_diff: the CI of the
  // per-day statistic at the recommended day. gradient_point: the point
  // solve twice.
  std::pair<double, double> ci{0, 0};
  Diagnostics diagnostics;
};

// Per-day decision row for the tabular methods.
struct DurationCiRow {
  int duration = 0;
  double estimate = 0;
  double se = 0;
  double lower = 0;
  double upper = 0;
  double allowed = 0;
  bool accepted = false;
};

struct TableResult {
  Recommendation recommendation;
  std::vector<DurationCiRow> table;
};

FittedCurve select_curve(const AggregatedData& agg, const MethodConfig& cfg,
                         const IrlsControls& controls = {});

// Smallest whole day strictly above u, except an exact hit on the
// shortest arm recommends that arm; clamps to the longest arm.
int round_up_strict(double u, const TrialDesign& design, bool* clamped);

Recommendation recommend_conf_bands(const FittedCurve& curve,
                                    const EstimationTarget& target,
                                    const TrialDesign& design,
                                    const MethodConfig& cfg);

struct DiffCi {
  double diff = 0;
  double se = 0;
  double lower = 0;
  double upper = 0;
};

// Delta-method CI for pi(d_ref) - pi(d) on one fitted curve.
DiffCi delta_diff_ci(const FittedCurve& curve, double d_ref, double d,
                     double conf_level);

TableResult recommend_delta_detail(const FittedCurve& curve,
                                   const EstimationTarget& target,
                                   const TrialDesign& design,
                                   const MethodConfig& cfg);
Recommendation recommend_delta(const FittedCurve& curve,
                               const EstimationTarget& target,
                               const TrialDesign& design,
                               const MethodConfig& cfg);

TrialDataset bootstrap_resample(const TrialDataset& data, RngStream& stream);

std::pair<double, double> percentile_interval(std::vector<double> values,
                                              double level);

struct IntervalInfo {
  double lower = 0;
  double upper = 0;
  double z0 = 0;
  double accel = 0;
  bool degenerate = false;  // collapsed values or clamped bias term
};

// Bias-corrected accelerated interval. `boot` need not be sorted;
// `jackknife` holds deletion-group estimates and may be empty, in which
// case the acceleration term is zero.
IntervalInfo bca_interval(std::vector<double> boot, double theta_hat,
                          const std::vector<double>& jackknife, double level);

// The quantile-mapping core with the bias and acceleration terms pinned.
IntervalInfo bca_interval_raw(const std::vector<double>& sorted_boot,
                              double level, double z0, double accel);

TableResult recommend_boot_diff_detail(const TrialDataset& data,
                                       const FittedCurve& curve,
                                       const EstimationTarget& target,
                                       const TrialDesign& design,
                                       const MethodConfig& cfg,
                                       const RngStream& rng);
Recommendation recommend_boot_diff(const TrialDataset& data,
                                   const FittedCurve& curve,
                                   const EstimationTarget& target,
                                   const TrialDesign& design,
                                   const MethodConfig& cfg,
                                   const RngStream& rng);

Recommendation recommend_boot_duration(const TrialDataset& data,
                                       const FittedCurve& curve,
                                       const EstimationTarget& target,
                                       const TrialDesign& design,
                                       const MethodConfig& cfg,
                                       const RngStream& rng);

Recommendation recommend_gradient_point(const FittedCurve& curve,
                                        const EstimationTarget& target,
                                        const TrialDesign& design);

// Fits the curve and dispatches. Throws FitError when selection fails and
// std::invalid_argument when the method cannot address the target.
Recommendation recommend_with_method(Method method, const TrialDataset& data,
                                     const TrialDesign& design,
                                     const EstimationTarget& target,
                                     const MethodConfig& cfg,
                                     const RngStream& rng);

}  // namespace durations
