#pragma once

#include <optional>
#include <string>

#include "durations/design.hpp"
#include "durations/rng.hpp"
#include "durations/targets.hpp"

namespace durations {

inline constexpr int kScenarioCount = 16;

// The built-in library of true duration-response curves used by the
// simulation engine: logistic-scale polynomials and transforms (1-8),
// shifted steep sigmoids (9-10), Gompertz curves (11-13), and
// probability-scale shapes (14-16). Ids run 1..16.
double true_curve(int scenario, double d);
double true_gradient(int scenario, double d);  // analytic derivative
std::string scenario_name(int scenario);

CurveView true_curve_view(int scenario);

// One Bernoulli outcome per patient, arms in design order; consumes
// exactly design.n_total draws from the stream.
TrialDataset generate_dataset(int scenario, const TrialDesign& design,
                              RngStream& stream);

// The reference evaluation grid for truth tables: 100 equally spaced points
// from d_min to d_max inclusive.
std::vector<double> truth_grid(const TrialDesign& design);

// Truth tables are computed on the reference grid, so a frontier knot
// placed between grid points takes effect from the first grid point at or
// after it. This maps a target to that grid-aligned form; non-frontier
// targets pass through unchanged.
EstimationTarget reference_target(const EstimationTarget& target,
                                  const TrialDesign& design);

// Whether the target condition truly holds at d (reference conventions:
// grid-aligned frontier, fine-grid gradient supremum).
bool true_accepts(int scenario, const EstimationTarget& target,
                  const TrialDesign& design, double d);

struct TrueOptimum {
  // First reference-grid point meeting the condition (the tabulated value).
  double d_star = 0;
  // Bisection-refined first crossing, 1e-4 day resolution.
  double d_star_continuous = 0;
  bool attained = false;
  // Smallest whole day meeting the condition; empty when none does.
  std::optional<int> d_star_integer;
};

TrueOptimum true_optimal(int scenario, const EstimationTarget& target,
                         const TrialDesign& design);

}  // namespace durations
