#pragma once

#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "durations/design.hpp"
#include "durations/fp_model.hpp"

namespace durations {

// The five acceptance rules for a duration D against a curve pi(.):
//   risk difference:  pi(D) >= pi(d_max) - delta
//   fixed rate:       pi(D) >= pi_star
//   risk ratio:       pi(D) >= delta * pi(d_max)
//   frontier:         pi(D) >= pi(d_max) - loss(D), loss piecewise linear
//   max gradient:     sup of pi'(D') over D' in [D, d_max] <= cap
struct RiskDifference {
  double delta = 0.10;
};
struct FixedRate {
  double pi_star = 0.85;
};
struct RiskRatio {
  double delta = 0.90;  // in (0, 1]
};
struct Frontier {
  // (duration, allowed loss), strictly increasing durations. Between knots:
  // linear interpolation; past the last knot the final segment continues,
  // floored at 0; before the first knot the first loss applies.
  std::vector<std::pair<double, double>> knots;
};
struct MaxGradient {
  double cap = 0.02;  // probability per day
};

using EstimationTarget =
    std::variant<RiskDifference, FixedRate, RiskRatio, Frontier, MaxGradient>;

// Grammar: risk-diff:0.10 | fixed-rate:0.85 | risk-ratio:0.9 |
// frontier:8=0.10,18=0.05 | max-grad:0.02
EstimationTarget parse_target(const std::string& text);
std::string target_to_string(const EstimationTarget& target);
void validate_target(const EstimationTarget& target);

bool is_gradient_target(const EstimationTarget& target);
// The gradient rule accepts when lhs <= rhs; every other target when
// lhs >= rhs.
bool accepts_pair(const EstimationTarget& target, double lhs, double rhs);

double frontier_allowed_loss(const Frontier& frontier, double d);

// A curve the solver can evaluate: probability and its derivative.
struct CurveView {
  std::function<double(double)> pi;
  std::function<double(double)> dpi;
};

CurveView make_view(const FittedCurve& curve);

// Right-hand side of the acceptance condition at d. Where the rule
// references the control rate, basis.pi(d_max) supplies it. Not defined for
// the gradient target (its rhs is the cap).
double acceptance_rhs(const EstimationTarget& target, const CurveView& basis,
                      const TrialDesign& design, double d);

// (lhs, rhs) of the condition at d on one curve. The gradient lhs is the
// supremum of the derivative over [d, d_max] on a 0.01-day grid.
std::pair<double, double> acceptance_threshold(const EstimationTarget& target,
                                               const CurveView& curve,
                                               const TrialDesign& design,
                                               double d);

struct DStarResult {
  double d_star = 0;      // d_max when not attained
  bool attained = false;
};

// Smallest duration in [d_min, d_max] meeting the condition: upward
// 0.01-day scan, then 40 bisection steps on the bracketing interval. The
// gradient target resolves on the grid itself (its lhs is a grid supremum).
DStarResult solve_dstar(const CurveView& curve, const EstimationTarget& target,
                        const TrialDesign& design);

// Same search with a separate left-hand side (used for confidence bands:
// lhs is the lower band, the rhs keeps the fitted curve as basis).
DStarResult solve_first_acceptance(const std::function<double(double)>& lhs,
                                   const EstimationTarget& target,
                                   const CurveView& basis,
                                   const TrialDesign& design);

}  // namespace durations
