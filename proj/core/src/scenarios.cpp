#include "durations/scenarios.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "durations/stats.hpp"

namespace durations {

namespace {

void check_scenario(int scenario) {
  if (scenario < 1 || scenario > kScenarioCount) {
    throw std::invalid_argument("scenario id must be in 1.." +
                                std::to_string(kScenarioCount));
  }
}

// Shape constant chosen so curve 3 reaches 0.95 at the 20-day arm.
const double kQuadScale = (std::log(19.0) - 0.85) / 144.0;

double gompertz(double d, double rate, double center) {
  return 0.9 * std::exp(-std::exp(-rate * (d - center)));
}

double gompertz_grad(double d, double rate, double center) {
  const double inner = std::exp(-rate * (d - center));
  return 0.9 * std::exp(-inner) * rate * inner;
}

}  // namespace

double true_curve(int scenario, double d) {
  check_scenario(scenario);
  const double x = d - 8.0;
  switch (scenario) {
    case 1:
      return expit(0.85 + 0.17 * x);
    case 2:
      return expit(0.62 + 0.13 * x + 0.013 * x * x);
    case 3:
      return expit(0.85 + kQuadScale * x * x);
    case 4:
      return 0.95;
    case 5:
      return expit(0.85 + 1.19 * std::log(x + 1.0));
    case 6:
      return expit(0.62 + 0.67 * std::sqrt(x));
    case 7:
      return expit(1.10 + x * x * x / 640.0);
    case 8:
      return expit(1.39 + 0.0025 * x * x + 0.00075 * x * x * x);
    case 9:
      return 0.05 + 0.9 * expit(2.0 * d - 23.0);
    case 10:
      return 0.05 + 0.9 * expit(2.0 * d - 28.0);
    case 11:
      return gompertz(d, 0.5, 13.0);
    case 12:
      return gompertz(d, 1.0, 9.0);
    case 13:
      return gompertz(d, 2.0, 7.0);
    case 14:
      return 0.7 + (0.15 / 144.0) * x * x;
    case 15:
      return 0.7 + x / 24.0 - (0.25 / 144.0) * x * x;
    case 16:
      if (d <= 11.0) return 0.5 + 0.10 * x;
      if (d <= 14.0) return 0.8 + (0.14 / 3.0) * (d - 11.0);
      return 0.94 + 0.001 * (d - 14.0);
    default:
      return 0;
  }
}

double true_gradient(int scenario, double d) {
  check_scenario(scenario);
  const double x = d - 8.0;
  // Logistic-scale curves: chain rule through the inverse-logit link.
  auto logistic_grad = [](double eta, double eta_prime) {
    const double mu = expit(eta);
    return mu * (1.0 - mu) * eta_prime;
  };
  switch (scenario) {
    case 1:
      return logistic_grad(0.85 + 0.17 * x, 0.17);
    case 2:
      return logistic_grad(0.62 + 0.13 * x + 0.013 * x * x,
                           0.13 + 0.026 * x);
    case 3:
      return logistic_grad(0.85 + kQuadScale * x * x, 2.0 * kQuadScale * x);
    case 4:
      return 0.0;
    case 5:
      return logistic_grad(0.85 + 1.19 * std::log(x + 1.0),
                           1.19 / (x + 1.0));
    case 6:
      if (x <= 0.0) return std::numeric_limits<double>::infinity();
      return logistic_grad(0.62 + 0.67 * std::sqrt(x),
                           0.67 / (2.0 * std::sqrt(x)));
    case 7:
      return logistic_grad(1.10 + x * x * x / 640.0, 3.0 * x * x / 640.0);
    case 8:
      return logistic_grad(1.39 + 0.0025 * x * x + 0.00075 * x * x * x,
                           0.005 * x + 0.00225 * x * x);
    case 9:
      return 0.9 * 2.0 * expit(2.0 * d - 23.0) * (1.0 - expit(2.0 * d - 23.0));
    case 10:
      return 0.9 * 2.0 * expit(2.0 * d - 28.0) * (1.0 - expit(2.0 * d - 28.0));
    case 11:
      return gompertz_grad(d, 0.5, 13.0);
    case 12:
      return gompertz_grad(d, 1.0, 9.0);
    case 13:
      return gompertz_grad(d, 2.0, 7.0);
    case 14:
      return (0.3 / 144.0) * x;
    case 15:
      return 1.0 / 24.0 - (0.5 / 144.0) * x;
    case 16:
      // At a join the left piece's slope applies.
      if (d <= 11.0) return 0.10;
      if (d <= 14.0) return 0.14 / 3.0;
      return 0.001;
    default:
      return 0;
  }
}

std::string scenario_name(int scenario) {
  check_scenario(scenario);
  static const char* kNames[kScenarioCount] = {
      "logit linear",
      "logit quadratic",
      "logit quadratic, no linear term",
      "constant 0.95",
      "logit logarithmic",
      "logit square root",
      "logit cubic",
      "logit quadratic plus cubic",
      "steep sigmoid, midpoint 11.5",
      "steep sigmoid, midpoint 14",
      "Gompertz, slow rise",
      "Gompertz, medium rise",
      "Gompertz, fast rise",
      "convex quadratic on probability scale",
      "concave quadratic on probability scale",
      "piecewise linear spline",
  };
  return kNames[scenario - 1];
}

CurveView true_curve_view(int scenario) {
  check_scenario(scenario);
  CurveView view;
  view.pi = [scenario](double d) { return true_curve(scenario, d); };
  view.dpi = [scenario](double d) { return true_gradient(scenario, d); };
  return view;
}

TrialDataset generate_dataset(int scenario, const TrialDesign& design,
                              RngStream& stream) {
  check_scenario(scenario);
  TrialDataset data;
  data.records.reserve(static_cast<size_t>(design.n_total));
  for (size_t a = 0; a < design.arms.size(); ++a) {
    const double p = true_curve(scenario, design.arms[a]);
    for (int i = 0; i < design.allocation[a]; ++i) {
      data.records.push_back({design.arms[a], stream.bernoulli(p) ? 1 : 0});
    }
  }
  return data;
}

std::vector<double> truth_grid(const TrialDesign& design) {
  constexpr int kNodes = 100;
  std::vector<double> grid(kNodes);
  const double span = design.d_max - design.d_min;
  for (int i = 0; i < kNodes; ++i) {
    grid[i] = design.d_min + span * static_cast<double>(i) / (kNodes - 1);
  }
  grid.back() = design.d_max;
  return grid;
}

EstimationTarget reference_target(const EstimationTarget& target,
                                  const TrialDesign& design) {
  const Frontier* frontier = std::get_if<Frontier>(&target);
  if (frontier == nullptr) return target;
  const std::vector<double> grid = truth_grid(design);
  Frontier snapped;
  for (const auto& [knot_d, loss] : frontier->knots) {
    double d = knot_d;
    for (double g : grid) {
      if (g >= knot_d - 1e-12) {
        d = g;
        break;
      }
    }
    if (!snapped.knots.empty() && snapped.knots.back().first >= d - 1e-12) {
      snapped.knots.back().second = loss;
    } else {
      snapped.knots.emplace_back(d, loss);
    }
  }
  return snapped;
}

namespace {

// Supremum of the true gradient over [d, d_max], taken across a fixed
// 1/400-day grid anchored at d_min so repeated queries agree on the
// evaluation points.
double true_gradient_sup(int scenario, const TrialDesign& design, double d) {
  constexpr double kStep = 0.0025;
  const long count =
      std::lround(std::ceil((design.d_max - design.d_min) / kStep - 1e-9));
  long first = std::lround(std::ceil((d - design.d_min) / kStep - 1e-9));
  if (first < 0) first = 0;
  double sup = -std::numeric_limits<double>::infinity();
  for (long i = first; i <= count; ++i) {
    const double t =
        i == count ? design.d_max : design.d_min + kStep * static_cast<double>(i);
    sup = std::max(sup, true_gradient(scenario, t));
  }
  return sup;
}

bool reference_accepts(int scenario, const EstimationTarget& ref,
                       const TrialDesign& design, double d) {
  if (const MaxGradient* g = std::get_if<MaxGradient>(&ref)) {
    return true_gradient_sup(scenario, design, d) <= g->cap;
  }
  const CurveView view = true_curve_view(scenario);
  const double lhs = true_curve(scenario, d);
  const double rhs = acceptance_rhs(ref, view, design, d);
  return accepts_pair(ref, lhs, rhs);
}

}  // namespace

bool true_accepts(int scenario, const EstimationTarget& target,
                  const TrialDesign& design, double d) {
  return reference_accepts(scenario, reference_target(target, design), design,
                           d);
}

TrueOptimum true_optimal(int scenario, const EstimationTarget& target,
                         const TrialDesign& design) {
  const EstimationTarget ref = reference_target(target, design);
  const std::vector<double> grid = truth_grid(design);

  TrueOptimum out;
  out.d_star = design.d_max;
  out.d_star_continuous = design.d_max;
  out.attained = false;

  auto accepts = [&](double d) {
    return reference_accepts(scenario, ref, design, d);
  };

  for (size_t i = 0; i < grid.size(); ++i) {
    if (!accepts(grid[i])) continue;
    out.d_star = grid[i];
    out.attained = true;
    if (i == 0) {
      out.d_star_continuous = grid[0];
    } else {
      double lo = grid[i - 1];  // rejecting
      double hi = grid[i];      // accepting
      for (int step = 0; step < 40; ++step) {
        const double mid = 0.5 * (lo + hi);
        if (accepts(mid)) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      out.d_star_continuous = hi;
    }
    break;
  }

  for (int d : design.integer_durations()) {
    if (accepts(static_cast<double>(d))) {
      out.d_star_integer = d;
      break;
    }
  }
  return out;
}

}  // namespace durations
