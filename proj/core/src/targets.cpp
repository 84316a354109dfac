#include "durations/targets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace durations {

namespace {

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double parse_number(const std::string& s, const char* what) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("bad ") + what + ": '" + s + "'");
  }
  if (pos != s.size())
    throw std::invalid_argument(std::string("bad ") + what + ": '" + s + "'");
  return v;
}

}  // namespace

EstimationTarget parse_target(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("target must look like name:value, got '" +
                                text + "'");
  const std::string name = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  EstimationTarget target;
  if (name == "risk-diff") {
    target = RiskDifference{parse_number(rest, "risk-diff margin")};
  } else if (name == "fixed-rate") {
    target = FixedRate{parse_number(rest, "fixed-rate level")};
  } else if (name == "risk-ratio") {
    target = RiskRatio{parse_number(rest, "risk-ratio fraction")};
  } else if (name == "max-grad") {
    target = MaxGradient{parse_number(rest, "gradient cap")};
  } else if (name == "frontier") {
    Frontier f;
    std::size_t start = 0;
    while (start <= rest.size()) {
      auto comma = rest.find(',', start);
      if (comma == std::string::npos) comma = rest.size();
      const std::string knot = rest.substr(start, comma - start);
      const auto eq = knot.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("frontier knot must look like D=loss, got '" +
                                    knot + "'");
      f.knots.emplace_back(parse_number(knot.substr(0, eq), "frontier duration"),
                           parse_number(knot.substr(eq + 1), "frontier loss"));
      start = comma + 1;
    }
    target = std::move(f);
  } else {
    throw std::invalid_argument("unknown target '" + name + "'");
  }
  validate_target(target);
  return target;
}

std::string target_to_string(const EstimationTarget& target) {
  return std::visit(
      [](const auto& t) -> std::string {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, RiskDifference>)
          return "risk-diff:" + fmt_num(t.delta);
        else if constexpr (std::is_same_v<T, FixedRate>)
          return "fixed-rate:" + fmt_num(t.pi_star);
        else if constexpr (std::is_same_v<T, RiskRatio>)
          return "risk-ratio:" + fmt_num(t.delta);
        else if constexpr (std::is_same_v<T, MaxGradient>)
          return "max-grad:" + fmt_num(t.cap);
        else {
          std::string out = "frontier:";
          for (std::size_t i = 0; i < t.knots.size(); ++i) {
            if (i) out += ',';
            out += fmt_num(t.knots[i].first) + "=" + fmt_num(t.knots[i].second);
          }
          return out;
        }
      },
      target);
}

void validate_target(const EstimationTarget& target) {
  std::visit(
      [](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, RiskDifference>) {
          if (!(t.delta >= 0 && t.delta <= 1))
            throw std::invalid_argument("risk-diff margin must lie in [0, 1]");
        } else if constexpr (std::is_same_v<T, FixedRate>) {
          if (!(t.pi_star >= 0 && t.pi_star <= 1))
            throw std::invalid_argument("fixed-rate level must lie in [0, 1]");
        } else if constexpr (std::is_same_v<T, RiskRatio>) {
          if (!(t.delta > 0 && t.delta <= 1))
            throw std::invalid_argument("risk-ratio fraction must lie in (0, 1]");
        } else if constexpr (std::is_same_v<T, MaxGradient>) {
          if (!(t.cap >= 0))
            throw std::invalid_argument("gradient cap must be nonnegative");
        } else {
          if (t.knots.empty())
            throw std::invalid_argument("frontier needs at least one knot");
          for (std::size_t i = 0; i < t.knots.size(); ++i) {
            if (!(t.knots[i].second >= 0 && t.knots[i].second <= 1))
              throw std::invalid_argument("frontier losses must lie in [0, 1]");
            if (i && !(t.knots[i - 1].first < t.knots[i].first))
              throw std::invalid_argument(
                  "frontier knots must have strictly increasing durations");
          }
        }
      },
      target);
}

bool is_gradient_target(const EstimationTarget& target) {
  return std::holds_alternative<MaxGradient>(target);
}

bool accepts_pair(const EstimationTarget& target, double lhs, double rhs) {
  return is_gradient_target(target) ? lhs <= rhs : lhs >= rhs;
}

double frontier_allowed_loss(const Frontier& frontier, double d) {
  const auto& k = frontier.knots;
  if (d <= k.front().first) return k.front().second;
  for (std::size_t i = 1; i < k.size(); ++i) {
    if (d <= k[i].first) {
      const double t = (d - k[i - 1].first) / (k[i].first - k[i - 1].first);
      return k[i - 1].second + t * (k[i].second - k[i - 1].second);
    }
  }
  // Past the last knot: continue the final segment, floored at 0.
  double slope = 0;
  if (k.size() >= 2) {
    const auto& a = k[k.size() - 2];
    const auto& b = k.back();
    slope = (b.second - a.second) / (b.first - a.first);
  }
  return std::max(0.0, k.back().second + slope * (d - k.back().first));
}

CurveView make_view(const FittedCurve& curve) {
  return CurveView{
      [curve](double d) { return curve.probability(d); },
      [curve](double d) { return curve.gradient(d); },
  };
}

double acceptance_rhs(const EstimationTarget& target, const CurveView& basis,
                      const TrialDesign& design, double d) {
  return std::visit(
      [&](const auto& t) -> double {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, RiskDifference>)
          return basis.pi(design.d_max) - t.delta;
        else if constexpr (std::is_same_v<T, FixedRate>)
          return t.pi_star;
        else if constexpr (std::is_same_v<T, RiskRatio>)
          return t.delta * basis.pi(design.d_max);
        else if constexpr (std::is_same_v<T, Frontier>)
          return basis.pi(design.d_max) - frontier_allowed_loss(t, d);
        else
          throw std::logic_error("gradient target has no probability threshold");
      },
      target);
}

namespace {

constexpr double kScanStep = 0.01;

std::vector<double> scan_grid(const TrialDesign& design) {
  const auto n =
      static_cast<std::size_t>(std::llround((design.d_max - design.d_min) / kScanStep));
  std::vector<double> g(n + 1);
  for (std::size_t i = 0; i <= n; ++i) g[i] = design.d_min + static_cast<double>(i) * kScanStep;
  g.back() = design.d_max;
  return g;
}

DStarResult solve_gradient(const CurveView& curve, const MaxGradient& target,
                           const TrialDesign& design) {
  const std::vector<double> grid = scan_grid(design);
  std::vector<double> g(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) g[i] = curve.dpi(grid[i]);
  // Suffix maxima turn "gradient stays below the cap from here on" into a
  // single comparison per grid point.
  for (std::size_t i = grid.size() - 1; i-- > 0;) g[i] = std::max(g[i], g[i + 1]);
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (g[i] <= target.cap) return {grid[i], true};
  return {design.d_max, false};
}

}  // namespace

std::pair<double, double> acceptance_threshold(const EstimationTarget& target,
                                               const CurveView& curve,
                                               const TrialDesign& design,
                                               double d) {
  if (const auto* g = std::get_if<MaxGradient>(&target)) {
    double sup = -std::numeric_limits<double>::infinity();
    for (double t = d; t < design.d_max; t += kScanStep)
      sup = std::max(sup, curve.dpi(t));
    sup = std::max(sup, curve.dpi(design.d_max));
    return {sup, g->cap};
  }
  return {curve.pi(d), acceptance_rhs(target, curve, design, d)};
}

DStarResult solve_first_acceptance(const std::function<double(double)>& lhs,
                                   const EstimationTarget& target,
                                   const CurveView& basis,
                                   const TrialDesign& design) {
  if (is_gradient_target(target))
    throw std::logic_error("gradient target needs solve_dstar");
  const auto accepts_at = [&](double d) {
    return lhs(d) >= acceptance_rhs(target, basis, design, d);
  };
  if (accepts_at(design.d_min)) return {design.d_min, true};
  const std::vector<double> grid = scan_grid(design);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!accepts_at(grid[i])) continue;
    double lo = grid[i - 1];  // fails
    double hi = grid[i];      // accepts
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      (accepts_at(mid) ? hi : lo) = mid;
    }
    return {hi, true};
  }
  return {design.d_max, false};
}

DStarResult solve_dstar(const CurveView& curve, const EstimationTarget& target,
                        const TrialDesign& design) {
  if (const auto* g = std::get_if<MaxGradient>(&target))
    return solve_gradient(curve, *g, design);
  return solve_first_acceptance(curve.pi, target, curve, design);
}

}  // namespace durations
