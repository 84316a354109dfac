#include "durations/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "durations/stats.hpp"

namespace durations {

Method parse_method(const std::string& id) {
  if (id == "conf-bands") return Method::conf_bands;
  if (id == "delta") return Method::delta;
  if (id == "boot-diff") return Method::boot_diff;
  if (id == "boot-duration") return Method::boot_duration;
  if (id == "gradient-point") return Method::gradient_point;
  throw std::invalid_argument("unknown method: " + id);
}

std::string method_to_string(Method method) {
  switch (method) {
    case Method::conf_bands: return "conf-bands";
    case Method::delta: return "delta";
    case Method::boot_diff: return "boot-diff";
    case Method::boot_duration: return "boot-duration";
    case Method::gradient_point: return "gradient-point";
  }
  return "";
}

bool method_supports(Method method, const EstimationTarget& target) {
  const bool gradient = is_gradient_target(target);
  switch (method) {
    case Method::conf_bands:
    case Method::boot_diff:
      return !gradient;
    case Method::delta:
      return std::holds_alternative<RiskDifference>(target) ||
             std::holds_alternative<Frontier>(target);
    case Method::boot_duration:
      return true;
    case Method::gradient_point:
      return gradient;
  }
  return false;
}

FittedCurve select_curve(const AggregatedData& agg, const MethodConfig& cfg,
                         const IrlsControls& controls) {
  long n_obs = 0;
  for (double t : agg.trials) n_obs += std::lround(t);
  if (cfg.algorithm == FpAlgorithm::exact2) {
    return select_fp2_exhaustive(agg, static_cast<int>(n_obs), controls);
  }
  return select_fp_closed_test(agg, static_cast<int>(n_obs), cfg.sig_level,
                               controls);
}

int round_up_strict(double u, const TrialDesign& design, bool* clamped) {
  const int lo = static_cast<int>(std::ceil(design.d_min));
  const int hi = static_cast<int>(std::floor(design.d_max));
  int rec;
  if (u == design.d_min) {
    rec = lo;
  } else {
    rec = static_cast<int>(std::floor(u)) + 1;
  }
  if (rec < lo) rec = lo;
  if (rec > hi) {
    rec = hi;
    if (clamped != nullptr) *clamped = true;
  }
  return rec;
}

namespace {

void require_probability_target(const EstimationTarget& target,
                                const char* method_name) {
  if (is_gradient_target(target)) {
    throw std::invalid_argument(std::string(method_name) +
                                " requires a probability-threshold target");
  }
}

double sample_sd(const std::vector<double>& v) {
  const size_t n = v.size();
  if (n < 2) return 0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ssq = 0;
  for (double x : v) ssq += (x - mean) * (x - mean);
  return std::sqrt(ssq / (n - 1));
}

}  // namespace

Recommendation recommend_conf_bands(const FittedCurve& curve,
                                    const EstimationTarget& target,
                                    const TrialDesign& design,
                                    const MethodConfig& cfg) {
  require_probability_target(target, "conf-bands");
  const double z = norm_quantile(0.5 * (1.0 + cfg.conf_level));
  auto lower_band = [&](double d) {
    if (cfg.bands_on_linear_predictor) {
      return expit(curve.linear_predictor(d) - z * curve.pointwise_se_eta(d));
    }
    return curve.probability(d) - z * curve.pointwise_se(d);
  };
  const CurveView basis = make_view(curve);
  const DStarResult point = solve_dstar(basis, target, design);
  const DStarResult band =
      solve_first_acceptance(lower_band, target, basis, design);

  Recommendation rec;
  rec.d_star_hat = point.d_star;
  rec.ci = {point.d_star, band.d_star};
  if (!band.attained) {
    rec.recommended = static_cast<int>(std::floor(design.d_max));
    rec.diagnostics.not_attained = true;
  } else {
    rec.recommended =
        round_up_strict(band.d_star, design, &rec.diagnostics.clamped);
  }
  return rec;
}

DiffCi delta_diff_ci(const FittedCurve& curve, double d_ref, double d,
                     double conf_level) {
  const double mu_ref = curve.probability(d_ref);
  const double mu_d = curve.probability(d);
  const Eigen::VectorXd jac =
      curve.design_row(d_ref) * (mu_ref * (1.0 - mu_ref)) -
      curve.design_row(d) * (mu_d * (1.0 - mu_d));
  const double var = jac.dot(curve.covariance * jac);

  DiffCi out;
  out.diff = mu_ref - mu_d;
  out.se = std::sqrt(std::max(var, 0.0));
  const double z = norm_quantile(0.5 * (1.0 + conf_level));
  out.lower = out.diff - z * out.se;
  out.upper = out.diff + z * out.se;
  return out;
}

TableResult recommend_delta_detail(const FittedCurve& curve,
                                   const EstimationTarget& target,
                                   const TrialDesign& design,
                                   const MethodConfig& cfg) {
  const RiskDifference* rd = std::get_if<RiskDifference>(&target);
  const Frontier* frontier = std::get_if<Frontier>(&target);
  if (rd == nullptr && frontier == nullptr) {
    throw std::invalid_argument(
        "delta requires a risk-difference or frontier target");
  }

  TableResult out;
  for (int day : design.integer_durations()) {
    const DiffCi ci =
        delta_diff_ci(curve, design.d_max, day, cfg.conf_level);
    const double allowed =
        rd != nullptr ? rd->delta : frontier_allowed_loss(*frontier, day);
    out.table.push_back({day, ci.diff, ci.se, ci.lower, ci.upper, allowed,
                         ci.upper < allowed});
  }

  size_t chosen = out.table.size() - 1;
  bool attained = false;
  for (size_t i = 0; i < out.table.size(); ++i) {
    if (out.table[i].accepted) {
      chosen = i;
      attained = true;
      break;
    }
  }
  Recommendation& rec = out.recommendation;
  rec.recommended = attained ? out.table[chosen].duration
                             : static_cast<int>(std::floor(design.d_max));
  rec.d_star_hat = solve_dstar(make_view(curve), target, design).d_star;
  rec.ci = {out.table[chosen].lower, out.table[chosen].upper};
  rec.diagnostics.not_attained = !attained;
  return out;
}

Recommendation recommend_delta(const FittedCurve& curve,
                               const EstimationTarget& target,
                               const TrialDesign& design,
                               const MethodConfig& cfg) {
  return recommend_delta_detail(curve, target, design, cfg).recommendation;
}

TrialDataset bootstrap_resample(const TrialDataset& data, RngStream& stream) {
  const size_t n = data.records.size();
  if (n == 0) throw std::invalid_argument("cannot resample an empty dataset");
  TrialDataset out;
  out.records.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    out.records.push_back(data.records[stream.uniform_below(n)]);
  }
  return out;
}

std::pair<double, double> percentile_interval(std::vector<double> values,
                                              double level) {
  if (values.empty()) {
    throw std::invalid_argument("percentile interval of no values");
  }
  std::sort(values.begin(), values.end());
  const double alpha = 1.0 - level;
  return {quantile_sorted(values, 0.5 * alpha),
          quantile_sorted(values, 1.0 - 0.5 * alpha)};
}

IntervalInfo bca_interval_raw(const std::vector<double>& sorted_boot,
                              double level, double z0, double accel) {
  if (sorted_boot.empty()) {
    throw std::invalid_argument("interval of no values");
  }
  IntervalInfo info;
  info.z0 = z0;
  info.accel = accel;
  const double alpha = 1.0 - level;
  if (z0 == 0.0 && accel == 0.0) {
    // The adjustment is the identity here; skip the quantile/cdf round
    // trip so the result matches the plain percentile interval exactly.
    info.lower = quantile_sorted(sorted_boot, 0.5 * alpha);
    info.upper = quantile_sorted(sorted_boot, 1.0 - 0.5 * alpha);
    return info;
  }
  auto adjusted = [&](double z) {
    const double t = z0 + z;
    return norm_cdf(z0 + t / (1.0 - accel * t));
  };
  const double a1 = adjusted(norm_quantile(0.5 * alpha));
  const double a2 = adjusted(norm_quantile(1.0 - 0.5 * alpha));
  info.lower = quantile_sorted(sorted_boot, a1);
  info.upper = quantile_sorted(sorted_boot, a2);
  return info;
}

IntervalInfo bca_interval(std::vector<double> boot, double theta_hat,
                          const std::vector<double>& jackknife, double level) {
  if (boot.empty()) throw std::invalid_argument("interval of no values");
  std::sort(boot.begin(), boot.end());
  const size_t m = boot.size();

  if (boot.front() == boot.back()) {
    IntervalInfo info;
    info.lower = info.upper = boot.front();
    info.degenerate = true;
    return info;
  }

  size_t below = 0;
  size_t ties = 0;
  for (double v : boot) {
    if (v < theta_hat) {
      ++below;
    } else if (v == theta_hat) {
      ++ties;
    }
  }
  const double q =
      (static_cast<double>(below) + 0.5 * static_cast<double>(ties)) /
      static_cast<double>(m);
  double z0;
  bool clamped = false;
  if (q <= 0.0) {
    z0 = -4.0;
    clamped = true;
  } else if (q >= 1.0) {
    z0 = 4.0;
    clamped = true;
  } else {
    z0 = norm_quantile(q);
    if (z0 > 4.0) {
      z0 = 4.0;
      clamped = true;
    } else if (z0 < -4.0) {
      z0 = -4.0;
      clamped = true;
    }
  }

  double accel = 0;
  if (jackknife.size() >= 2) {
    const double mean =
        std::accumulate(jackknife.begin(), jackknife.end(), 0.0) /
        static_cast<double>(jackknife.size());
    double num = 0;
    double den = 0;
    for (double x : jackknife) {
      const double d = mean - x;
      num += d * d * d;
      den += d * d;
    }
    const double den15 = std::pow(den, 1.5);
    if (den15 > 0) accel = num / (6.0 * den15);
  }

  IntervalInfo info = bca_interval_raw(boot, level, z0, accel);
  info.degenerate = clamped;
  return info;
}

namespace {

struct BootFits {
  std::vector<FittedCurve> fits;
  int requested = 0;
  int dropped = 0;
  int retries = 0;
};

// Refit on resampled data; a failed refit is retried on a fresh draw a
// bounded number of times, then the resample is dropped. Stream (m+1, r)
// drives attempt r for resample m, so results do not depend on how many
// attempts earlier resamples needed.
BootFits run_bootstrap_fits(const TrialDataset& data, const MethodConfig& cfg,
                            const RngStream& rng) {
  BootFits out;
  out.requested = cfg.bootstrap.m;
  out.fits.reserve(static_cast<size_t>(cfg.bootstrap.m));
  for (int m = 0; m < cfg.bootstrap.m; ++m) {
    bool ok = false;
    for (int r = 0;; ++r) {
      RngStream stream =
          rng.child(static_cast<uint64_t>(m) + 1, static_cast<uint64_t>(r));
      const TrialDataset sample = bootstrap_resample(data, stream);
      try {
        out.fits.push_back(select_curve(aggregate(sample), cfg));
        ok = true;
        break;
      } catch (const FitError&) {
        if (r >= cfg.bootstrap.max_retries) break;
        ++out.retries;
      }
    }
    if (!ok) ++out.dropped;
  }
  return out;
}

void fill_bootstrap_diagnostics(const BootFits& bf, Diagnostics* diag) {
  diag->bootstrap_requested = bf.requested;
  diag->bootstrap_dropped = bf.dropped;
  diag->bootstrap_retries = bf.retries;
  diag->unreliable =
      bf.requested > 0 &&
      bf.dropped * 10 > bf.requested;  // over 10% dropped
}

}  // namespace

TableResult recommend_boot_diff_detail(const TrialDataset& data,
                                       const FittedCurve& curve,
                                       const EstimationTarget& target,
                                       const TrialDesign& design,
                                       const MethodConfig& cfg,
                                       const RngStream& rng) {
  require_probability_target(target, "boot-diff");
  const std::vector<int> days = design.integer_durations();
  const size_t n_days = days.size();

  std::vector<double> margin0(n_days);
  {
    const CurveView view = make_view(curve);
    for (size_t i = 0; i < n_days; ++i) {
      margin0[i] = acceptance_rhs(target, view, design, days[i]) -
                   curve.probability(days[i]);
    }
  }

  const BootFits bf = run_bootstrap_fits(data, cfg, rng);
  if (bf.fits.empty()) {
    throw FitError("all bootstrap resamples failed to refit");
  }

  std::vector<std::vector<double>> boot_margin(
      n_days, std::vector<double>(bf.fits.size()));
  for (size_t f = 0; f < bf.fits.size(); ++f) {
    const CurveView view = make_view(bf.fits[f]);
    for (size_t i = 0; i < n_days; ++i) {
      boot_margin[i][f] = acceptance_rhs(target, view, design, days[i]) -
                          bf.fits[f].probability(days[i]);
    }
  }

  // Deletion-group refits, shared across days, feed the acceleration
  // term. Groups that fail to refit are left out.
  const bool use_bca = cfg.bootstrap.interval == "bca";
  std::vector<std::vector<double>> jack_margin(n_days);
  if (use_bca) {
    const int n = static_cast<int>(data.records.size());
    const int groups = std::min(cfg.bootstrap.jackknife_groups, n);
    for (int g = 0; g < groups && groups >= 2; ++g) {
      TrialDataset deletion;
      deletion.records.reserve(data.records.size());
      for (int i = 0; i < n; ++i) {
        if (i % groups != g) deletion.records.push_back(data.records[i]);
      }
      try {
        const FittedCurve fit = select_curve(aggregate(deletion), cfg);
        const CurveView view = make_view(fit);
        for (size_t i = 0; i < n_days; ++i) {
          jack_margin[i].push_back(
              acceptance_rhs(target, view, design, days[i]) -
              fit.probability(days[i]));
        }
      } catch (const FitError&) {
      }
    }
  }

  TableResult out;
  std::vector<bool> row_degenerate(n_days, false);
  for (size_t i = 0; i < n_days; ++i) {
    double lower;
    double upper;
    if (use_bca) {
      const IntervalInfo info = bca_interval(
          boot_margin[i], margin0[i], jack_margin[i], cfg.bootstrap.level);
      lower = info.lower;
      upper = info.upper;
      row_degenerate[i] = info.degenerate;
    } else {
      std::tie(lower, upper) =
          percentile_interval(boot_margin[i], cfg.bootstrap.level);
      row_degenerate[i] =
          *std::min_element(boot_margin[i].begin(), boot_margin[i].end()) ==
          *std::max_element(boot_margin[i].begin(), boot_margin[i].end());
    }
    out.table.push_back({days[i], margin0[i], sample_sd(boot_margin[i]),
                         lower, upper, 0.0, upper < 0.0});
  }

  size_t chosen = out.table.size() - 1;
  bool attained = false;
  for (size_t i = 0; i < out.table.size(); ++i) {
    if (out.table[i].accepted) {
      chosen = i;
      attained = true;
      break;
    }
  }
  Recommendation& rec = out.recommendation;
  rec.recommended = attained ? out.table[chosen].duration
                             : static_cast<int>(std::floor(design.d_max));
  rec.d_star_hat = solve_dstar(make_view(curve), target, design).d_star;
  rec.ci = {out.table[chosen].lower, out.table[chosen].upper};
  fill_bootstrap_diagnostics(bf, &rec.diagnostics);
  rec.diagnostics.degenerate_interval = row_degenerate[chosen];
  rec.diagnostics.not_attained = !attained;
  return out;
}

Recommendation recommend_boot_diff(const TrialDataset& data,
                                   const FittedCurve& curve,
                                   const EstimationTarget& target,
                                   const TrialDesign& design,
                                   const MethodConfig& cfg,
                                   const RngStream& rng) {
  return recommend_boot_diff_detail(data, curve, target, design, cfg, rng)
      .recommendation;
}

Recommendation recommend_boot_duration(const TrialDataset& data,
                                       const FittedCurve& curve,
                                       const EstimationTarget& target,
                                       const TrialDesign& design,
                                       const MethodConfig& cfg,
                                       const RngStream& rng) {
  (void)curve;
  const BootFits bf = run_bootstrap_fits(data, cfg, rng);
  if (bf.fits.empty()) {
    throw FitError("all bootstrap resamples failed to refit");
  }
  std::vector<double> solved;
  solved.reserve(bf.fits.size());
  for (const FittedCurve& fit : bf.fits) {
    solved.push_back(solve_dstar(make_view(fit), target, design).d_star);
  }
  const auto [lower, upper] =
      percentile_interval(solved, cfg.bootstrap.level);

  Recommendation rec;
  rec.recommended = round_up_strict(upper, design, &rec.diagnostics.clamped);
  rec.d_star_hat = std::accumulate(solved.begin(), solved.end(), 0.0) /
                   static_cast<double>(solved.size());
  rec.ci = {lower, upper};
  fill_bootstrap_diagnostics(bf, &rec.diagnostics);
  rec.diagnostics.degenerate_interval =
      *std::min_element(solved.begin(), solved.end()) ==
      *std::max_element(solved.begin(), solved.end());
  return rec;
}

Recommendation recommend_gradient_point(const FittedCurve& curve,
                                        const EstimationTarget& target,
                                        const TrialDesign& design) {
  if (!is_gradient_target(target)) {
    throw std::invalid_argument("gradient-point requires a gradient target");
  }
  const DStarResult solved = solve_dstar(make_view(curve), target, design);
  Recommendation rec;
  rec.d_star_hat = solved.d_star;
  rec.ci = {solved.d_star, solved.d_star};
  if (!solved.attained) {
    rec.recommended = static_cast<int>(std::floor(design.d_max));
    rec.diagnostics.not_attained = true;
  } else {
    rec.recommended =
        round_up_strict(solved.d_star, design, &rec.diagnostics.clamped);
  }
  return rec;
}

Recommendation recommend_with_method(Method method, const TrialDataset& data,
                                     const TrialDesign& design,
                                     const EstimationTarget& target,
                                     const MethodConfig& cfg,
                                     const RngStream& rng) {
  if (!method_supports(method, target)) {
    throw std::invalid_argument("method " + method_to_string(method) +
                                " cannot address target " +
                                target_to_string(target));
  }
  const FittedCurve curve = select_curve(aggregate(data), cfg);
  switch (method) {
    case Method::conf_bands:
      return recommend_conf_bands(curve, target, design, cfg);
    case Method::delta:
      return recommend_delta(curve, target, design, cfg);
    case Method::boot_diff:
      return recommend_boot_diff(data, curve, target, design, cfg, rng);
    case Method::boot_duration:
      return recommend_boot_duration(data, curve, target, design, cfg, rng);
    case Method::gradient_point:
      return recommend_gradient_point(curve, target, design);
  }
  throw std::logic_error("unhandled method");
}

}  // namespace durations
