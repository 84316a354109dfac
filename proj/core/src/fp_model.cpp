#include "durations/fp_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

#include "durations/stats.hpp"

namespace durations {

namespace {

double fp_pow(double d, double p) {
  if (p == 1) return d;
  if (p == 2) return d * d;
  if (p == 3) return d * d * d;
  if (p == -1) return 1.0 / d;
  if (p == -2) return 1.0 / (d * d);
  if (p == 0.5) return std::sqrt(d);
  if (p == -0.5) return 1.0 / std::sqrt(d);
  return std::pow(d, p);
}

std::string power_str(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", p);
  return buf;
}

}  // namespace

std::string FpPowers::label() const {
  if (n_terms == 0) return "null";
  if (n_terms == 1) return "(" + power_str(p1) + ")";
  return "(" + power_str(p1) + ", " + power_str(p2) + ")";
}

std::vector<FpPowers> all_fp2_pairs() {
  std::vector<FpPowers> out;
  out.reserve(36);
  for (std::size_t i = 0; i < kFpPowerSet.size(); ++i)
    for (std::size_t j = i; j < kFpPowerSet.size(); ++j)
      out.push_back(FpPowers::fp2(kFpPowerSet[i], kFpPowerSet[j]));
  return out;
}

std::vector<FpPowers> all_fp1_singles() {
  std::vector<FpPowers> out;
  out.reserve(kFpPowerSet.size());
  for (double p : kFpPowerSet) out.push_back(FpPowers::fp1(p));
  return out;
}

double fp_transform(double d, double p) {
  if (!(d > 0)) throw std::domain_error("fp_transform: duration must be positive");
  if (p == 0) return std::log(d);
  return fp_pow(d, p);
}

int fp_row(const FpPowers& powers, double d, double* out) {
  if (!(d > 0)) throw std::domain_error("fp_row: duration must be positive");
  out[0] = 1.0;
  if (powers.n_terms == 0) return 1;
  const double t1 = powers.p1 == 0 ? std::log(d) : fp_pow(d, powers.p1);
  out[1] = t1;
  if (powers.n_terms == 1) return 2;
  if (powers.p1 == powers.p2)
    out[2] = t1 * std::log(d);
  else
    out[2] = powers.p2 == 0 ? std::log(d) : fp_pow(d, powers.p2);
  return 3;
}

int fp_row_deriv(const FpPowers& powers, double d, double* out) {
  if (!(d > 0)) throw std::domain_error("fp_row_deriv: duration must be positive");
  out[0] = 0.0;
  if (powers.n_terms == 0) return 1;
  auto dterm = [d](double p) {
    return p == 0 ? 1.0 / d : p * fp_pow(d, p - 1);
  };
  if (powers.repeated()) {
    const double p = powers.p1;
    if (p == 0) {
      out[1] = 1.0 / d;
      out[2] = 2.0 * std::log(d) / d;
    } else {
      out[1] = dterm(p);
      out[2] = fp_pow(d, p - 1) * (p * std::log(d) + 1.0);
    }
    return 3;
  }
  out[1] = dterm(powers.p1);
  if (powers.n_terms == 1) return 2;
  out[2] = dterm(powers.p2);
  return 3;
}

Eigen::MatrixXd build_design_matrix(const std::vector<double>& durations,
                                    const FpPowers& powers) {
  Eigen::MatrixXd x(durations.size(), powers.column_count());
  double row[3];
  for (std::size_t i = 0; i < durations.size(); ++i) {
    const int m = fp_row(powers, durations[i], row);
    for (int j = 0; j < m; ++j) x(static_cast<Eigen::Index>(i), j) = row[j];
  }
  return x;
}

namespace {

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// -2 log-likelihood of the grouped Bernoulli model at beta.
double deviance_at(const Eigen::MatrixXd& x, const Eigen::VectorXd& s,
                   const Eigen::VectorXd& n, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  double ll = 0;
  for (Eigen::Index k = 0; k < eta.size(); ++k)
    ll += s[k] * eta[k] - n[k] * softplus(eta[k]);
  return -2.0 * ll;
}

}  // namespace

IrlsResult fit_logistic_irls_grouped(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& s,
                                     const Eigen::VectorXd& n,
                                     const IrlsControls& ctl) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index m = x.cols();
  if (rows != s.size() || rows != n.size())
    throw std::invalid_argument("irls: row count mismatch");

  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < m)
      throw FitError("design matrix is rank deficient: " +
                     std::to_string(qr.rank()) + " of " + std::to_string(m) +
                     " identifiable parameters");
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
  double dev = deviance_at(x, s, n, beta);
  bool converged = false;
  bool diverged = false;

  Eigen::MatrixXd a(rows + m, m);
  Eigen::VectorXd b(rows + m);
  const double ridge_sqrt = std::sqrt(ctl.ridge);

  for (int it = 0; it < ctl.max_iter; ++it) {
    const Eigen::VectorXd eta = x * beta;
    for (Eigen::Index k = 0; k < rows; ++k) {
      double mu = expit(eta[k]);
      mu = std::clamp(mu, ctl.mu_clamp, 1.0 - ctl.mu_clamp);
      const double w = n[k] * mu * (1.0 - mu);
      const double sw = std::sqrt(w);
      a.row(k) = sw * x.row(k);
      b[k] = sw * (eta[k] + (s[k] - n[k] * mu) / w);
    }
    a.bottomRows(m) = ridge_sqrt * Eigen::MatrixXd::Identity(m, m);
    b.tail(m).setZero();

    const Eigen::VectorXd proposal = a.colPivHouseholderQr().solve(b);
    Eigen::VectorXd step = proposal - beta;

    // Halve the step while it increases the deviance.
    Eigen::VectorXd cand = proposal;
    double dev_new = deviance_at(x, s, n, cand);
    for (int h = 0; h < 30 && dev_new > dev + 1e-10; ++h) {
      step *= 0.5;
      cand = beta + step;
      dev_new = deviance_at(x, s, n, cand);
    }

    const double delta = (cand - beta).lpNorm<Eigen::Infinity>();
    beta = cand;
    dev = dev_new;

    if ((x * beta).lpNorm<Eigen::Infinity>() > ctl.eta_guard) {
      diverged = true;  // separation: probabilities pinned to the clamp
      break;
    }
    if (delta < ctl.tol) {
      converged = true;
      break;
    }
  }

  // Observed information at the final coefficients (plus the ridge guard).
  Eigen::MatrixXd info = ctl.ridge * Eigen::MatrixXd::Identity(m, m);
  const Eigen::VectorXd eta = x * beta;
  for (Eigen::Index k = 0; k < rows; ++k) {
    double mu = expit(eta[k]);
    mu = std::clamp(mu, ctl.mu_clamp, 1.0 - ctl.mu_clamp);
    info.noalias() += (n[k] * mu * (1.0 - mu)) *
                      (x.row(k).transpose() * x.row(k));
  }
  Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(m, m));
  cov = 0.5 * (cov + cov.transpose()).eval();

  IrlsResult r;
  r.coef = beta;
  r.covariance = cov;
  r.deviance = dev;
  r.converged = converged && !diverged;
  return r;
}

IrlsResult fit_logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const IrlsControls& ctl) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] != 0.0 && y[i] != 1.0)
      throw std::invalid_argument("irls: outcomes must be 0 or 1");
  return fit_logistic_irls_grouped(x, y, Eigen::VectorXd::Ones(y.size()), ctl);
}

double FittedCurve::linear_predictor(double d) const {
  double row[3];
  const int m = fp_row(powers, d, row);
  double eta = 0;
  for (int j = 0; j < m; ++j) eta += coef[j] * row[j];
  return eta;
}

double FittedCurve::probability(double d) const {
  return expit(linear_predictor(d));
}

double FittedCurve::gradient(double d) const {
  double row[3];
  double drow[3];
  const int m = fp_row(powers, d, row);
  fp_row_deriv(powers, d, drow);
  double eta = 0;
  double deta = 0;
  for (int j = 0; j < m; ++j) {
    eta += coef[j] * row[j];
    deta += coef[j] * drow[j];
  }
  const double mu = expit(eta);
  return mu * (1.0 - mu) * deta;
}

namespace {

double quad_form(const Eigen::MatrixXd& cov, const double* row, int m) {
  double q = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) q += row[i] * cov(i, j) * row[j];
  return q;
}

}  // namespace

double FittedCurve::pointwise_se(double d) const {
  double row[3];
  const int m = fp_row(powers, d, row);
  double eta = 0;
  for (int j = 0; j < m; ++j) eta += coef[j] * row[j];
  const double mu = expit(eta);
  const double q = quad_form(covariance, row, m);
  return mu * (1.0 - mu) * std::sqrt(std::max(q, 0.0));
}

double FittedCurve::pointwise_se_eta(double d) const {
  double row[3];
  const int m = fp_row(powers, d, row);
  return std::sqrt(std::max(quad_form(covariance, row, m), 0.0));
}

Eigen::VectorXd FittedCurve::design_row(double d) const {
  double row[3];
  const int m = fp_row(powers, d, row);
  Eigen::VectorXd v(m);
  for (int j = 0; j < m; ++j) v[j] = row[j];
  return v;
}

FittedCurve fit_fp(const AggregatedData& agg, int n_obs, const FpPowers& powers,
                   const IrlsControls& ctl) {
  const Eigen::Index k = static_cast<Eigen::Index>(agg.size());
  const Eigen::MatrixXd x = build_design_matrix(agg.durations, powers);
  const Eigen::VectorXd s =
      Eigen::Map<const Eigen::VectorXd>(agg.successes.data(), k);
  const Eigen::VectorXd n =
      Eigen::Map<const Eigen::VectorXd>(agg.trials.data(), k);
  const IrlsResult r = fit_logistic_irls_grouped(x, s, n, ctl);
  FittedCurve curve;
  curve.powers = powers;
  curve.coef = r.coef;
  curve.covariance = r.covariance;
  curve.deviance = r.deviance;
  curve.converged = r.converged;
  curve.n_obs = n_obs;
  return curve;
}

FittedCurve fit_fp(const TrialDataset& data, const FpPowers& powers,
                   const IrlsControls& ctl) {
  if (data.empty()) throw FitError("empty dataset");
  return fit_fp(aggregate(data), static_cast<int>(data.size()), powers, ctl);
}

FittedCurve select_fp2_exhaustive(const AggregatedData& agg, int n_obs,
                                  const IrlsControls& ctl) {
  std::optional<FittedCurve> best;
  for (const FpPowers& pw : all_fp2_pairs()) {
    FittedCurve fit;
    try {
      fit = fit_fp(agg, n_obs, pw, ctl);
    } catch (const FitError&) {
      continue;
    }
    if (!fit.converged) continue;
    if (!best || fit.deviance < best->deviance - 1e-8) best = std::move(fit);
  }
  if (!best)
    throw FitError("no two-term fractional-polynomial candidate converged");
  return *best;
}

FittedCurve select_fp2_exhaustive(const TrialDataset& data,
                                  const IrlsControls& ctl) {
  if (data.empty()) throw FitError("empty dataset");
  return select_fp2_exhaustive(aggregate(data), static_cast<int>(data.size()),
                               ctl);
}

FittedCurve select_fp_closed_test(const AggregatedData& agg, int n_obs,
                                  double sig_level, const IrlsControls& ctl) {
  FittedCurve best2 = select_fp2_exhaustive(agg, n_obs, ctl);

  const auto significant = [&](const FittedCurve& simpler, double df) {
    const double diff = simpler.deviance - best2.deviance;
    return chisq_sf(diff, df) < sig_level;
  };

  // Against the intercept-only model, 4 df.
  try {
    const FittedCurve null_fit = fit_fp(agg, n_obs, FpPowers::null_model(), ctl);
    if (null_fit.converged && !significant(null_fit, 4)) return null_fit;
  } catch (const FitError&) {
  }

  // Against the straight line, 3 df.
  try {
    const FittedCurve linear = fit_fp(agg, n_obs, FpPowers::fp1(1), ctl);
    if (linear.converged && !significant(linear, 3)) return linear;
  } catch (const FitError&) {
  }

  // Against the best single-term model, 2 df.
  std::optional<FittedCurve> best1;
  for (const FpPowers& pw : all_fp1_singles()) {
    try {
      FittedCurve fit = fit_fp(agg, n_obs, pw, ctl);
      if (!fit.converged) continue;
      if (!best1 || fit.deviance < best1->deviance - 1e-8) best1 = std::move(fit);
    } catch (const FitError&) {
    }
  }
  if (best1 && !significant(*best1, 2)) return *best1;

  return best2;
}

FittedCurve select_fp_closed_test(const TrialDataset& data, double sig_level,
                                  const IrlsControls& ctl) {
  if (data.empty()) throw FitError("empty dataset");
  return select_fp_closed_test(aggregate(data), static_cast<int>(data.size()),
                               sig_level, ctl);
}

}  // namespace durations
