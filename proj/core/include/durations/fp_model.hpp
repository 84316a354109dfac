#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "durations/design.hpp"

namespace durations {

// Candidate powers for fractional-polynomial terms; p = 0 stands for ln D.
inline constexpr std::array<double, 8> kFpPowerSet = {-2, -1, -0.5, 0,
                                                      0.5, 1,  2,    3};

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 0, 1 or 2 fractional-polynomial terms. Two-term powers are stored in
// nondecreasing order, so (p1, p2) and (p2, p1) compare equal. A repeated
// power p contributes the columns D^p and D^p * ln D.
struct FpPowers {
  int n_terms = 0;
  double p1 = 0;
  double p2 = 0;

  static FpPowers null_model() { return {}; }
  static FpPowers fp1(double p) { return {1, p, 0}; }
  static FpPowers fp2(double a, double b) {
    return a <= b ? FpPowers{2, a, b} : FpPowers{2, b, a};
  }

  bool repeated() const { return n_terms == 2 && p1 == p2; }
  int column_count() const { return 1 + n_terms; }  // intercept included
  bool operator==(const FpPowers&) const = default;
  std::string label() const;
};

// All 36 two-term power combinations, in nondecreasing lexicographic order.
std::vector<FpPowers> all_fp2_pairs();
// The 8 single-term models.
std::vector<FpPowers> all_fp1_singles();

// D^p, with p = 0 meaning ln D. Throws std::domain_error for D <= 0.
double fp_transform(double d, double p);

// Fills out[0..column_count): intercept then FP terms. Returns the count.
int fp_row(const FpPowers& powers, double d, double* out);
// Derivative of each fp_row entry with respect to D.
int fp_row_deriv(const FpPowers& powers, double d, double* out);

// One row per duration, intercept first.
Eigen::MatrixXd build_design_matrix(const std::vector<double>& durations,
                                    const FpPowers& powers);

struct IrlsControls {
  int max_iter = 50;
  double tol = 1e-8;         // max |coef change|
  double mu_clamp = 1e-10;   // fitted probabilities kept in [clamp, 1-clamp]
  double ridge = 1e-8;       // added to the information diagonal
  double eta_guard = 30.0;   // max |linear predictor| before declaring separation
};

struct IrlsResult {
  Eigen::VectorXd coef;
  Eigen::MatrixXd covariance;  // inverse observed information at coef
  double deviance = 0;         // -2 log-likelihood, Bernoulli form
  bool converged = false;
};

// Bernoulli-logit maximum likelihood; y entries must be 0 or 1.
IrlsResult fit_logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const IrlsControls& controls = {});

// Grouped form: successes out of trials per row. Same likelihood as the
// record-level fit of the expanded data.
IrlsResult fit_logistic_irls_grouped(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& successes,
                                     const Eigen::VectorXd& trials,
                                     const IrlsControls& controls = {});

struct FittedCurve {
  FpPowers powers;
  Eigen::VectorXd coef;
  Eigen::MatrixXd covariance;
  double deviance = 0;
  bool converged = false;
  int n_obs = 0;

  double linear_predictor(double d) const;
  double probability(double d) const;
  double gradient(double d) const;  // d pi / d D, analytic
  // Standard error of the fitted probability (delta method).
  double pointwise_se(double d) const;
  // Standard error of the linear predictor.
  double pointwise_se_eta(double d) const;
  Eigen::VectorXd design_row(double d) const;
};

FittedCurve fit_fp(const TrialDataset& data, const FpPowers& powers,
                   const IrlsControls& controls = {});
FittedCurve fit_fp(const AggregatedData& agg, int n_obs, const FpPowers& powers,
                   const IrlsControls& controls = {});

// Fits all 36 two-term candidates and keeps the converged fit with the
// smallest deviance; ties within 1e-8 go to the earlier pair in canonical
// order. Throws FitError when no candidate converges.
FittedCurve select_fp2_exhaustive(const TrialDataset& data,
                                  const IrlsControls& controls = {});
FittedCurve select_fp2_exhaustive(const AggregatedData& agg, int n_obs,
                                  const IrlsControls& controls = {});

// Closed-test selection: best two-term model tested against the null
// (4 df), the linear model (3 df) and the best single-term model (2 df);
// the first non-significant comparison returns the simpler model.
// sig_level = 1 degenerates to the exhaustive two-term choice.
FittedCurve select_fp_closed_test(const TrialDataset& data,
                                  double sig_level = 0.05,
                                  const IrlsControls& controls = {});
FittedCurve select_fp_closed_test(const AggregatedData& agg, int n_obs,
                                  double sig_level = 0.05,
                                  const IrlsControls& controls = {});

}  // namespace durations
