#pragma once

#include <utility>
#include <vector>

namespace durations {

double expit(double x);  // 1 / (1 + exp(-x)), stable in both tails
double logit(double p);

double norm_cdf(double x);

// Standard normal quantile; throws std::domain_error outside (0, 1).
double norm_quantile(double p);

// P(X > x) for X ~ chi-square with df degrees of freedom.
double chisq_sf(double x, double df);

// Linear-interpolation quantile (the common statistical-package default,
// h = (n-1)q). v must be sorted ascending and nonempty.
double quantile_sorted(const std::vector<double>& v, double q);

// 95% Wald interval for a proportion: p +/- 1.96 * sqrt(p(1-p)/n).
std::pair<double, double> wald_ci(double p, double n);

}  // namespace durations
