#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "durations/stats.hpp"

using namespace durations;

TEST_CASE("expit and logit invert each other and stay finite in the tails") {
  CHECK(expit(0.0) == 0.5);
  CHECK(logit(0.5) == 0.0);
  CHECK(logit(0.7) == doctest::Approx(0.8472978603872037).epsilon(1e-14));
  CHECK(expit(0.8472978603872037) == doctest::Approx(0.7).epsilon(1e-14));

  for (double p : {1e-12, 1e-4, 0.01, 0.3, 0.5, 0.9, 0.999, 1 - 1e-12}) {
    CHECK(expit(logit(p)) == doctest::Approx(p).epsilon(1e-9));
  }

  CHECK(expit(-800.0) == 0.0);
  CHECK(expit(800.0) == 1.0);
  CHECK(std::isfinite(expit(-37.0)));
  CHECK(expit(-37.0) > 0.0);
}

TEST_CASE("normal quantile hits the textbook value and rejects bad input") {
  CHECK(norm_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(norm_quantile(0.975) ==
        doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(norm_quantile(0.025) ==
        doctest::Approx(-1.959963984540054).epsilon(1e-12));

  for (double p : {0.001, 0.05, 0.3, 0.6, 0.95, 0.9999}) {
    CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  }

  CHECK_THROWS_AS(norm_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS(norm_quantile(1.0), std::domain_error);
  CHECK_THROWS_AS(norm_quantile(-0.2), std::domain_error);
}

TEST_CASE("chi-square survival matches closed forms per df") {
  // df 2: exp(-x/2); df 4: (1 + x/2) exp(-x/2); df 1: 2 (1 - Phi(sqrt x));
  // df 3: erfc(sqrt(x/2)) + sqrt(2x/pi) exp(-x/2).
  for (double x : {0.5, 1.5, 3.84, 7.81, 10.0}) {
    CHECK(chisq_sf(x, 2) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-10));
    CHECK(chisq_sf(x, 4) ==
          doctest::Approx((1 + x / 2) * std::exp(-x / 2)).epsilon(1e-10));
    CHECK(chisq_sf(x, 1) ==
          doctest::Approx(2 * (1 - norm_cdf(std::sqrt(x)))).epsilon(1e-9));
    const double df3 = std::erfc(std::sqrt(x / 2)) +
                       std::sqrt(2 * x / M_PI) * std::exp(-x / 2);
    CHECK(chisq_sf(x, 3) == doctest::Approx(df3).epsilon(1e-9));
  }
  CHECK(chisq_sf(0.0, 2) == doctest::Approx(1.0));
}

TEST_CASE("type-7 quantiles interpolate order statistics") {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 100.0);
  CHECK(quantile_sorted(v, 0.025) == doctest::Approx(3.475).epsilon(1e-12));
  CHECK(quantile_sorted(v, 0.5) == doctest::Approx(50.5).epsilon(1e-12));
  CHECK(quantile_sorted(v, 0.975) == doctest::Approx(97.525).epsilon(1e-12));

  CHECK(quantile_sorted({3.0}, 0.1) == 3.0);
  CHECK(quantile_sorted({3.0}, 0.9) == 3.0);
  CHECK(quantile_sorted({1.0, 2.0}, 0.5) == doctest::Approx(1.5));
}

TEST_CASE("Wald interval is the literal formula on the proportion scale") {
  const double z = 1.96;  // fixed multiplier, not a quantile call
  const auto [lo, hi] = wald_ci(0.048, 1000);
  const double se = std::sqrt(0.048 * 0.952 / 1000);
  CHECK(lo == doctest::Approx(0.048 - z * se).epsilon(1e-12));
  CHECK(hi == doctest::Approx(0.048 + z * se).epsilon(1e-12));

  const auto [zl, zh] = wald_ci(0.0, 300);
  CHECK(zl == 0.0);
  CHECK(zh == 0.0);
  const auto [ol, oh] = wald_ci(1.0, 300);
  CHECK(ol == 1.0);
  CHECK(oh == 1.0);
}
