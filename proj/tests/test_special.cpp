#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "prodgraph/special.hpp"

using namespace prodgraph;

namespace {

// Independent oracle: chi-square CDF by Simpson integration of the density
// under the substitution x = u^2, which removes the dof = 1 endpoint
// singularity, then quantile by bisection.
double chi2_pdf(double x, double d) {
  return std::exp((d / 2.0 - 1.0) * std::log(x) - x / 2.0 - std::lgamma(d / 2.0) -
                  (d / 2.0) * std::log(2.0));
}

double chi2_cdf_oracle(double x, double d) {
  if (x <= 0) return 0;
  const double upper = std::sqrt(x);
  const int n = 20000;  // even
  const double h = upper / n;
  auto f = [&](double u) { return u == 0.0 ? 0.0 : chi2_pdf(u * u, d) * 2.0 * u; };
  double s = f(0) + f(upper);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

double chi2_quantile_oracle(int dof, double prob) {
  double lo = 0, hi = 1;
  while (chi2_cdf_oracle(hi, dof) < prob) hi *= 2;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf_oracle(mid, dof) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double f_pdf(double x, double d1, double d2) {
  const double lb = std::lgamma(d1 / 2) + std::lgamma(d2 / 2) - std::lgamma((d1 + d2) / 2);
  return std::exp((d1 / 2) * std::log(d1 / d2) + (d1 / 2 - 1) * std::log(x) -
                  ((d1 + d2) / 2) * std::log1p(d1 * x / d2) - lb);
}

double f_cdf_oracle(double x, double d1, double d2) {
  if (x <= 0) return 0;
  const double upper = std::sqrt(x);
  const int n = 40000;
  const double h = upper / n;
  auto f = [&](double u) { return u == 0.0 ? 0.0 : f_pdf(u * u, d1, d2) * 2.0 * u; };
  double s = f(0) + f(upper);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("chi2 quantile against the integration oracle") {
  for (int dof : {1, 2, 3, 5, 10, 40}) {
    for (double p : {0.5, 0.9, 0.95, 0.99}) {
      const double ours = chi2_quantile(dof, p);
      const double oracle = chi2_quantile_oracle(dof, p);
      CHECK(std::abs(ours - oracle) / oracle < 1e-6);
    }
  }
  CHECK(std::abs(chi2_quantile(1, 0.90) - 2.70554) < 1e-4);
}

TEST_CASE("chi2 with two degrees of freedom is exponential") {
  for (double p : {0.1, 0.5, 0.9, 0.99, 0.999})
    CHECK(std::abs(chi2_quantile(2, p) - (-2.0 * std::log1p(-p))) < 1e-10);
}

TEST_CASE("chi2 quantile monotonicity") {
  for (int dof : {1, 3, 7}) {
    double prev = 0;
    for (double p = 0.05; p < 0.999; p += 0.05) {
      const double q = chi2_quantile(dof, p);
      CHECK(q > prev);
      prev = q;
    }
  }
  for (double p : {0.6, 0.9, 0.99}) {
    double prev = 0;
    for (int dof = 1; dof <= 30; ++dof) {
      const double q = chi2_quantile(dof, p);
      CHECK(q > prev);
      prev = q;
    }
  }
}

TEST_CASE("chi2 quantile round-trips through the CDF") {
  for (int dof : {1, 4, 9, 25})
    for (double p : {0.2, 0.5, 0.9, 0.995})
      CHECK(std::abs(chi2_cdf(chi2_quantile(dof, p), dof) - p) < 1e-10);
}

TEST_CASE("F quantile against the integration oracle") {
  for (auto [d1, d2] : {std::pair{1, 10}, {2, 10}, {3, 50}, {5, 200}}) {
    for (double p : {0.5, 0.9, 0.95}) {
      const double ours = f_quantile(d1, d2, p);
      double lo = 0, hi = 1;
      while (f_cdf_oracle(hi, d1, d2) < p) hi *= 2;
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f_cdf_oracle(mid, d1, d2) < p ? lo : hi) = mid;
      }
      const double oracle = 0.5 * (lo + hi);
      CHECK(std::abs(ours - oracle) / oracle < 1e-5);
    }
  }
}

TEST_CASE("F with large denominator dof approaches scaled chi2") {
  for (int p1 : {1, 3, 6})
    CHECK(std::abs(f_quantile(p1, 2000000, 0.9) - chi2_quantile(p1, 0.9) / p1) < 2e-4);
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(chi2_quantile(0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(chi2_quantile(3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(f_quantile(1, 0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(gamma_p(-1.0, 2.0), std::invalid_argument);
}
