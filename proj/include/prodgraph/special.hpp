#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace prodgraph {
namespace detail {

// Regularized lower incomplete gamma P(a, x): series expansion, valid for
// x < a + 1.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 1000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by Lentz continued fraction,
// valid for x >= a + 1.
inline double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double beta_cf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 1000; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h;
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
inline double gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_p: require a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  return x < a + 1.0 ? detail::gamma_p_series(a, x) : 1.0 - detail::gamma_q_cf(a, x);
}

/// Regularized incomplete beta I_x(a, b).
inline double beta_inc(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("beta_inc: require a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - lbeta);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// Chi-square CDF.
inline double chi2_cdf(double x, double dof) {
  return x <= 0.0 ? 0.0 : gamma_p(dof / 2.0, x / 2.0);
}

/// Upper quantile: x with P(chi2(dof) <= x) = prob, via a Wilson-Hilferty
/// start and Newton iterations on the regularized incomplete gamma.
inline double chi2_quantile(int dof, double prob) {
  if (dof < 1) throw std::invalid_argument("chi2_quantile: dof must be >= 1");
  if (prob <= 0.0 || prob >= 1.0) throw std::invalid_argument("chi2_quantile: prob in (0, 1)");
  const double d = static_cast<double>(dof);
  // Wilson-Hilferty normal approximation for the starting point.
  const double p = prob;
  // Inverse standard normal via Acklam-style rational bootstrap is avoided;
  // a crude start plus safeguarded Newton converges fast anyway.
  double z;
  {
    // Beasley-Springer-Moro style start through the logistic approximation.
    const double y = std::log(p / (1.0 - p));
    z = y * 0.6266;
  }
  const double wh = 1.0 - 2.0 / (9.0 * d) + z * std::sqrt(2.0 / (9.0 * d));
  double x = d * wh * wh * wh;
  if (!(x > 0.0)) x = d;

  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const double cdf = chi2_cdf(x, d);
    if (cdf > prob)
      hi = x;
    else
      lo = x;
    const double pdf = std::exp((d / 2.0 - 1.0) * std::log(x) - x / 2.0 -
                                std::lgamma(d / 2.0) - (d / 2.0) * std::log(2.0));
    double step = (cdf - prob) / std::max(pdf, 1e-300);
    double next = x - step;
    if (!(next > lo && (next < hi))) next = std::isinf(hi) ? x * 2.0 : 0.5 * (lo + hi);
    if (std::fabs(next - x) <= 1e-14 * std::max(1.0, x)) return next;
    x = next;
  }
  return x;
}

/// F-distribution CDF via the incomplete beta function.
inline double f_cdf(double x, double d1, double d2) {
  if (x <= 0.0) return 0.0;
  return beta_inc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2));
}

/// Quantile of F(d1, d2) by bracketed bisection/Newton on the CDF.
inline double f_quantile(int d1, int d2, double prob) {
  if (d1 < 1 || d2 < 1) throw std::invalid_argument("f_quantile: dof must be >= 1");
  if (prob <= 0.0 || prob >= 1.0) throw std::invalid_argument("f_quantile: prob in (0, 1)");
  double lo = 0.0, hi = 1.0;
  while (f_cdf(hi, d1, d2) < prob) {
    hi *= 2.0;
    if (hi > 1e12) break;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    const double c = f_cdf(x, d1, d2);
    if (c > prob)
      hi = x;
    else
      lo = x;
    const double next = 0.5 * (lo + hi);
    if (std::fabs(next - x) <= 1e-13 * std::max(1.0, x)) return next;
    x = next;
  }
  return x;
}

}  // namespace prodgraph
