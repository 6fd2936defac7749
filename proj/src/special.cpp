#include "bnpreg/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "bnpreg/error.hpp"

namespace bnpreg {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return kInvSqrt2Pi / sd * std::exp(-0.5 * z * z);
}

double normal_logpdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -kLogSqrt2Pi - 0.5 * std::log(variance) - 0.5 * d * d / variance;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_ccdf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double log_normal_interval(double a, double b) {
  if (!(a < b)) return -std::numeric_limits<double>::infinity();
  // Work in whichever tail keeps the difference away from 1 - 1.
  if (a > 0.0) {
    const double qa = normal_ccdf(a);
    const double qb = normal_ccdf(b);
    if (qa > 0.0) return std::log(qa) + std::log1p(-qb / qa);
  } else if (b < 0.0) {
    const double pb = normal_cdf(b);
    const double pa = normal_cdf(a);
    if (pb > 0.0) return std::log(pb) + std::log1p(-pa / pb);
  } else {
    return std::log1p(-normal_cdf(a) - normal_ccdf(b));
  }
  // Both bounds deep in one tail: Mills-ratio expansion of the log density.
  const double lo = std::min(std::fabs(a), std::fabs(b));
  const double hi = std::max(std::fabs(a), std::fabs(b));
  const double log_q_lo = -0.5 * lo * lo - std::log(lo) - kLogSqrt2Pi;
  const double log_q_hi = -0.5 * hi * hi - std::log(hi) - kLogSqrt2Pi;
  return log_q_lo + std::log1p(-std::exp(log_q_hi - log_q_lo));
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double log_bessel_k(double nu, double z) {
  nu = std::fabs(nu);
  if (z < 600.0) {
    const double k = boost::math::cyl_bessel_k(nu, z);
    if (k > 0.0 && std::isfinite(k)) return std::log(k);
  }
  // Hankel expansion: K_nu(z) ~ sqrt(pi/(2z)) e^{-z} (1 + (mu-1)/(8z) + ...)
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double series = 1.0;
  for (int k = 1; k <= 8; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (k * 8.0 * z);
    series += term;
  }
  return 0.5 * std::log(M_PI / (2.0 * z)) - z + std::log(series);
}

double log_beta_pdf(double x, double a, double b) {
  if (!(x > 0.0 && x < 1.0)) return -std::numeric_limits<double>::infinity();
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
         (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x);
}

double log_gamma_pdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) -
         rate * x;
}

double log_inv_gamma_pdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) -
         rate / x;
}

double quantile_sorted(std::span<const double> sorted, double u) {
  if (sorted.empty()) invalid("empty_sample", "quantile of an empty sample");
  if (!(u >= 0.0 && u <= 1.0)) invalid("bad_probability", "quantile level outside [0,1]");
  const double h = u * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> values, double u) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, u);
}

}  // namespace bnpreg
