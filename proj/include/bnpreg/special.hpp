#pragma once

#include <span>
#include <vector>

namespace bnpreg {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_pdf(double x, double mean = 0.0, double sd = 1.0);
double normal_logpdf(double x, double mean, double variance);
double normal_cdf(double x);
// Upper tail 1 - Phi(x), accurate for large positive x.
double normal_ccdf(double x);
double normal_quantile(double p);

// log(Phi(b) - Phi(a)) for a < b, accurate in either tail.
double log_normal_interval(double a, double b);

double log_sum_exp(std::span<const double> values);

// log K_nu(z), z > 0, with an asymptotic branch where cyl_bessel_k underflows.
double log_bessel_k(double nu, double z);

double log_beta_pdf(double x, double a, double b);
double log_gamma_pdf(double x, double shape, double rate);
// Inverse-gamma with density prop. to x^{-shape-1} exp(-rate / x).
double log_inv_gamma_pdf(double x, double shape, double rate);

// Order-statistic quantile with linear interpolation between closest ranks
// (h = (n-1)u). `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double u);
double quantile(std::vector<double> values, double u);

}  // namespace bnpreg
