#include "bnpreg/descriptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bnpreg/dataframe.hpp"
#include "bnpreg/error.hpp"
#include "bnpreg/special.hpp"

namespace bnpreg {

namespace {

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double mad(const std::vector<double>& v) {
  const double m = median_of(v);
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::fabs(v[i] - m);
  return median_of(std::move(dev));
}

std::vector<double> nonempty(std::span<const double> values) {
  auto v = present_values(values);
  if (v.empty()) invalid("empty_column", "no non-missing values");
  return v;
}

}  // namespace

std::vector<double> present_values(std::span<const double> values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) {
    if (!is_missing(v)) out.push_back(v);
  }
  return out;
}

UnivariateSummary univariate_summary(std::span<const double> values) {
  auto v = nonempty(values);
  std::sort(v.begin(), v.end());
  UnivariateSummary s;
  s.n_nonmissing = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  s.sd_defined = v.size() >= 2;
  s.sd = sample_sd(v);
  s.min = v.front();
  s.max = v.back();
  for (std::size_t k = 0; k < kSummaryLevels.size(); ++k) {
    s.quantiles[k] = quantile_sorted(v, kSummaryLevels[k]);
  }
  return s;
}

double degenerate_width(std::span<const double> values) {
  auto v = present_values(values);
  if (v.empty()) return 1.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double scale = std::max({1.0, std::fabs(*lo), std::fabs(*hi)});
  const double eps = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  return std::max(eps, (*hi - *lo) / std::sqrt(static_cast<double>(v.size())));
}

double fd_bin_width(std::span<const double> values) {
  auto v = nonempty(values);
  std::sort(v.begin(), v.end());
  const double iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
  if (!(iqr > 0.0)) return degenerate_width(v);
  return 2.0 * iqr * std::cbrt(1.0 / static_cast<double>(v.size()));
}

std::pair<double, double> scott_bivariate_binwidths(std::span<const double> x,
                                                    std::span<const double> y) {
  if (x.size() != y.size()) invalid("length_mismatch", "x and y differ in length");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!is_missing(x[i]) && !is_missing(y[i])) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
  }
  if (xs.empty()) invalid("empty_column", "no complete (x, y) pairs");
  const double factor = 3.5 * std::pow(static_cast<double>(xs.size()), -0.25);
  auto width = [&](const std::vector<double>& v) {
    const double sd = sample_sd(v);
    return sd > 0.0 ? sd * factor : degenerate_width(v);
  };
  return {width(xs), width(ys)};
}

double silverman_bandwidth(std::span<const double> values) {
  auto v = nonempty(values);
  const double sd = sample_sd(v);
  if (!(sd > 0.0)) return degenerate_width(v);
  return 1.06 * sd * std::pow(static_cast<double>(v.size()), -0.2);
}

std::vector<double> kde(std::span<const double> values, std::span<const double> grid,
                        double bandwidth) {
  auto v = nonempty(values);
  const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(v);
  const double norm = 1.0 / (static_cast<double>(v.size()) * h);
  std::vector<double> out(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (double x : v) s += normal_pdf((grid[g] - x) / h);
    out[g] = s * norm;
  }
  return out;
}

double kernel_regression_bandwidth(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) invalid("length_mismatch", "x and y differ in length");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!is_missing(x[i]) && !is_missing(y[i])) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
  }
  if (xs.empty()) invalid("empty_column", "no complete (x, y) pairs");
  const double n = static_cast<double>(xs.size());
  const double shrink = std::pow(4.0 / (3.0 * n), 0.2);
  auto axis = [&](const std::vector<double>& v) {
    const double m = mad(v);
    return m > 0.0 ? m / 0.6745 * shrink : 0.0;
  };
  double hx = axis(xs);
  double hy = axis(ys);
  const auto [xlo, xhi] = std::minmax_element(xs.begin(), xs.end());
  if (*xlo == *xhi) invalid("degenerate_bandwidth", "all x values are identical");
  if (hx == 0.0) hx = degenerate_width(xs);
  if (hy == 0.0) hy = degenerate_width(ys);
  return std::sqrt(hx * hy);
}

std::vector<double> kernel_regression(std::span<const double> x, std::span<const double> y,
                                      std::span<const double> grid) {
  const double h = kernel_regression_bandwidth(x, y);
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!is_missing(x[i]) && !is_missing(y[i])) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
  }
  std::vector<double> out(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double z = (grid[g] - xs[i]) / h;
      const double k = std::exp(-0.5 * z * z);
      num += k * ys[i];
      den += k;
    }
    if (den > 0.0) {
      out[g] = num / den;
    } else {
      // All weights underflowed: take y at the nearest x (first one on ties).
      std::size_t best = 0;
      for (std::size_t i = 1; i < xs.size(); ++i) {
        if (std::fabs(grid[g] - xs[i]) < std::fabs(grid[g] - xs[best])) best = i;
      }
      out[g] = ys[best];
    }
  }
  return out;
}

std::vector<HistogramBin> histogram(std::span<const double> values, double width) {
  auto v = nonempty(values);
  const double h = width > 0.0 ? width : fd_bin_width(v);
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const auto bins = static_cast<std::size_t>(std::floor((*hi - *lo) / h)) + 1;
  if (bins > 100000) invalid("too_many_bins", "bin width is too small for the data range");
  std::vector<HistogramBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b] = {*lo + h * static_cast<double>(b), *lo + h * static_cast<double>(b + 1), 0};
  }
  for (double x : v) {
    auto b = static_cast<std::size_t>(std::floor((x - *lo) / h));
    if (b >= bins) b = bins - 1;
    ++out[b].count;
  }
  return out;
}

}  // namespace bnpreg
