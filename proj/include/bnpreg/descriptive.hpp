#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace bnpreg {

inline constexpr std::array<double, 5> kSummaryLevels = {0.025, 0.25, 0.5, 0.75, 0.975};

struct UnivariateSummary {
  std::size_t n_nonmissing = 0;
  double mean = 0.0;
  double sd = 0.0;
  bool sd_defined = false;  // false when fewer than two values
  double min = 0.0;
  double max = 0.0;
  std::array<double, 5> quantiles{};  // at kSummaryLevels
};

// Missing (NaN) entries are skipped by every function below.
UnivariateSummary univariate_summary(std::span<const double> values);

double fd_bin_width(std::span<const double> values);
std::pair<double, double> scott_bivariate_binwidths(std::span<const double> x,
                                                    std::span<const double> y);
double silverman_bandwidth(std::span<const double> values);

// Normal-kernel density estimate. Bandwidth <= 0 means "use Silverman".
std::vector<double> kde(std::span<const double> values, std::span<const double> grid,
                        double bandwidth = 0.0);

double kernel_regression_bandwidth(std::span<const double> x, std::span<const double> y);
// Nadaraya-Watson with normal kernels at the automatic bandwidth.
std::vector<double> kernel_regression(std::span<const double> x, std::span<const double> y,
                                      std::span<const double> grid);

struct HistogramBin {
  double left;
  double right;
  std::size_t count;
};
std::vector<HistogramBin> histogram(std::span<const double> values, double width = 0.0);

// Width used when a spread estimate is zero: max(scaled epsilon, range / sqrt(n)).
double degenerate_width(std::span<const double> values);

std::vector<double> present_values(std::span<const double> values);

}  // namespace bnpreg
