#include "bnpreg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "bnpreg/error.hpp"
#include "bnpreg/special.hpp"
#include "bnpreg/text.hpp"

namespace bnpreg {

namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double estimate(std::span<const double> v, Estimand e, double u) {
  switch (e) {
    case Estimand::mean: return mean_of(v);
    case Estimand::sd: return sd_of(v);
    case Estimand::quantile: return quantile(std::vector<double>(v.begin(), v.end()), u);
  }
  return 0.0;
}

}  // namespace

double batch_means_mcci(std::span<const double> draws, Estimand estimand, double u,
                        double confidence) {
  const std::size_t S = draws.size();
  if (S < 16) {
    invalid("insufficient_samples", "batch means need at least 16 draws, got " + std::to_string(S));
  }
  const auto b = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(S))));
  const std::size_t start = S - b * b;
  std::vector<double> values;
  for (std::size_t k = 0; k < b; ++k) {
    values.push_back(estimate(draws.subspan(start + k * b, b), estimand, u));
  }
  const double s = sd_of(values);
  if (s == 0.0) return 0.0;
  const boost::math::students_t t(static_cast<double>(b - 1));
  const double q = boost::math::quantile(t, 0.5 + confidence / 2.0);
  return q * s / std::sqrt(static_cast<double>(b));
}

double cusum_hairiness(std::span<const double> draws) {
  const std::size_t S = draws.size();
  if (S < 3) return 0.0;
  const double m = mean_of(draws);
  auto sign = [&](double x) { return x > m ? 1 : (x < m ? -1 : 0); };
  std::size_t turns = 0;
  for (std::size_t t = 1; t + 1 < S; ++t) {
    const int a = sign(draws[t]);
    const int b = sign(draws[t + 1]);
    if (a != 0 && b != 0 && a != b) ++turns;
  }
  return static_cast<double>(turns) / static_cast<double>(S - 2);
}

std::vector<std::size_t> kept_rows(const SampleStore& store, std::uint64_t burn_in,
                                   std::uint64_t thin) {
  if (thin == 0) invalid("bad_thin", "thin must be at least 1");
  std::vector<std::size_t> out;
  std::uint64_t seen = 0;
  for (std::size_t r = 0; r < store.n_draws(); ++r) {
    if (store.iteration(r) <= burn_in) continue;
    if (seen++ % thin == 0) out.push_back(r);
  }
  return out;
}

SummaryRow summarize_draws(const std::string& name, std::span<const double> draws) {
  SummaryRow row;
  row.name = name;
  row.draws = draws.size();
  if (draws.empty()) invalid("no_draws", "no draws remain after burn-in and thinning");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  row.mean = mean_of(draws);
  row.sd = sd_of(draws);
  row.median = quantile_sorted(sorted, 0.5);
  row.q025 = quantile_sorted(sorted, 0.025);
  row.q25 = quantile_sorted(sorted, 0.25);
  row.q75 = quantile_sorted(sorted, 0.75);
  row.q975 = quantile_sorted(sorted, 0.975);
  row.hairiness = cusum_hairiness(draws);
  if (draws.size() >= 16) {
    row.half_width = {batch_means_mcci(draws, Estimand::mean),
                      batch_means_mcci(draws, Estimand::quantile, 0.5),
                      batch_means_mcci(draws, Estimand::sd),
                      batch_means_mcci(draws, Estimand::quantile, 0.025),
                      batch_means_mcci(draws, Estimand::quantile, 0.25),
                      batch_means_mcci(draws, Estimand::quantile, 0.75),
                      batch_means_mcci(draws, Estimand::quantile, 0.975)};
  } else {
    row.half_width.assign(7, std::numeric_limits<double>::quiet_NaN());
  }
  return row;
}

std::vector<SummaryRow> summarize(const SampleStore& store, std::uint64_t burn_in,
                                  std::uint64_t thin) {
  if (store.empty()) invalid("no_draws", "the chain has not been run");
  const auto rows = kept_rows(store, burn_in, thin);
  std::vector<SummaryRow> out;
  for (std::size_t k = 0; k < store.names().size(); ++k) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (std::size_t r : rows) v.push_back(store.row(r)[k]);
    out.push_back(summarize_draws(store.names()[k], v));
  }
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string s = "parameter,mean,median,sd,2.5%,25%,75%,97.5%\n";
  for (const auto& r : rows) {
    s += r.name;
    for (double v : {r.mean, r.median, r.sd, r.q025, r.q25, r.q75, r.q975}) {
      s += "," + format_double(v);
    }
    s += "\n";
  }
  return s;
}

std::string summary_text(const std::vector<SummaryRow>& rows) {
  std::size_t width = 9;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %11s %11s %11s %11s %11s %11s %11s\n",
                static_cast<int>(width), "parameter", "mean", "median", "sd", "2.5%", "25%",
                "75%", "97.5%");
  s += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s %11.4g %11.4g %11.4g %11.4g %11.4g %11.4g %11.4g\n",
                  static_cast<int>(width), r.name.c_str(), r.mean, r.median, r.sd, r.q025, r.q25,
                  r.q75, r.q975);
    s += buf;
  }
  return s;
}

std::string diagnostics_csv(const std::vector<SummaryRow>& rows) {
  std::string s =
      "parameter,draws,hw_mean,hw_median,hw_sd,hw_2.5%,hw_25%,hw_75%,hw_97.5%,hairiness\n";
  for (const auto& r : rows) {
    s += r.name + "," + std::to_string(r.draws);
    for (double v : r.half_width) s += "," + format_double(v);
    s += "," + format_double(r.hairiness) + "\n";
  }
  return s;
}

std::vector<std::pair<std::uint64_t, double>> trace(const SampleStore& store,
                                                    const std::string& name,
                                                    std::size_t window) {
  std::vector<std::pair<std::uint64_t, double>> out;
  const std::size_t n = store.n_draws();
  const auto k = store.index_of(name);
  if (!k) fail(ErrorKind::not_found, "unknown_parameter", "no parameter named " + name);
  if (n == 0) return out;
  const std::size_t m = std::min(n, std::max<std::size_t>(window, 2));
  if (m == n) {
    for (std::size_t r = 0; r < n; ++r) out.emplace_back(store.iteration(r), store.row(r)[*k]);
    return out;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto r = static_cast<std::size_t>(std::llround(static_cast<double>(i) *
                                                         static_cast<double>(n - 1) /
                                                         static_cast<double>(m - 1)));
    out.emplace_back(store.iteration(r), store.row(r)[*k]);
  }
  return out;
}

}  // namespace bnpreg
