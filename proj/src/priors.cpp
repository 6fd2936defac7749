#include "bnpreg/priors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "bnpreg/error.hpp"
#include "bnpreg/special.hpp"

namespace bnpreg {

namespace {

constexpr double kLog2Pi = 1.83787706640934548356;

// A second shape of exactly zero (stable index 0) pins the stick at 1.
double draw_stick(double a, double b, Rng& rng) { return b == 0.0 ? 1.0 : rng.beta(a, b); }

}  // namespace

std::string to_string(StickFamily f) {
  switch (f) {
    case StickFamily::dp: return "dp";
    case StickFamily::pitman_yor: return "pitman_yor";
    case StickFamily::normalized_stable: return "normalized_stable";
    case StickFamily::beta2: return "beta2";
    case StickFamily::geometric: return "geometric";
    case StickFamily::nig: return "nig";
  }
  return "dp";
}

StickFamily stick_family_from_string(const std::string& s) {
  for (auto f : {StickFamily::dp, StickFamily::pitman_yor, StickFamily::normalized_stable,
                 StickFamily::beta2, StickFamily::geometric, StickFamily::nig}) {
    if (to_string(f) == s) return f;
  }
  invalid("unknown_stick_family", "unknown stick-breaking family " + s);
}

StickPriorSpec StickPriorSpec::dp(double alpha) {
  StickPriorSpec s;
  s.family = StickFamily::dp;
  s.alpha = alpha;
  return s;
}

StickPriorSpec StickPriorSpec::pitman_yor(double a, double b) {
  StickPriorSpec s;
  s.family = StickFamily::pitman_yor;
  s.a = a;
  s.b = b;
  return s;
}

StickPriorSpec StickPriorSpec::normalized_stable(double a) {
  StickPriorSpec s;
  s.family = StickFamily::normalized_stable;
  s.a = a;
  s.b = 0.0;
  return s;
}

StickPriorSpec StickPriorSpec::beta2(double a, double b) {
  StickPriorSpec s;
  s.family = StickFamily::beta2;
  s.a = a;
  s.b = b;
  return s;
}

StickPriorSpec StickPriorSpec::geometric(double a, double b) {
  StickPriorSpec s;
  s.family = StickFamily::geometric;
  s.a = a;
  s.b = b;
  return s;
}

StickPriorSpec StickPriorSpec::nig(double c) {
  StickPriorSpec s;
  s.family = StickFamily::nig;
  s.c = c;
  return s;
}

void StickPriorSpec::validate() const {
  switch (family) {
    case StickFamily::dp:
      if (!(alpha > 0.0)) invalid("bad_hyperparameter", "DP precision must be positive");
      break;
    case StickFamily::pitman_yor:
      if (!(a >= 0.0 && a < 1.0)) invalid("bad_hyperparameter", "PY discount must lie in [0,1)");
      if (!(b > -a)) invalid("bad_hyperparameter", "PY strength must exceed -discount");
      break;
    case StickFamily::normalized_stable:
      if (!(a >= 0.0 && a < 1.0)) invalid("bad_hyperparameter", "stable index must lie in [0,1)");
      if (b != 0.0) invalid("bad_hyperparameter", "normalized stable has strength 0");
      break;
    case StickFamily::beta2:
    case StickFamily::geometric:
      if (!(a > 0.0 && b > 0.0)) invalid("bad_hyperparameter", "beta shapes must be positive");
      break;
    case StickFamily::nig:
      if (!(c > 0.0)) invalid("bad_hyperparameter", "NIG parameter c must be positive");
      break;
  }
}

bool StickPriorSpec::beta_sticks() const {
  return family == StickFamily::dp || family == StickFamily::pitman_yor ||
         family == StickFamily::normalized_stable || family == StickFamily::beta2;
}

double StickPriorSpec::stick_a(std::size_t j) const {
  (void)j;
  switch (family) {
    case StickFamily::dp: return 1.0;
    case StickFamily::pitman_yor:
    case StickFamily::normalized_stable: return 1.0 - a;
    default: return a;
  }
}

double StickPriorSpec::stick_b(std::size_t j) const {
  switch (family) {
    case StickFamily::dp: return alpha;
    case StickFamily::pitman_yor:
    case StickFamily::normalized_stable: return b + static_cast<double>(j) * a;
    default: return b;
  }
}

WeightSequence weights_from_sticks(std::span<const double> sticks) {
  WeightSequence w;
  w.sticks.assign(sticks.begin(), sticks.end());
  w.weights.resize(sticks.size());
  double rest = 1.0;
  for (std::size_t j = 0; j < sticks.size(); ++j) {
    w.weights[j] = sticks[j] * rest;
    rest *= 1.0 - sticks[j];
  }
  w.truncation_mass = rest;
  return w;
}

double nig_stick_log_density(double v, double c, std::size_t j, double log_remaining) {
  if (!(v > 0.0 && v < 1.0)) return -std::numeric_limits<double>::infinity();
  const double log_a = 2.0 * std::log(c) - log_remaining;
  const double a = std::exp(log_a);
  const double p = -0.5 * static_cast<double>(j);
  const double q = p - 0.5;
  const double log_big_a = -std::log1p(-v);  // 1 / (1 - v)
  return 0.25 * log_a + 0.5 * q * log_big_a + log_bessel_k(q, std::sqrt(a * std::exp(log_big_a))) -
         log_bessel_k(p, std::sqrt(a)) - 0.5 * kLog2Pi - 0.5 * std::log(v) -
         1.5 * std::log1p(-v);
}

// X has density prop. to x^{-j/2-1} exp(-(a x + 1/x)/2) with a = c^2 / prod_{l<j}(1 - v_l),
// and Y = 1 / chi^2_1.
double draw_nig_stick(double c, std::size_t j, double log_remaining, Rng& rng) {
  const double a = c * c * std::exp(-log_remaining);
  const double x = rng.gig(1.0, a, -0.5 * static_cast<double>(j));
  const double y = 1.0 / rng.gamma(0.5, 0.5);
  double v = x / (x + y);
  const double hi = std::nextafter(1.0, 0.0);
  if (!(v > 1e-300)) v = 1e-300;
  if (v > hi) v = hi;
  return v;
}

namespace {

struct StickStream {
  const StickPriorSpec& spec;
  Rng& rng;
  double geometric_v = -1.0;
  double log_remaining = 0.0;

  double next(std::size_t j) {
    double v = 0.0;
    if (spec.beta_sticks()) {
      v = draw_stick(spec.stick_a(j), spec.stick_b(j), rng);
    } else if (spec.family == StickFamily::geometric) {
      if (geometric_v < 0.0) geometric_v = rng.beta(spec.a, spec.b);
      v = geometric_v;
    } else {
      v = draw_nig_stick(spec.c, j, log_remaining, rng);
    }
    log_remaining += std::log1p(-v);
    return v;
  }
};

}  // namespace

WeightSequence draw_sticks(const StickPriorSpec& spec, std::size_t J, Rng& rng) {
  spec.validate();
  if (J == 0) invalid("bad_truncation", "at least one stick is required");
  StickStream stream{spec, rng};
  std::vector<double> sticks(J);
  for (std::size_t j = 0; j < J; ++j) sticks[j] = stream.next(j + 1);
  return weights_from_sticks(sticks);
}

WeightSequence draw_sticks_until(const StickPriorSpec& spec, Rng& rng, double tol,
                                 std::size_t max_sticks) {
  spec.validate();
  StickStream stream{spec, rng};
  std::vector<double> sticks;
  double rest = 1.0;
  while (rest >= tol && sticks.size() < max_sticks) {
    const double v = stream.next(sticks.size() + 1);
    sticks.push_back(v);
    rest *= 1.0 - v;
  }
  return weights_from_sticks(sticks);
}

PartitionState PartitionState::from_sizes(const std::vector<int>& sizes) {
  PartitionState p;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] <= 0) invalid("bad_partition", "cluster sizes must be positive");
    p.sizes.push_back(sizes[c]);
    for (int i = 0; i < sizes[c]; ++i) p.allocations.push_back(static_cast<int>(c));
  }
  return p;
}

std::vector<double> py_allocation_probs(double a, double b, const PartitionState& partition) {
  if (!(a >= 0.0 && a < 1.0) || !(b > -a)) {
    invalid("bad_hyperparameter", "Pitman-Yor parameters outside 0 <= a < 1, b > -a");
  }
  const std::size_t n = partition.n();
  const std::size_t k = partition.k();
  std::vector<double> out(k + 1);
  if (n == 0) {
    out[0] = 1.0;
    return out;
  }
  const double denom = b + static_cast<double>(n);
  out[0] = (b + a * static_cast<double>(k)) / denom;
  for (std::size_t c = 0; c < k; ++c) out[c + 1] = (partition.sizes[c] - a) / denom;
  return out;
}

namespace {

// log of P(m, N) = int_c^inf t^{m-1} e^{-t} (t^2 - c^2)^N dt. All terms are
// positive, so this avoids the alternating incomplete-gamma sums entirely.
double log_positive_moment(double m, int N, double c) {
  auto log_f = [&](double x) {
    const double t = c + x;
    double v = (m - 1.0) * std::log(t) - t;
    if (N > 0) v += N * (std::log(x) + std::log(x + 2.0 * c));
    return v;
  };
  // Locate the peak on a log grid to fix the scale and the split point.
  const double upper = 10.0 * (2.0 * N + std::fabs(m) + c + 10.0);
  const int grid = 600;
  double best_x = 0.0;
  double best = N == 0 ? log_f(0.0) : -std::numeric_limits<double>::infinity();
  const double l0 = std::log(1e-12);
  const double l1 = std::log(upper);
  for (int g = 0; g <= grid; ++g) {
    const double x = std::exp(l0 + (l1 - l0) * g / grid);
    const double v = log_f(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  auto f = [&](double x) {
    if (x <= 0.0) return N == 0 ? std::exp(log_f(0.0) - best) : 0.0;
    const double v = log_f(x) - best;
    return v < -745.0 ? 0.0 : std::exp(v);
  };
  double left = 0.0;
  if (best_x > 0.0) {
    boost::math::quadrature::tanh_sinh<double> ts;
    left = ts.integrate(f, 0.0, best_x, 1e-15);
  }
  boost::math::quadrature::exp_sinh<double> es;
  const double right = es.integrate([&](double x) { return f(x); }, best_x,
                                    std::numeric_limits<double>::infinity(), 1e-15);
  const double total = left + right;
  if (!(total > 0.0) || !std::isfinite(total)) {
    fail(ErrorKind::numerical, "quadrature_failed", "NIG weight integral did not converge");
  }
  return best + std::log(total);
}

}  // namespace

NigWeights nig_allocation_weights(double c, int n, int k) {
  if (!(c > 0.0)) invalid("bad_hyperparameter", "NIG parameter c must be positive");
  if (n < 1 || k < 1 || k > n) invalid("bad_partition", "need 1 <= k <= n");
  if (n > kNigMaxN) {
    fail(ErrorKind::numerical, "out_of_range", "NIG weights are supported for n <= 500");
  }
  const double denom = log_positive_moment(k + 2.0 - 2.0 * n, n - 1, c);
  const double num0 = log_positive_moment(k + 1.0 - 2.0 * n, n, c);
  const double num1 = log_positive_moment(k - 2.0 * n, n, c);
  NigWeights w;
  w.w0 = std::exp(num0 - denom) / (2.0 * n);
  w.w1 = std::exp(num1 - denom) / n;
  return w;
}

std::vector<double> nig_allocation_probs(double c, const PartitionState& partition) {
  const std::size_t k = partition.k();
  std::vector<double> out(k + 1);
  if (partition.n() == 0) {
    out[0] = 1.0;
    return out;
  }
  const auto w = nig_allocation_weights(c, static_cast<int>(partition.n()), static_cast<int>(k));
  out[0] = w.w0;
  for (std::size_t j = 0; j < k; ++j) out[j + 1] = w.w1 * (partition.sizes[j] - 0.5);
  return out;
}

namespace {

PartitionState simulate_sequential(std::size_t n, Rng& rng,
                                   const std::function<std::vector<double>(const PartitionState&)>& rule) {
  PartitionState p;
  for (std::size_t i = 0; i < n; ++i) {
    const auto probs = rule(p);
    std::vector<double> logs(probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j) {
      logs[j] = probs[j] > 0.0 ? std::log(probs[j]) : -std::numeric_limits<double>::infinity();
    }
    const std::size_t pick = rng.categorical_log(logs);
    if (pick == 0) {
      p.sizes.push_back(1);
      p.allocations.push_back(static_cast<int>(p.sizes.size() - 1));
    } else {
      ++p.sizes[pick - 1];
      p.allocations.push_back(static_cast<int>(pick - 1));
    }
  }
  return p;
}

}  // namespace

PartitionState simulate_partition_py(double a, double b, std::size_t n, Rng& rng) {
  return simulate_sequential(
      n, rng, [&](const PartitionState& p) { return py_allocation_probs(a, b, p); });
}

PartitionState simulate_partition_nig(double c, std::size_t n, Rng& rng) {
  if (n > static_cast<std::size_t>(kNigMaxN) + 1) {
    fail(ErrorKind::numerical, "out_of_range", "NIG partitions are supported for n <= 501");
  }
  return simulate_sequential(
      n, rng, [&](const PartitionState& p) { return nig_allocation_probs(c, p); });
}

MomentCheck dp_moment_check(double alpha, double p, std::size_t draws, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) invalid("bad_probability", "event probability outside [0,1]");
  if (draws < 2) invalid("too_few_draws", "at least two draws are needed");
  const auto spec = StickPriorSpec::dp(alpha);
  std::vector<double> g(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    const auto w = draw_sticks_until(spec, rng);
    double mass = 0.0;
    for (double wj : w.weights) {
      if (rng.uniform() < p) mass += wj;
    }
    g[d] = mass;
  }
  const double n = static_cast<double>(draws);
  double mean = 0.0;
  for (double x : g) mean += x;
  mean /= n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double x : g) {
    const double d2 = (x - mean) * (x - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  const double var = m2 / (n - 1.0);
  m4 /= n;
  MomentCheck out;
  out.mean = mean;
  out.variance = var;
  out.mean_se = std::sqrt(var / n);
  out.variance_se = std::sqrt(std::max(0.0, m4 - (m2 / n) * (m2 / n)) / n);
  return out;
}

}  // namespace bnpreg
