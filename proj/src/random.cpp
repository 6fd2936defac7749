#include "bnpreg/random.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "bnpreg/error.hpp"
#include "bnpreg/special.hpp"

namespace bnpreg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

double Rng::uniform() {
  boost::random::uniform_01<double> dist;
  double u = 0.0;
  do {
    u = dist(engine_);
  } while (u <= 0.0);
  return u;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

double Rng::normal(double mean, double sd) { return mean + sd * normal(); }

double Rng::exponential() { return -std::log(uniform()); }

namespace {

// log of a Gamma(shape, 1) variate. Marsaglia-Tsang for shape >= 1, and the
// shape+1 boost u^{1/shape} for shape < 1 (kept in log space so tiny shapes
// do not underflow to zero).
double log_std_gamma(Rng& rng, double shape) {
  if (shape < 1.0) {
    return log_std_gamma(rng, shape + 1.0) + std::log(rng.uniform()) / shape;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return std::log(d * v);
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

}  // namespace

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0 && rate > 0.0)) invalid("bad_gamma", "gamma parameters must be positive");
  return std::exp(log_std_gamma(*this, shape)) / rate;
}

double Rng::beta(double a, double b) {
  if (!(a > 0.0 && b > 0.0)) invalid("bad_beta", "beta parameters must be positive");
  const double la = log_std_gamma(*this, a);
  const double lb = log_std_gamma(*this, b);
  double x = 1.0 / (1.0 + std::exp(lb - la));
  // Sticks at exactly 0 or 1 would break log-densities downstream.
  constexpr double lo = 1e-300;
  const double hi = std::nextafter(1.0, 0.0);
  if (x < lo) x = lo;
  if (x > hi) x = hi;
  return x;
}

double Rng::inv_gamma(double shape, double rate) {
  if (!(shape > 0.0 && rate > 0.0)) {
    invalid("bad_inv_gamma", "inverse-gamma parameters must be positive");
  }
  return rate * std::exp(-log_std_gamma(*this, shape));
}

// Devroye (2014) rejection sampler for the two-parameter GIG with density
// prop. to x^{lambda-1} exp(-omega (x + 1/x) / 2), lambda >= 0.
double Rng::standard_gig(double lambda, double omega) {
  const double alpha = std::sqrt(omega * omega + lambda * lambda) - lambda;
  auto psi = [&](double x) {
    return -alpha * (std::cosh(x) - 1.0) - lambda * (std::exp(x) - x - 1.0);
  };
  auto dpsi = [&](double x) { return -alpha * std::sinh(x) - lambda * (std::exp(x) - 1.0); };

  double t = 1.0;
  double x = -psi(1.0);
  if (x > 2.0) {
    t = std::sqrt(2.0 / (alpha + lambda));
  } else if (x < 0.5) {
    t = std::log(4.0 / (alpha + 2.0 * lambda));
  }
  double s = 1.0;
  x = -psi(-1.0);
  if (x > 2.0) {
    s = std::sqrt(4.0 / (alpha * std::cosh(1.0) + lambda));
  } else if (x < 0.5) {
    const double cap = lambda > 0.0 ? 1.0 / lambda : kInf;
    s = std::min(cap, std::log(1.0 + 1.0 / alpha + std::sqrt(1.0 / (alpha * alpha) + 2.0 / alpha)));
  }

  const double eta = -psi(t);
  const double zeta = -dpsi(t);
  const double theta = -psi(-s);
  const double xi = dpsi(-s);
  const double p = 1.0 / xi;
  const double r = 1.0 / zeta;
  const double td = t - r * eta;
  const double sd = s - p * theta;
  const double q = td + sd;

  for (;;) {
    const double u = uniform();
    const double v = uniform();
    const double w = uniform();
    double xx = 0.0;
    if (u < q / (p + q + r)) {
      xx = -sd + q * v;
    } else if (u < (q + r) / (p + q + r)) {
      xx = td - r * std::log(v);
    } else {
      xx = -sd + p * std::log(v);
    }
    double chi = 1.0;
    if (xx > td) {
      chi = std::exp(-eta - zeta * (xx - t));
    } else if (xx < -sd) {
      chi = std::exp(-theta + xi * (xx + s));
    }
    if (w * chi <= std::exp(psi(xx))) {
      const double ratio = lambda / omega;
      return (ratio + std::sqrt(1.0 + ratio * ratio)) * std::exp(xx);
    }
  }
}

double Rng::gig(double a, double b, double p) {
  if (!(a > 0.0 && b > 0.0)) invalid("bad_gig", "GIG parameters a and b must be positive");
  const double omega = std::sqrt(a * b);
  const double scale = std::sqrt(a / b);
  if (omega < 1e-10) {
    // Degenerates to a gamma (p > 0) or inverse-gamma (p < 0) law.
    if (p > 0.0) return gamma(p, b / 2.0);
    if (p < 0.0) return inv_gamma(-p, a / 2.0);
  }
  if (p >= 0.0) return scale * standard_gig(p, omega);
  return scale / standard_gig(-p, omega);
}

double Rng::std_truncated_normal(double a, double b) {
  if (a == -kInf && b == kInf) return normal();
  if (b == kInf) {
    if (a <= 0.45) {
      for (;;) {
        const double z = normal();
        if (z >= a) return z;
      }
    }
    // Robert (1995) translated-exponential proposal.
    const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      const double z = a + exponential() / rate;
      const double d = z - rate;
      if (uniform() <= std::exp(-0.5 * d * d)) return z;
    }
  }
  if (a == -kInf) return -std_truncated_normal(-b, kInf);

  if (a >= 0.0 || b <= 0.0) {
    // Both bounds on one side: invert in that tail.
    const bool upper = a >= 0.0;
    const double lo = upper ? a : -b;
    const double hi = upper ? b : -a;
    const double q_lo = normal_ccdf(lo);
    const double q_hi = normal_ccdf(hi);
    double z = 0.0;
    if (q_lo > 1e-280 && q_lo - q_hi > 1e-12 * q_lo) {
      const double u = q_hi + (q_lo - q_hi) * uniform();
      z = -normal_quantile(u);
    } else {
      // Deep tail or a sliver of an interval: exponential proposal on
      // [lo, hi] with the exact accept ratio, falling back to uniform.
      if (hi - lo < 1.0 / lo) {
        for (;;) {
          z = lo + (hi - lo) * uniform();
          if (uniform() <= std::exp(-0.5 * (z * z - lo * lo))) break;
        }
      } else {
        for (;;) {
          z = lo + exponential() / lo;
          if (z > hi) continue;
          const double d = z - lo;
          if (uniform() <= std::exp(-0.5 * d * d)) break;
        }
      }
    }
    z = std::clamp(z, lo, hi);
    return upper ? z : -z;
  }
  const double pa = normal_cdf(a);
  const double pb = normal_cdf(b);
  const double z = normal_quantile(pa + (pb - pa) * uniform());
  return std::clamp(z, a, b);
}

double Rng::truncated_normal(double mean, double sd, double lo, double hi) {
  if (!(lo < hi)) invalid("bad_truncation", "truncation interval is empty");
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  const double x = mean + sd * std_truncated_normal(a, b);
  return std::clamp(x, lo, hi);
}

std::size_t Rng::categorical_log(std::span<const double> log_weights) {
  if (log_weights.empty()) invalid("empty_categorical", "no categories to draw from");
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(top)) {
    fail(ErrorKind::numerical, "non_finite_weights", "categorical weights are all zero or non-finite");
  }
  std::vector<double> cumulative(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    total += std::exp(log_weights[i] - top);
    cumulative[i] = total;
  }
  const double target = uniform() * total;
  for (std::size_t i = 0; i < cumulative.size(); ++i) {
    if (target < cumulative[i]) return i;
  }
  return cumulative.size() - 1;
}

std::size_t Rng::uniform_index(std::size_t n) {
  auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return i < n ? i : n - 1;
}

Eigen::VectorXd Rng::mvn_precision(const Eigen::VectorXd& precision_times_mean,
                                   const Eigen::MatrixXd& precision) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::numerical, "not_positive_definite", "precision matrix is not positive definite");
  }
  const Eigen::VectorXd mean = llt.solve(precision_times_mean);
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal();
  // x = mean + L^{-T} z has covariance (L L^T)^{-1}.
  return mean + llt.matrixU().solve(z);
}

Eigen::VectorXd Rng::mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::numerical, "not_positive_definite", "covariance matrix is not positive definite");
  }
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal();
  return mean + llt.matrixL() * z;
}

Eigen::MatrixXd Rng::inv_wishart(double dof, const Eigen::MatrixXd& scale) {
  const Eigen::Index d = scale.rows();
  if (!(dof > static_cast<double>(d) - 1.0)) {
    invalid("bad_wishart", "inverse-Wishart degrees of freedom too small");
  }
  // W ~ Wishart(dof, scale^{-1}) by Bartlett, then invert.
  Eigen::LLT<Eigen::MatrixXd> llt(scale.inverse());
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::numerical, "not_positive_definite", "inverse-Wishart scale is not positive definite");
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(2.0 * gamma(0.5 * (dof - static_cast<double>(i)), 1.0));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal();
  }
  const Eigen::MatrixXd la = llt.matrixL() * a;
  const Eigen::MatrixXd w = la * la.transpose();
  Eigen::MatrixXd out = w.inverse();
  return 0.5 * (out + out.transpose());
}

std::string Rng::save() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::restore(const std::string& state) {
  // The engine reader skips whitespace after every word, which fails at EOF.
  std::istringstream is(state + " ");
  is >> engine_;
  if (!is) invalid("bad_rng_state", "could not parse random engine state");
}

Rng Rng::split(std::uint64_t stream) const {
  auto copy = engine_;
  const std::uint64_t base = copy();
  return Rng(splitmix64(base ^ splitmix64(stream + 1)));
}

}  // namespace bnpreg
