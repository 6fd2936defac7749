#include <algorithm>
#include <cmath>
#include <limits>

#include "bnpreg/error.hpp"
#include "bnpreg/mcmc.hpp"
#include "bnpreg/special.hpp"

namespace bnpreg {

void SamplerConfig::validate() const {
  if (iterations == 0) invalid("bad_iterations", "the number of iterations must be positive");
  if (thin == 0) invalid("bad_thin", "thin must be at least 1");
  if (burn_in >= iterations) invalid("bad_burn_in", "burn-in must be smaller than the iterations");
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    invalid("bad_adaptation", "target acceptance must lie in (0,1)");
  }
  if (!(adapt_exponent > 0.5 && adapt_exponent <= 1.0)) {
    invalid("bad_adaptation", "adaptation exponent must lie in (0.5, 1]");
  }
  if (max_atoms < 1) invalid("bad_atom_cap", "atom cap must be positive");
}

double arwmh_step(const std::function<double(double)>& log_target, double current,
                  AdaptiveScale& scale, Rng& rng, double target_accept, double adapt_exponent,
                  bool* accepted) {
  const double proposal = current + scale.scale * rng.normal();
  const double lp_new = log_target(proposal);
  const double lp_old = log_target(current);
  bool acc = false;
  if (std::isfinite(lp_new)) {
    if (!std::isfinite(lp_old)) {
      acc = true;
    } else {
      acc = std::log(rng.uniform()) < lp_new - lp_old;
    }
  }
  scale.steps += 1;
  if (acc) scale.accepted += 1;
  const double gamma = std::pow(static_cast<double>(scale.steps), -adapt_exponent);
  scale.scale *= std::exp(gamma * ((acc ? 1.0 : 0.0) - target_accept));
  scale.scale = std::clamp(scale.scale, 1e-12, 1e12);
  if (accepted) *accepted = acc;
  return acc ? proposal : current;
}

double stepping_out_slice(const std::function<double(double)>& log_target, double current,
                          double width, double lo, double hi, Rng& rng, std::size_t max_steps) {
  const double lp0 = log_target(current);
  if (!std::isfinite(lp0)) {
    fail(ErrorKind::numerical, "slice_start_outside",
         "slice sampler started outside the target's support");
  }
  const double level = lp0 - rng.exponential();
  double left = current - width * rng.uniform();
  double right = left + width;
  auto j = static_cast<std::size_t>(std::floor(static_cast<double>(max_steps) * rng.uniform()));
  std::size_t k = max_steps - 1 - j;
  while (j > 0 && left > lo && log_target(left) > level) {
    left -= width;
    --j;
  }
  while (k > 0 && right < hi && log_target(right) > level) {
    right += width;
    --k;
  }
  left = std::max(left, lo);
  right = std::min(right, hi);
  for (int guard = 0; guard < 1000; ++guard) {
    const double x = left + (right - left) * rng.uniform();
    if (x > lo && x < hi && log_target(x) > level) return x;
    if (x < current) {
      left = x;
    } else {
      right = x;
    }
  }
  return current;
}

double escobar_west_alpha(double alpha, std::size_t k, std::size_t n, double a, double b,
                          Rng& rng) {
  if (n == 0 || k == 0) return rng.gamma(a, b);
  const double eta = rng.beta(alpha + 1.0, static_cast<double>(n));
  const double rate = b - std::log(eta);
  const double kk = static_cast<double>(k);
  const double odds = (a + kk - 1.0) / (static_cast<double>(n) * rate);
  const double pi = odds / (1.0 + odds);
  const double shape = rng.uniform() < pi ? a + kk : a + kk - 1.0;
  return rng.gamma(shape, rate);
}

Eigen::VectorXd draw_regression_coefficients(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& w, double sigma2,
                                             double prior_scale2,
                                             const Eigen::VectorXd& prior_var, Rng& rng) {
  const Eigen::MatrixXd Xw = X.transpose() * w.asDiagonal();
  Eigen::MatrixXd Q = Xw * X / sigma2;
  const Eigen::VectorXd b = Xw * y / sigma2;
  for (Eigen::Index k = 0; k < prior_var.size(); ++k) {
    if (std::isfinite(prior_var(k))) Q(k, k) += 1.0 / (prior_scale2 * prior_var(k));
  }
  return rng.mvn_precision(b, Q);
}

void gibbs_linear_block(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& w, const LinearHyper& h, bool fix_sigma2,
                        Eigen::VectorXd& beta, double& sigma2, Rng& rng) {
  const auto p1 = X.cols();
  Eigen::VectorXd prior_var = Eigen::VectorXd::Constant(p1, h.v_beta);
  prior_var(0) = h.flat_intercept ? std::numeric_limits<double>::infinity() : h.v_beta0;
  if (fix_sigma2) {
    sigma2 = 1.0;
    beta = draw_regression_coefficients(X, y, w, 1.0, 1.0, prior_var, rng);
    return;
  }
  beta = draw_regression_coefficients(X, y, w, sigma2, sigma2, prior_var, rng);
  const Eigen::VectorXd r = y - X * beta;
  double ss = r.dot(w.cwiseProduct(r));
  double proper = 0.0;
  for (Eigen::Index k = 0; k < p1; ++k) {
    if (std::isfinite(prior_var(k))) {
      ss += beta(k) * beta(k) / prior_var(k);
      proper += 1.0;
    }
  }
  const double shape = h.a0 / 2.0 + static_cast<double>(X.rows()) / 2.0 + proper / 2.0;
  sigma2 = rng.inv_gamma(shape, h.a0 / 2.0 + ss / 2.0);
}

double impute_censored_value(double mean, double sd, const CensorStatus& c, Rng& rng) {
  return rng.truncated_normal(mean, sd, c.lower(), c.upper());
}

double ssvs_inclusion_probability(double coef, double slab_var, double spike_var,
                                  double prior_inclusion) {
  const double l1 = std::log(prior_inclusion) + normal_logpdf(coef, 0.0, slab_var);
  const double l0 = std::log1p(-prior_inclusion) + normal_logpdf(coef, 0.0, spike_var);
  return 1.0 / (1.0 + std::exp(l0 - l1));
}

}  // namespace bnpreg
