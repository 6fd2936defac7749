#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Dense>
#include <boost/random/mersenne_twister.hpp>

namespace bnpreg {

// Random source for every sampler in the library. Distributions are built
// fresh for each draw so the engine alone carries the stream state; that is
// what makes save()/restore() sufficient for bit-identical resumption.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  double uniform();                 // (0, 1), never exactly 0
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double sd);
  double exponential();
  double gamma(double shape, double rate);
  double beta(double a, double b);
  // Inverse-gamma with density prop. to x^{-shape-1} exp(-rate / x).
  double inv_gamma(double shape, double rate);
  // GIG with density prop. to x^{p-1} exp(-(a/x + b x)/2), a, b > 0.
  double gig(double a, double b, double p);
  // Normal(mean, sd^2) restricted to [lo, hi]; either bound may be infinite.
  double truncated_normal(double mean, double sd, double lo, double hi);
  double bernoulli_probability(double p) { return uniform() < p ? 1.0 : 0.0; }
  // Index drawn with probability proportional to exp(log_weights[i]).
  std::size_t categorical_log(std::span<const double> log_weights);
  std::size_t uniform_index(std::size_t n);

  Eigen::VectorXd mvn_precision(const Eigen::VectorXd& precision_times_mean,
                                const Eigen::MatrixXd& precision);
  Eigen::VectorXd mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);
  Eigen::MatrixXd inv_wishart(double dof, const Eigen::MatrixXd& scale);

  std::string save() const;
  void restore(const std::string& state);

  // Independent child stream, used for per-task or per-query randomness.
  Rng split(std::uint64_t stream) const;

 private:
  double standard_gig(double lambda, double omega);
  double std_truncated_normal(double a, double b);

  boost::random::mt19937_64 engine_;
};

}  // namespace bnpreg
