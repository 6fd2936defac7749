#include <doctest.h>

#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "../support.hpp"
#include "bnpreg/models.hpp"
#include "bnpreg/special.hpp"

using namespace bnpreg;
using namespace bnpreg::testing;

namespace {

double ig_logpdf(double x, double a, double b) {
  return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x;
}

double normal_logpdf_direct(double x, double m, double v) {
  return -0.5 * std::log(2.0 * M_PI * v) - 0.5 * (x - m) * (x - m) / v;
}

const DataTable& small_table() {
  static const DataTable t("t", {{"y", {1.0, 2.5, -0.5, 3.0}}, {"x", {0.0, 1.0, -1.0, 2.0}}});
  return t;
}

}  // namespace

TEST_SUITE("models") {

TEST_CASE("linear log-likelihood at a perfect fit") {
  const DataTable t("t", {{"y", {3.0}}, {"x", {2.0}}});
  ModelSpec spec;
  const ModelData d = build_model_data(t, roles_for("y", {"x"}), spec);
  ModelState s;
  s.beta = Eigen::Vector2d(1.0, 1.0);
  s.sigma2 = 1.0;
  CHECK(log_likelihood(spec, s, d) == doctest::Approx(-0.9189385332046727).epsilon(1e-14));
}

TEST_CASE("observation weights scale the kernel precision") {
  const DataTable t1("t", {{"y", {4.0}}, {"x", {2.0}}, {"w", {1.0}}});
  const DataTable t2("t", {{"y", {4.0}}, {"x", {2.0}}, {"w", {2.0}}});
  RoleAssignment r = roles_for("y", {"x"});
  r.weights = "w";
  ModelSpec spec;
  ModelState s;
  s.beta = Eigen::Vector2d(1.0, 1.0);  // residual 1
  s.sigma2 = 1.0;
  const double l1 = log_likelihood(spec, s, build_model_data(t1, r, spec));
  const double l2 = log_likelihood(spec, s, build_model_data(t2, r, spec));
  const double c = 0.9189385332046727;
  // The quadratic term doubles; the normalizer gains 0.5 log 2.
  CHECK(l2 + c - 0.5 * std::log(2.0) == doctest::Approx(2.0 * (l1 + c)).epsilon(1e-14));
}

TEST_CASE("one-atom mixture collapses to the linear likelihood") {
  ModelSpec lin;
  ModelSpec ddp;
  ddp.family = Family::ddp_mixture;
  ddp.target = MixingTarget::intercept_only;
  const ModelData d = build_model_data(small_table(), roles_for("y", {"x"}), ddp);
  ModelState ls;
  ls.beta = Eigen::Vector2d(0.7, 1.1);
  ls.sigma2 = 1.7;
  ModelState ds;
  ds.beta = Eigen::Vector2d(0.0, 1.1);
  ds.sigma2 = 1.7;
  ds.sticks = {0.5};
  ds.atoms = {DdpAtom{Eigen::VectorXd::Constant(1, 0.7), 1.0}};
  ds.z.assign(d.n(), 0);
  const double expected = log_likelihood(lin, ls, d);
  CHECK(log_likelihood(ddp, ds, d) == doctest::Approx(expected).epsilon(1e-13));
  // Marginal over a single weight-one atom.
  ds.z.clear();
  ds.atom_weights = {1.0};
  CHECK(log_likelihood(ddp, ds, d) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("log prior support and stick invariance") {
  ModelSpec ip;
  ip.family = Family::infinite_probits;
  ModelState s;
  s.beta = Eigen::Vector2d(0.0, 0.0);
  s.beta_omega = Eigen::Vector2d(0.0, 0.0);
  s.sigma_mu = ip.ip.b_sigma_mu + 1.0;
  CHECK(log_prior(ip, s) == -kInfinity);

  ModelSpec ddp;
  ddp.family = Family::ddp_mixture;
  ModelState d;
  d.alpha = 1.0;
  d.mu = Eigen::VectorXd::Zero(2);
  d.T = Eigen::MatrixXd::Identity(2, 2);
  d.sticks = {0.3};
  d.atoms = {DdpAtom{Eigen::Vector2d(0.1, 0.2), 1.0}};
  const double a = log_prior(ddp, d);
  d.sticks = {0.9};
  CHECK(log_prior(ddp, d) == doctest::Approx(a).epsilon(1e-14));
}

TEST_CASE("linear log prior matches the direct density") {
  ModelSpec spec;
  spec.linear = {false, 1000.0, 1000.0, 0.002};
  ModelState s;
  s.beta = Eigen::Vector3d(0.5, -2.0, 3.0);
  s.sigma2 = 2.3;
  double expected = normal_logpdf_direct(0.5, 0.0, 2.3 * 1000.0) +
                    normal_logpdf_direct(-2.0, 0.0, 2.3 * 1000.0) +
                    normal_logpdf_direct(3.0, 0.0, 2.3 * 1000.0) + ig_logpdf(2.3, 0.001, 0.001);
  CHECK(log_prior(spec, s) == doctest::Approx(expected).epsilon(1e-10));
  spec.linear.flat_intercept = true;
  expected -= normal_logpdf_direct(0.5, 0.0, 2.3 * 1000.0);
  CHECK(log_prior(spec, s) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("prior densities normalize in single scalars") {
  // sigma^2 of a DDP with mixed coefficients appears only in its IG prior.
  ModelSpec ddp;
  ddp.family = Family::ddp_mixture;
  ddp.target = MixingTarget::coefficients;
  ModelState d;
  d.alpha = 2.0;
  d.mu = Eigen::VectorXd::Zero(2);
  d.T = Eigen::MatrixXd::Identity(2, 2);
  d.sticks = {0.4};
  d.atoms = {DdpAtom{Eigen::Vector2d(0.1, 0.2), 1.0}};
  d.sigma2 = 1.5;
  const double rest_s2 = log_prior(ddp, d) - ig_logpdf(1.5, ddp.ddp.a0 / 2, ddp.ddp.a0 / 2);
  boost::math::quadrature::exp_sinh<double> half_line;
  const double mass_s2 = half_line.integrate([&](double t) {
    ModelState e = d;
    e.sigma2 = t;
    return std::exp(log_prior(ddp, e) - rest_s2);
  });
  CHECK(mass_s2 == doctest::Approx(1.0).epsilon(1e-6));

  // A DP stick: Be(1, alpha).
  const double rest_v = log_prior(ddp, d) - (std::log(2.0) + std::log1p(-0.4));
  boost::math::quadrature::tanh_sinh<double> unit;
  const double mass_v = unit.integrate([&](double v) {
    ModelState e = d;
    e.sticks = {v};
    return std::exp(log_prior(ddp, e) - rest_v);
  }, 0.0, 1.0);
  CHECK(mass_v == doctest::Approx(1.0).epsilon(1e-6));

  // sigma_mu of the infinite-probits model is uniform on (0, b).
  ModelSpec ip;
  ip.family = Family::infinite_probits;
  ModelState s;
  s.beta = Eigen::Vector2d(0.0, 0.0);
  s.beta_omega = Eigen::Vector2d(0.0, 0.0);
  s.sigma2 = 1.0;
  s.sigma_omega = 1.0;
  s.sigma_mu = 1.0;
  const double rest_mu = log_prior(ip, s) + std::log(ip.ip.b_sigma_mu);
  const double mass_mu = unit.integrate([&](double t) {
    ModelState e = s;
    e.sigma_mu = t;
    return std::exp(log_prior(ip, e) - rest_mu);
  }, 0.0, ip.ip.b_sigma_mu);
  CHECK(mass_mu == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("infinite-probits weights") {
  const auto w = ip_mixture_weights(0.0, 1.0, 0, 0);
  CHECK(w[0] == doctest::Approx(0.34134474606854293).epsilon(1e-13));
  const auto all = ip_mixture_weights(0.0, 1.0, -8, 8);
  double total = 0.0;
  for (double v : all) total += v;
  CHECK(std::fabs(total - 1.0) <= 1e-12);
  const auto sharp = ip_mixture_weights(0.5, 1e-9, -3, 3);
  CHECK(sharp[4] == doctest::Approx(1.0));
  CHECK(ip_log_weight(0.0, 1.0, 0) == doctest::Approx(std::log(w[0])).epsilon(1e-13));
}

TEST_CASE("infinite-probits weights are unimodal in j") {
  Rng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    const double center = rng.normal(0.0, 3.0);
    const double scale = rng.uniform(0.2, 4.0);
    const int lo = -30;
    const auto w = ip_mixture_weights(center, scale, lo, 30);
    const int peak = static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());
    for (int j = peak + 1; j < int(w.size()); ++j) CHECK(w[j] <= w[j - 1]);
    for (int j = peak - 1; j >= 0; --j) CHECK(w[j] <= w[j + 1]);
  }
}

TEST_CASE("mixture densities") {
  const std::vector<MixtureComponent> one = {{1.0, 0.5, 2.0}};
  CHECK(mixture_pdf(one, 1.0) == doctest::Approx(normal_pdf(1.0, 0.5, std::sqrt(2.0))).epsilon(1e-15));
  const std::vector<MixtureComponent> two = {{0.5, -3.0, 1.0}, {0.5, 3.0, 1.0}};
  CHECK(mixture_pdf(two, 0.0) == doctest::Approx(0.0044318484119380075).epsilon(1e-13));
  CHECK(mixture_cdf(two, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mixture_cdf(two, 1.0) + mixture_ccdf(two, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mixture_mean(two) == 0.0);
  CHECK(mixture_second_moment(two) == doctest::Approx(10.0));
}

TEST_CASE("fitted mixture densities integrate to one") {
  const DataTable table = general_table();
  for (Family fam : {Family::ddp_mixture, Family::infinite_probits}) {
    for (bool hetero : {false, true}) {
      ModelSpec spec;
      spec.family = fam;
      spec.ip.heteroscedastic = hetero;
      if (hetero) spec.ip.a0 = 2.0;
      if (fam == Family::ddp_mixture && hetero) spec.target = MixingTarget::coefficients_and_variance;
      const auto f = fit_chain(spec, table, roles_for("y", {"x1", "x2"}), 60, 3);
      Eigen::RowVectorXd x(3);
      x << 1.0, 0.4, -1.2;
      const double lo = -25.0;
      const double hi = 25.0;
      const int n = 20000;
      double mass = 0.0;
      double prev = mixture_density(spec, f.chain.params, lo, x);
      for (int k = 1; k <= n; ++k) {
        const double y = lo + (hi - lo) * k / n;
        const double v = mixture_density(spec, f.chain.params, y, x);
        CHECK(v >= 0.0);
        mass += 0.5 * (v + prev) * (hi - lo) / n;
        prev = v;
      }
      CHECK(std::fabs(mass - 1.0) <= 1e-4);
    }
  }
}

TEST_CASE("probit truncation bounds") {
  CHECK(probit_augment_bounds(1.0) == std::pair{0.0, kInfinity});
  CHECK(probit_augment_bounds(0.0) == std::pair{-kInfinity, 0.0});
  CHECK(reason_of([] { probit_augment_bounds(2.0); }) == "non_binary_response");
}

TEST_CASE("model data building") {
  const DataTable t("t", {{"y", {1, 2, kNaN, 4, 5}},
                          {"x", {1, kNaN, 3, 4, 5}},
                          {"g", {1, 1, 2, 2, 2}},
                          {"b", {0, 1, 1, 0, 2}}});
  ModelSpec spec;
  const ModelData d = build_model_data(t, roles_for("y", {"x"}), spec);
  CHECK(d.n() == 3);
  CHECK(d.rows == std::vector<std::size_t>{0, 3, 4});
  CHECK(d.coef_names == std::vector<std::string>{"(Intercept)", "x"});
  CHECK(d.X.col(0).isOnes());

  RoleAssignment grouped = roles_for("y", {"x"});
  grouped.group = "g";
  CHECK(reason_of([&] { build_model_data(t, grouped, spec); }) == "group_not_supported");
  ModelSpec hlm;
  hlm.family = Family::hlm2;
  CHECK(build_model_data(t, grouped, hlm).n_groups() == 2);

  ModelSpec probit;
  probit.link = Link::binary_probit;
  CHECK(reason_of([&] { build_model_data(t, roles_for("b", {"x"}), probit); }) == "non_binary_response");
}

TEST_CASE("spec validation") {
  ModelSpec s;
  s.family = Family::ddp_mixture;
  s.link = Link::binary_probit;
  s.target = MixingTarget::coefficients_and_variance;
  CHECK(reason_of([&] { s.validate(); }) == "probit_mixed_variance");
  ModelSpec h;
  h.linear.v_beta = -1.0;
  CHECK(reason_of([&] { h.validate(); }) == "bad_hyperparameter");
}

TEST_CASE("conditional law of the linear model") {
  ModelSpec spec;
  ModelState s;
  s.beta = Eigen::Vector2d(0.5, 0.25);
  s.sigma2 = 4.0;
  Eigen::RowVectorXd x(2);
  x << 1.0, 2.0;
  const auto mix = conditional_mixture(spec, s, x, 2.0);
  REQUIRE(mix.size() == 1);
  CHECK(mix[0].weight == 1.0);
  CHECK(mix[0].mean == 1.0);
  CHECK(mix[0].var == 2.0);
}

}  // TEST_SUITE
