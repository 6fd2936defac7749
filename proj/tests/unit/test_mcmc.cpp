#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "../support.hpp"
#include "bnpreg/diagnostics.hpp"
#include "bnpreg/mcmc.hpp"
#include "bnpreg/special.hpp"

using namespace bnpreg;
using namespace bnpreg::testing;

namespace {

// Kolmogorov-Smirnov distance of a sample to a continuous cdf.
double ks_distance(std::vector<double> v, const std::function<double(double)>& cdf) {
  std::sort(v.begin(), v.end());
  const double n = double(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double F = cdf(v[i]);
    d = std::max({d, std::fabs(F - double(i) / n), std::fabs(double(i + 1) / n - F)});
  }
  return d;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * double(i + j);
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = double(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_SUITE("mcmc") {

TEST_CASE("sampler config validation") {
  SamplerConfig c;
  c.thin = 0;
  CHECK(reason_of([&] { c.validate(); }) == "bad_thin");
  c = SamplerConfig{};
  c.burn_in = c.iterations;
  CHECK(reason_of([&] { c.validate(); }) == "bad_burn_in");
}

TEST_CASE("flat intercept with one observation centres on it") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(1, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 3.0);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(1);
  double sigma2 = 1e-20;
  Rng rng(1);
  gibbs_linear_block(X, y, w, LinearHyper{}, false, beta, sigma2, rng);
  CHECK(beta(0) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("prior-only linear block has IG(a0/2, a0/2) variance") {
  LinearHyper h{false, 1.0, 1.0, 10.0};
  Eigen::MatrixXd X(0, 1);
  Eigen::VectorXd y(0);
  Eigen::VectorXd w(0);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(1);
  double sigma2 = 1.0;
  Rng rng(2);
  std::vector<double> draws;
  for (int t = 0; t < 40000; ++t) {
    gibbs_linear_block(X, y, w, h, false, beta, sigma2, rng);
    draws.push_back(sigma2);
  }
  const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / draws.size();
  // IG(5, 5): mean 5/4.
  CHECK(std::fabs(mean - 1.25) < 2.0 * batch_means_mcci(draws, Estimand::mean));
}

TEST_CASE("linear posterior concentrates on the truth") {
  Rng rng(3);
  const std::size_t n = 2000;
  std::vector<double> y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    y[i] = -1.0 + 0.5 * x[i] + rng.normal(0.0, 2.0);
  }
  const auto f = fit_chain(ModelSpec{}, DataTable("t", {{"y", y}, {"x", x}}), roles_for("y", {"x"}), 2000, 4);
  for (auto [name, truth] : {std::pair{"beta:(Intercept)", -1.0}, std::pair{"beta:x", 0.5}}) {
    const auto d = f.store.column(name);
    const auto s = summarize_draws(name, d);
    CHECK(std::fabs(s.mean - truth) < 3.0 * s.sd);
  }
}

TEST_CASE("Escobar-West update") {
  Rng rng(5);
  // n = 1, k = 1 under Gamma(1, 1): the conditional law is Exp(1).
  std::vector<double> v;
  double alpha = 1.0;
  for (int t = 0; t < 100000; ++t) {
    alpha = escobar_west_alpha(alpha, 1, 1, 1.0, 1.0, rng);
    CHECK(alpha > 0.0);
    v.push_back(alpha);
  }
  CHECK(ks_distance(v, [](double a) { return 1.0 - std::exp(-a); }) <= 0.02);

  // n = 10, k = 4: p(alpha) prop. to alpha^k e^-alpha / prod_{i<n} (alpha + i).
  auto dens = [](double a) {
    double lp = 4.0 * std::log(a) - a;
    for (int i = 0; i < 10; ++i) lp -= std::log(a + i);
    return std::exp(lp);
  };
  const int grid = 200000;
  const double top = 60.0;
  std::vector<double> cdf(grid + 1, 0.0);
  for (int g = 1; g <= grid; ++g) {
    const double a0 = top * (g - 1) / grid;
    const double a1 = top * g / grid;
    cdf[g] = cdf[g - 1] + 0.5 * (dens(a0) + dens(a1)) * (a1 - a0);
  }
  for (double& c : cdf) c /= cdf.back();
  auto oracle = [&](double a) {
    if (a >= top) return 1.0;
    const double pos = a / top * grid;
    const auto g = static_cast<std::size_t>(pos);
    return cdf[g] + (pos - g) * (cdf[g + 1] - cdf[g]);
  };
  v.clear();
  for (int t = 0; t < 100000; ++t) {
    alpha = escobar_west_alpha(alpha, 4, 10, 1.0, 1.0, rng);
    v.push_back(alpha);
  }
  CHECK(ks_distance(v, oracle) <= 0.02);

  // More clusters give larger precision draws.
  std::vector<double> ks, as;
  for (int r = 0; r < 10000; ++r) {
    const auto k = 1 + rng.uniform_index(20);
    ks.push_back(double(k));
    as.push_back(escobar_west_alpha(1.0, k, 20, 1.0, 1.0, rng));
  }
  CHECK(pearson(ranks(ks), ranks(as)) > 0.0);
}

TEST_CASE("adaptive random-walk Metropolis") {
  Rng rng(6);
  AdaptiveScale sc;
  double x = 0.0;
  int accepted = 0;
  for (int t = 0; t < 10000; ++t) {
    bool acc = false;
    x = arwmh_step([](double v) { return -0.5 * v * v; }, x, sc, rng, 0.44, 0.6, &acc);
    accepted += acc;
    CHECK(sc.scale > 0.0);
  }
  const double rate = accepted / 10000.0;
  CHECK(rate > 0.2);
  CHECK(rate < 0.7);

  AdaptiveScale box;
  double y = 0.5;
  for (int t = 0; t < 5000; ++t) {
    y = arwmh_step([](double v) { return v >= 0.0 && v <= 1.0 ? 0.0 : -kInfinity; }, y, box, rng);
    CHECK(y >= 0.0);
    CHECK(y <= 1.0);
  }
}

TEST_CASE("stepping-out slice sampler") {
  Rng rng(7);
  std::vector<double> v;
  double x = 0.5;
  for (int t = 0; t < 100000; ++t) {
    x = stepping_out_slice([](double) { return 0.0; }, x, 0.3, 0.0, 1.0, rng);
    CHECK(x > 0.0);
    CHECK(x < 1.0);
    v.push_back(x);
  }
  CHECK(ks_distance(v, [](double u) { return u; }) <= 0.02);

  double s = 0.3;
  for (int t = 0; t < 100; ++t) {
    s = stepping_out_slice([](double u) { return -0.5 * (u - 0.3) * (u - 0.3) / 1e-12; }, s, 1.0, 0.0, 5.0, rng);
  }
  CHECK(std::fabs(s - 0.3) < 1e-3);
  CHECK(reason_of([&] {
          stepping_out_slice([](double u) { return u < 0.5 ? -kInfinity : 0.0; }, 0.2, 1.0, 0.0, 1.0, rng);
        }) == "slice_start_outside");
}

TEST_CASE("censored imputation stays inside its bounds") {
  Rng rng(8);
  const CensorStatus right{CensorKind::right, 2.0, kCensorSentinel};
  const CensorStatus interval{CensorKind::interval, 1.0, 2.0};
  const CensorStatus left{CensorKind::left, kCensorSentinel, -3.0};
  for (int t = 0; t < 5000; ++t) {
    CHECK(impute_censored_value(0.0, 1.0, right, rng) >= 2.0);
    const double v = impute_censored_value(0.0, 1.0, interval, rng);
    CHECK(v >= 1.0);
    CHECK(v <= 2.0);
    CHECK(impute_censored_value(0.0, 1.0, left, rng) <= -3.0);
  }
}

TEST_CASE("SSVS inclusion probability") {
  const double slab = 2.0;
  const double spike = 2e-4;
  const double p = 0.3;
  const double a = p * normal_pdf(0.0, 0.0, std::sqrt(slab));
  const double b = (1 - p) * normal_pdf(0.0, 0.0, std::sqrt(spike));
  CHECK(ssvs_inclusion_probability(0.0, slab, spike, p) == doctest::Approx(a / (a + b)).epsilon(1e-12));
  CHECK(ssvs_inclusion_probability(0.7, 1.0, 1.0, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ssvs_inclusion_probability(1e3, slab, spike, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("run bookkeeping") {
  const DataTable t = general_table();
  ModelSpec spec;
  const auto f = fit_chain(spec, t, roles_for("y", {"x1"}), 10, 1);
  CHECK(f.store.n_draws() == 10);
  CHECK(f.chain.iteration == 10);

  const ModelData d = build_model_data(t, roles_for("y", {"x1"}), spec);
  ChainState c = init_chain(spec, d, 3);
  SampleStore store = empty_store(spec, d);
  SamplerConfig cfg;
  cfg.iterations = 30;
  cfg.thin = 3;
  std::vector<std::uint64_t> events;
  RunHooks hooks;
  hooks.on_progress = [&](std::uint64_t done, std::uint64_t) { events.push_back(done); };
  run_chain(spec, d, cfg, c, store, hooks);
  CHECK(store.n_draws() == 10);
  for (std::size_t r = 0; r < store.n_draws(); ++r) CHECK(store.iteration(r) % 3 == 0);
  CHECK(events == std::vector<std::uint64_t>{30});
  CHECK(progress_interval(1000) == 100);
  CHECK(progress_interval(100000) == 1000);

  std::atomic<bool> cancel{true};
  hooks.cancel = &cancel;
  const auto res = run_chain(spec, d, cfg, c, store, hooks);
  CHECK(res.cancelled);
  CHECK(res.completed == 0);
}

TEST_CASE("chains are deterministic and resume bit-identically") {
  const DataTable table = general_table();
  for (const auto& nm : all_models()) {
    CAPTURE(nm.name);
    const ModelData d = build_model_data(table, nm.roles, nm.spec);
    SamplerConfig cfg;
    cfg.seed = 17;

    ChainState whole = init_chain(nm.spec, d, 17);
    SampleStore whole_store = empty_store(nm.spec, d);
    cfg.iterations = 200;
    run_chain(nm.spec, d, cfg, whole, whole_store);

    ChainState first = init_chain(nm.spec, d, 17);
    SampleStore split_store = empty_store(nm.spec, d);
    cfg.iterations = 100;
    run_chain(nm.spec, d, cfg, first, split_store);
    const std::string mc1_half = split_store.to_mc1();
    ChainState resumed = deserialize_chain(serialize_chain(first));
    run_chain(nm.spec, d, cfg, resumed, split_store);

    CHECK(split_store.to_mc1() == whole_store.to_mc1());
    CHECK(split_store.to_mix() == whole_store.to_mix());
    CHECK(serialize_chain(resumed) == serialize_chain(whole));
    CHECK(split_store.to_mc1().compare(0, mc1_half.size(), mc1_half) == 0);
  }
}

TEST_CASE("slice validity after every cycle") {
  const DataTable table = general_table();
  for (auto stick : {StickPriorSpec::dp(1.0), StickPriorSpec::beta2(1.0, 2.0),
                     StickPriorSpec::geometric(1.0, 1.0)}) {
    ModelSpec spec;
    spec.family = Family::ddp_mixture;
    spec.stick = stick;
    RunHooks hooks;
    std::size_t bad = 0;
    hooks.on_iteration = [&](const ChainState& c) {
      const auto w = weights_from_sticks(c.params.sticks).weights;
      for (std::size_t h = 0; h < c.params.z.size(); ++h) {
        if (!(c.params.slice[h] < w[static_cast<std::size_t>(c.params.z[h])])) ++bad;
      }
    };
    fit_chain(spec, table, roles_for("y", {"x1", "x2"}), 300, 2, hooks);
    CHECK(bad == 0);
  }

  ModelSpec ip;
  ip.family = Family::infinite_probits;
  std::size_t bad = 0;
  RunHooks hooks;
  hooks.on_iteration = [&](const ChainState& c) {
    const auto& s = c.params;
    for (std::size_t i = 0; i < s.z.size(); ++i) {
      if (!(s.slice[i] > 0.0 && s.slice[i] < 1.0) || !s.ip_atoms.count(s.z[i])) ++bad;
    }
  };
  fit_chain(ip, table, roles_for("y", {"x1", "x2"}), 300, 2, hooks);
  CHECK(bad == 0);
  CHECK(bad == 0);
}

TEST_CASE("one observation is always allocated") {
  const DataTable one("t", {{"y", {0.3}}, {"x", {1.0}}});
  ModelSpec spec;
  spec.family = Family::ddp_mixture;
  const auto f = fit_chain(spec, one, roles_for("y", {"x"}), 200, 4);
  CHECK(f.chain.params.z.size() == 1);
  CHECK(f.store.n_draws() == 200);
}

TEST_CASE("probit latent scores follow the response sign") {
  ModelSpec spec;
  spec.link = Link::binary_probit;
  const DataTable table = general_table();
  const ModelData d = build_model_data(table, roles_for("yb", {"x1"}), spec);
  std::size_t bad = 0;
  RunHooks hooks;
  hooks.on_iteration = [&](const ChainState& c) {
    for (std::size_t i = 0; i < d.n(); ++i) {
      const double ys = c.params.y_work(static_cast<Eigen::Index>(i));
      if ((d.y(static_cast<Eigen::Index>(i)) == 1.0) != (ys > 0.0)) ++bad;
    }
  };
  fit_chain(spec, table, roles_for("yb", {"x1"}), 200, 5, hooks);
  CHECK(bad == 0);
}

}  // TEST_SUITE
