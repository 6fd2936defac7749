#pragma once

// Synthetic data and short chains shared by the unit and acceptance tests.

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <unistd.h>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/binomial.hpp>

#include "bnpreg/dataframe.hpp"
#include "bnpreg/error.hpp"
#include "bnpreg/mcmc.hpp"
#include "bnpreg/models.hpp"
#include "bnpreg/random.hpp"
#include "bnpreg/sample_store.hpp"

namespace bnpreg::testing {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// y = +-5 + N(0, 0.5^2) with alternating components and an unrelated
// covariate x ~ N(0, 1).
inline DataTable mixture_table(std::size_t n = 100, std::uint64_t seed = 2024) {
  Rng rng(seed);
  std::vector<double> y(n);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    y[i] = (i % 2 == 0 ? 5.0 : -5.0) + rng.normal(0.0, 0.5);
  }
  return DataTable("mixture", {{"y", y}, {"x", x}});
}

// Columns y, yb (binary), x1, x2, g (ten groups) and w (weights in [0.5, 2]).
inline DataTable general_table(std::size_t n = 120, std::uint64_t seed = 99) {
  Rng rng(seed);
  std::vector<double> y(n), yb(n), x1(n), x2(n), g(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = rng.normal();
    x2[i] = rng.normal();
    g[i] = static_cast<double>(i % 10 + 1);
    w[i] = rng.uniform(0.5, 2.0);
    const double shift = i % 3 == 0 ? 3.0 : -1.0;
    y[i] = shift + 0.8 * x1[i] - 0.5 * x2[i] + 0.3 * (g[i] - 5.0) / 5.0 + rng.normal(0.0, 0.7);
    yb[i] = (0.4 + 1.2 * x1[i] + rng.normal()) > 0.0 ? 1.0 : 0.0;
  }
  return DataTable("general",
                   {{"y", y}, {"yb", yb}, {"x1", x1}, {"x2", x2}, {"g", g}, {"w", w}});
}

inline RoleAssignment roles_for(const std::string& y, std::vector<std::string> x) {
  RoleAssignment r;
  r.dependent = y;
  r.covariates = std::move(x);
  return r;
}

struct FittedChain {
  ModelSpec spec;
  ModelData data;
  ChainState chain;
  SampleStore store;
};

inline FittedChain fit_chain(const ModelSpec& spec, const DataTable& table,
                             const RoleAssignment& roles, std::uint64_t iterations,
                             std::uint64_t seed, const RunHooks& hooks = {}) {
  ModelData data = build_model_data(table, roles, spec);
  ChainState chain = init_chain(spec, data, seed);
  SampleStore store = empty_store(spec, data);
  FittedChain f{spec, std::move(data), std::move(chain), std::move(store)};
  SamplerConfig cfg;
  cfg.iterations = iterations;
  cfg.seed = seed;
  run_chain(spec, f.data, cfg, f.chain, f.store, hooks);
  return f;
}

inline std::filesystem::path scratch_dir(const std::string& tag) {
  static int counter = 0;
  auto p = std::filesystem::temp_directory_path() /
           ("bnpreg-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(p);
  return p;
}

struct NamedModel {
  std::string name;
  ModelSpec spec;
  RoleAssignment roles;
};

// One configuration per model family, link, mixing target and stick prior.
inline std::vector<NamedModel> all_models() {
  std::vector<NamedModel> m;
  const RoleAssignment base = roles_for("y", {"x1", "x2"});
  const RoleAssignment binary = roles_for("yb", {"x1", "x2"});
  RoleAssignment weighted = base;
  weighted.weights = "w";
  RoleAssignment grouped = base;
  grouped.group = "g";

  ModelSpec s;
  m.push_back({"linear", s, base});
  m.push_back({"linear_weighted", s, weighted});
  s.link = Link::binary_probit;
  m.push_back({"linear_probit", s, binary});

  s = ModelSpec{};
  s.family = Family::hlm2;
  m.push_back({"hlm2", s, grouped});

  for (auto target : {MixingTarget::intercept_only, MixingTarget::coefficients,
                      MixingTarget::coefficients_and_variance}) {
    s = ModelSpec{};
    s.family = Family::ddp_mixture;
    s.target = target;
    m.push_back({"ddp_" + to_string(target), s, base});
  }
  const std::vector<std::pair<std::string, StickPriorSpec>> sticks = {
      {"pitman_yor", StickPriorSpec::pitman_yor(0.3, 1.0)},
      {"normalized_stable", StickPriorSpec::normalized_stable(0.4)},
      {"beta2", StickPriorSpec::beta2(1.0, 2.0)},
      {"geometric", StickPriorSpec::geometric(1.0, 1.0)},
      {"nig", StickPriorSpec::nig(1.0)}};
  for (const auto& [name, stick] : sticks) {
    s = ModelSpec{};
    s.family = Family::ddp_mixture;
    s.stick = stick;
    m.push_back({"ddp_" + name, s, base});
  }
  s = ModelSpec{};
  s.family = Family::ddp_mixture;
  m.push_back({"ddp_grouped", s, grouped});
  s.link = Link::binary_probit;
  m.push_back({"ddp_probit", s, binary});

  s = ModelSpec{};
  s.family = Family::infinite_probits;
  m.push_back({"ip", s, base});
  s.ip.ssvs_kernel = true;
  s.ip.ssvs_weights = true;
  m.push_back({"ip_ssvs", s, base});
  s = ModelSpec{};
  s.family = Family::infinite_probits;
  s.ip.heteroscedastic = true;
  s.ip.a0 = 2.0;
  m.push_back({"ip_heteroscedastic", s, base});
  s.ip.ssvs_weights = true;
  m.push_back({"ip_heteroscedastic_ssvs", s, base});
  s = ModelSpec{};
  s.family = Family::infinite_probits;
  s.link = Link::binary_probit;
  m.push_back({"ip_probit", s, binary});
  return m;
}

// Reason token of the Error thrown by f, or "" when nothing is thrown.
inline std::string reason_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.reason();
  }
  return "";
}

// Gamma(s; c) = int_c^inf t^(s-1) e^(-t) dt by double-exponential quadrature.
inline long double upper_gamma_quadrature(long double s, long double c) {
  boost::math::quadrature::exp_sinh<long double> integrator;
  auto f = [&](long double u) { return std::exp((s - 1) * std::log(c + u) - (c + u)); };
  return integrator.integrate(f);
}

// NIG allocation weights (w0, w1) assembled term by term from the alternating
// binomial sums over upper incomplete gamma values.
inline std::pair<double, double> nig_weights_oracle(double c, int n, int k) {
  std::map<int, long double> cache;
  auto G = [&](int s) {
    auto it = cache.find(s);
    if (it != cache.end()) return it->second;
    return cache[s] = upper_gamma_quadrature(s, c);
  };
  const long double mc2 = -static_cast<long double>(c) * c;
  auto sum = [&](int N, int offset, int power_shift) {
    long double total = 0.0L;
    for (int l = 0; l <= N; ++l) {
      total += boost::math::binomial_coefficient<long double>(N, l) *
               std::pow(mc2, static_cast<long double>(power_shift - l)) *
               G(k + offset + 2 * l - 2 * n);
    }
    return total;
  };
  const long double den = sum(n - 1, 2, 0);
  const long double w0 = sum(n, 1, 1) / (2.0L * n * den);
  const long double w1 = sum(n, 0, 1) / (n * den);
  return {static_cast<double>(w0), static_cast<double>(w1)};
}

}  // namespace bnpreg::testing
