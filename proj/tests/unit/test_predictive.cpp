#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "../support.hpp"
#include "bnpreg/predictive.hpp"

using namespace bnpreg;
using namespace bnpreg::testing;

namespace {

std::size_t column_of(const PredictiveTable& t, const std::string& name) {
  return static_cast<std::size_t>(std::find(t.columns.begin(), t.columns.end(), name) - t.columns.begin());
}

DataTable permuted(const DataTable& t, const std::vector<std::size_t>& order) {
  std::vector<Column> cols;
  for (const auto& name : t.names()) {
    std::vector<double> v;
    for (std::size_t i : order) v.push_back(t.column(name).values[i]);
    cols.push_back({name, v});
  }
  return DataTable("p", cols);
}

}  // namespace

TEST_SUITE("predictive") {

TEST_CASE("single linear draw is a standard normal shifted by one") {
  const DataTable t("t", {{"y", {0.0, 1.0, 2.0}}, {"x", {-1.0, 0.0, 1.0}}});
  ModelSpec spec;
  const ModelData d = build_model_data(t, roles_for("y", {"x"}), spec);
  ModelState s;
  s.beta = Eigen::Vector2d(1.0, 0.0);
  s.sigma2 = 1.0;
  const PosteriorDraws draws{spec, {s}};
  PredictiveQuery q;
  q.focal = {{"x", {0.0, 5.0}}};
  q.functionals = parse_functionals("mean,variance,cdf,hazard");
  q.y_grid = {1.0, 1e6};
  const auto table = pd_functional(draws, d, q);
  REQUIRE(table.rows.size() == 4);
  for (const auto& r : table.rows) {
    CHECK(r[column_of(table, "mean")] == 1.0);
    CHECK(r[column_of(table, "variance")] == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(table.rows[0][column_of(table, "cdf")] == 0.5);
  CHECK(table.rows[1][column_of(table, "hazard")] == kInfinity);
  CHECK(table.to_csv().rfind("x,y,mean,variance,cdf,hazard\n", 0) == 0);
}

TEST_CASE("functionals of the averaged distribution") {
  CHECK(cumhaz_from_cdf(1.0 - std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cumhaz_from_cdf(1.0) == kInfinity);
  CHECK(survival_from_cdf(0.25) == 0.75);
  CHECK(hazard_from(0.2, 0.5) == doctest::Approx(0.4));
  CHECK(hazard_from(0.1, 1.0) == kInfinity);
}

TEST_CASE("grid and functional parsing") {
  const auto g = parse_grid("-3:.5:3");
  REQUIRE(g.size() == 13);
  CHECK(g.front() == -3.0);
  CHECK(g[6] == 0.0);
  CHECK(g.back() == 3.0);
  CHECK(parse_grid("1,2,5") == std::vector<double>{1, 2, 5});
  CHECK(parse_grid("2:-1:0") == std::vector<double>{2, 1, 0});
  CHECK(reason_of([] { parse_grid("0:0.001:1"); }) == "grid_too_large");

  const auto f = parse_functionals("mean,quantile(0.9),pdf");
  REQUIRE(f.size() == 3);
  CHECK(f[1].kind == FunctionalKind::quantile);
  CHECK(f[1].u == 0.9);
  CHECK(f[2].on_y_grid());
  CHECK_FALSE(f[0].on_y_grid());
  CHECK(reason_of([] { parse_functionals("mode"); }) == "unknown_functional");
  CHECK(reason_of([] { parse_functionals("quantile(1.5)"); }) == "bad_quantile_level");
  for (auto m : {ProfileMethod::grand_mean, ProfileMethod::zero_center, ProfileMethod::partial_dependence,
                 ProfileMethod::clustered_pd}) {
    CHECK(profile_method_from_string(to_string(m)) == m);
  }
}

TEST_CASE("profiles") {
  CHECK(clustered_pd_k(50) == 5);
  CHECK(clustered_pd_k(1) == 1);
  ModelSpec spec;
  Rng rng(1);
  const DataTable one("t", {{"y", {1.0}}, {"a", {2.0}}, {"b", {-4.0}}});
  const ModelData d1 = build_model_data(one, roles_for("y", {"a", "b"}), spec);
  const auto pd = profile_covariates(d1, {"a"}, ProfileMethod::partial_dependence, rng);
  const auto gm = profile_covariates(d1, {"a"}, ProfileMethod::grand_mean, rng);
  CHECK(pd.names == std::vector<std::string>{"b"});
  CHECK(pd.rows == gm.rows);

  const DataTable centred("t", {{"y", {1, 2, 3}}, {"a", {-1, 0, 1}}, {"b", {2, -4, 2}}});
  const ModelData d3 = build_model_data(centred, roles_for("y", {"a", "b"}), spec);
  const auto g3 = profile_covariates(d3, {}, ProfileMethod::grand_mean, rng);
  const auto z3 = profile_covariates(d3, {}, ProfileMethod::zero_center, rng);
  CHECK(g3.rows == z3.rows);
  const auto all = profile_covariates(d3, {"a", "b"}, ProfileMethod::partial_dependence, rng);
  CHECK(all.rows.size() == 1);
  CHECK(all.rows[0].empty());
  CHECK(reason_of([&] { profile_covariates(d3, {"nope"}, ProfileMethod::grand_mean, rng); }) ==
        "unknown_covariate");
}

TEST_CASE("k-means separates distant clusters") {
  Rng rng(2);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 40; ++i) pts.push_back({rng.normal(i < 20 ? -10.0 : 10.0, 0.5), rng.normal()});
  auto c = kmeans(pts, 2, rng);
  REQUIRE(c.size() == 2);
  std::sort(c.begin(), c.end());
  CHECK(std::fabs(c[0][0] + 10.0) < 0.5);
  CHECK(std::fabs(c[1][0] - 10.0) < 0.5);
  CHECK(kmeans(pts, 100, rng).size() == 40);
}

TEST_CASE("partial dependence over a fitted chain") {
  const DataTable table = general_table();
  ModelSpec spec;
  spec.family = Family::ddp_mixture;
  const auto roles = roles_for("y", {"x1", "x2"});
  const auto f = fit_chain(spec, table, roles, 400, 3);
  const auto draws = load_draws(spec, f.data.p1(), f.data.n_groups(), f.store, 100);

  PredictiveQuery q;
  q.focal = {{"x1", {0.3}}};
  q.functionals = parse_functionals("mean,variance,pdf,cdf,quantile(0.5)");
  q.profile = ProfileMethod::partial_dependence;
  for (int g = 0; g <= 4000; ++g) q.y_grid.push_back(-30.0 + 60.0 * g / 4000.0);
  const auto t = pd_functional(draws, f.data, q);

  // PD mean is the average of the row-wise predictive means.
  double mean = 0.0;
  for (std::size_t i = 0; i < f.data.n(); ++i) {
    Eigen::RowVectorXd x = f.data.X.row(static_cast<Eigen::Index>(i));
    x(1) = 0.3;
    Rng rng(0);
    mean += predict_point(draws, x, {}, 1.0, rng, false).mean;
  }
  mean /= double(f.data.n());
  CHECK(t.rows[0][column_of(t, "mean")] == doctest::Approx(mean).epsilon(1e-12));

  const auto ci = column_of(t, "cdf");
  const auto pi = column_of(t, "pdf");
  double mass = 0.0;
  for (std::size_t g = 1; g < t.rows.size(); ++g) {
    CHECK(t.rows[g][ci] >= t.rows[g - 1][ci]);
    mass += 0.5 * (t.rows[g][pi] + t.rows[g - 1][pi]) * (q.y_grid[g] - q.y_grid[g - 1]);
  }
  CHECK(std::fabs(mass - 1.0) < 1e-3);

  // The F value at the sampled median is near one half.
  const double med = t.rows[0][column_of(t, "quantile(0.5)")];
  const auto at = std::lower_bound(q.y_grid.begin(), q.y_grid.end(), med) - q.y_grid.begin();
  CHECK(std::fabs(t.rows[static_cast<std::size_t>(at)][ci] - 0.5) < 0.1);

  // Reordering or duplicating the rows leaves the PD average unchanged.
  std::vector<std::size_t> order;
  for (std::size_t i = table.n_rows(); i-- > 0;) order.push_back(i);
  for (std::size_t i = 0; i < table.n_rows(); ++i) order.push_back(i);
  const ModelData doubled = build_model_data(permuted(table, order), roles, spec);
  q.functionals = parse_functionals("mean,variance");
  const auto t1 = pd_functional(draws, f.data, q);
  const auto t2 = pd_functional(draws, doubled, q);
  CHECK(t2.rows[0][0] == t1.rows[0][0]);
  CHECK(t2.rows[0][1] == doctest::Approx(t1.rows[0][1]).epsilon(1e-12));
  CHECK(t2.rows[0][2] == doctest::Approx(t1.rows[0][2]).epsilon(1e-12));

  // Contrasting a focal value with itself gives zero.
  q.focal = {{"x1", {0.3, 0.3}}};
  const auto same = pd_functional(draws, f.data, q);
  CHECK(same.rows[0][1] - same.rows[1][1] == 0.0);

  q.focal = {{"x1", parse_grid("0:1:200")}, {"x2", {0.0, 1.0}}};
  CHECK(reason_of([&] { pd_functional(draws, f.data, q); }) == "grid_too_large");
}

TEST_CASE("fit report") {
  auto f = fit_report({1, 2, 3}, {1, 2, 3}, {1, 1, 1});
  CHECK(f.goodness == 0.0);
  CHECK(f.penalty == 3.0);
  CHECK(f.d_m == 3.0);
  CHECK(f.r_squared == 1.0);
  CHECK(f.residual == std::vector<double>{0, 0, 0});
  f = fit_report({0, 0, 4}, {0, 0, 0}, {1, 1, 1});
  CHECK(f.goodness == 16.0);
  CHECK(f.d_m == 19.0);
  CHECK(f.residual[2] == 4.0);
  CHECK(f.outliers2 == 1);
  CHECK(f.outliers3 == 1);
  CHECK(std::isnan(fit_report({2, 2}, {1, 1}, {1, 1}).r_squared));
  CHECK(reason_of([] { fit_report({1}, {1, 2}, {1}); }) == "dimension_mismatch");
  CHECK(fit_summary_csv(f).find("d_m,19") != std::string::npos);
}

}  // TEST_SUITE
