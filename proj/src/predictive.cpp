#include "bnpreg/predictive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "bnpreg/diagnostics.hpp"
#include "bnpreg/error.hpp"
#include "bnpreg/special.hpp"
#include "bnpreg/text.hpp"

namespace bnpreg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

bool Functional::on_y_grid() const {
  return kind == FunctionalKind::pdf || kind == FunctionalKind::cdf ||
         kind == FunctionalKind::survival || kind == FunctionalKind::hazard ||
         kind == FunctionalKind::cumhaz;
}

std::string Functional::label() const {
  switch (kind) {
    case FunctionalKind::pdf: return "pdf";
    case FunctionalKind::cdf: return "cdf";
    case FunctionalKind::mean: return "mean";
    case FunctionalKind::variance: return "variance";
    case FunctionalKind::quantile: return "quantile(" + format_double(u) + ")";
    case FunctionalKind::survival: return "survival";
    case FunctionalKind::hazard: return "hazard";
    case FunctionalKind::cumhaz: return "cumhaz";
    case FunctionalKind::prob_y_ge_0: return "prob_y_ge_0";
  }
  return "";
}

std::vector<Functional> parse_functionals(const std::string& text) {
  std::vector<Functional> out;
  std::string token;
  int depth = 0;
  std::vector<std::string> tokens;
  for (char ch : text) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == ',' && depth == 0) {
      tokens.push_back(token);
      token.clear();
    } else {
      token += ch;
    }
  }
  tokens.push_back(token);
  for (const auto& raw : tokens) {
    const std::string t(trim(raw));
    Functional f;
    if (t == "pdf") f.kind = FunctionalKind::pdf;
    else if (t == "cdf") f.kind = FunctionalKind::cdf;
    else if (t == "mean") f.kind = FunctionalKind::mean;
    else if (t == "variance") f.kind = FunctionalKind::variance;
    else if (t == "survival") f.kind = FunctionalKind::survival;
    else if (t == "hazard") f.kind = FunctionalKind::hazard;
    else if (t == "cumhaz") f.kind = FunctionalKind::cumhaz;
    else if (t == "prob_y_ge_0") f.kind = FunctionalKind::prob_y_ge_0;
    else if (t.rfind("quantile(", 0) == 0 && t.back() == ')') {
      f.kind = FunctionalKind::quantile;
      if (!parse_double(t.substr(9, t.size() - 10), f.u) || !(f.u >= 0.0 && f.u <= 1.0)) {
        invalid("bad_quantile_level", "quantile level must lie in [0,1]: " + t);
      }
    } else {
      invalid("unknown_functional", "unknown functional '" + t + "'");
    }
    out.push_back(f);
  }
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  const std::string t(trim(text));
  if (t.find(':') != std::string::npos) {
    const auto parts = split_fields(t, ':');
    double a = 0.0;
    double step = 0.0;
    double b = 0.0;
    if (parts.size() != 3 || !parse_double(parts[0], a) || !parse_double(parts[1], step) ||
        !parse_double(parts[2], b)) {
      invalid("bad_grid", "grid must look like a:step:b, got '" + t + "'");
    }
    step = std::fabs(step);
    if (!(step > 0.0) || !std::isfinite(step)) invalid("bad_grid", "grid step must be nonzero");
    const double dir = b >= a ? 1.0 : -1.0;
    const double count = std::floor(std::fabs(b - a) / step + 1e-9);
    if (count + 1.0 > static_cast<double>(kMaxFocalPoints)) {
      invalid("grid_too_large", "grid has more than " + std::to_string(kMaxFocalPoints) + " values");
    }
    for (int k = 0; k <= static_cast<int>(count); ++k) out.push_back(a + dir * k * step);
  } else {
    for (const auto& f : split_fields(t, ',')) {
      double v = 0.0;
      if (!parse_double(f, v)) invalid("bad_grid", "bad grid value '" + f + "'");
      out.push_back(v);
    }
  }
  if (out.size() > kMaxFocalPoints) {
    invalid("grid_too_large", "grid has more than " + std::to_string(kMaxFocalPoints) + " values");
  }
  return out;
}

std::string to_string(ProfileMethod m) {
  switch (m) {
    case ProfileMethod::grand_mean: return "grand_mean";
    case ProfileMethod::zero_center: return "zero_center";
    case ProfileMethod::partial_dependence: return "partial_dependence";
    case ProfileMethod::clustered_pd: return "clustered_pd";
  }
  return "grand_mean";
}

ProfileMethod profile_method_from_string(const std::string& s) {
  for (auto m : {ProfileMethod::grand_mean, ProfileMethod::zero_center,
                 ProfileMethod::partial_dependence, ProfileMethod::clustered_pd}) {
    if (to_string(m) == s) return m;
  }
  invalid("unknown_profile", "unknown profile method " + s);
}

std::size_t clustered_pd_k(std::size_t n) {
  const auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n) / 2.0)));
  return std::max<std::size_t>(k, 1);
}

std::vector<std::vector<double>> kmeans(const std::vector<std::vector<double>>& points,
                                        std::size_t k, Rng& rng, std::size_t restarts) {
  const std::size_t n = points.size();
  if (n == 0) invalid("no_points", "k-means needs at least one point");
  k = std::min(k, n);
  const std::size_t q = points[0].size();
  auto dist2 = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < q; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
  };
  std::vector<std::vector<double>> best;
  double best_wss = kInf;
  for (std::size_t rep = 0; rep < std::max<std::size_t>(restarts, 1); ++rep) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.uniform_index(n - i)]);
    std::vector<std::vector<double>> cent;
    for (std::size_t i = 0; i < k; ++i) cent.push_back(points[idx[i]]);
    std::vector<std::size_t> assign(n, 0);
    for (int it = 0; it < 100; ++it) {
      bool changed = it == 0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t arg = 0;
        double dmin = kInf;
        for (std::size_t c = 0; c < k; ++c) {
          const double d = dist2(points[i], cent[c]);
          if (d < dmin) {
            dmin = d;
            arg = c;
          }
        }
        if (assign[i] != arg) changed = true;
        assign[i] = arg;
      }
      if (!changed) break;
      std::vector<std::vector<double>> sum(k, std::vector<double>(q, 0.0));
      std::vector<std::size_t> cnt(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        ++cnt[assign[i]];
        for (std::size_t j = 0; j < q; ++j) sum[assign[i]][j] += points[i][j];
      }
      for (std::size_t c = 0; c < k; ++c) {
        if (cnt[c] == 0) continue;
        for (std::size_t j = 0; j < q; ++j) cent[c][j] = sum[c][j] / static_cast<double>(cnt[c]);
      }
    }
    double wss = 0.0;
    for (std::size_t i = 0; i < n; ++i) wss += dist2(points[i], cent[assign[i]]);
    if (wss < best_wss) {
      best_wss = wss;
      best = cent;
    }
  }
  return best;
}

Profile profile_covariates(const ModelData& data, const std::vector<std::string>& focal,
                           ProfileMethod method, Rng& rng) {
  Profile p;
  std::vector<Eigen::Index> cols;
  for (const auto& f : focal) {
    if (std::find(data.coef_names.begin() + 1, data.coef_names.end(), f) == data.coef_names.end()) {
      invalid("unknown_covariate", f + " is not a covariate of the model");
    }
  }
  for (std::size_t k = 1; k < data.coef_names.size(); ++k) {
    if (std::find(focal.begin(), focal.end(), data.coef_names[k]) == focal.end()) {
      p.names.push_back(data.coef_names[k]);
      cols.push_back(static_cast<Eigen::Index>(k));
    }
  }
  const std::size_t n = data.n();
  if (cols.empty()) {
    p.rows = {{}};
    p.weights = {1.0};
    return p;
  }
  std::vector<std::vector<double>> all(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto c : cols) all[i].push_back(data.X(static_cast<Eigen::Index>(i), c));
  }
  switch (method) {
    case ProfileMethod::grand_mean: {
      std::vector<double> m(cols.size(), 0.0);
      for (const auto& r : all) {
        for (std::size_t j = 0; j < m.size(); ++j) m[j] += r[j];
      }
      for (double& v : m) v /= static_cast<double>(n);
      p.rows = {m};
      break;
    }
    case ProfileMethod::zero_center: p.rows = {std::vector<double>(cols.size(), 0.0)}; break;
    case ProfileMethod::partial_dependence: p.rows = all; break;
    case ProfileMethod::clustered_pd: p.rows = kmeans(all, clustered_pd_k(n), rng); break;
  }
  p.weights.assign(p.rows.size(), 1.0 / static_cast<double>(p.rows.size()));
  return p;
}

PosteriorDraws load_draws(const ModelSpec& spec, std::size_t p1, std::size_t n_groups,
                          const SampleStore& store, std::uint64_t burn_in, std::uint64_t thin) {
  if (store.empty()) invalid("no_draws", "the chain has not been run");
  PosteriorDraws d;
  d.spec = spec;
  for (std::size_t r : kept_rows(store, burn_in, thin)) {
    d.states.push_back(state_from_draw(spec, p1, n_groups, store, r));
  }
  if (d.states.empty()) invalid("no_draws", "no draws remain after burn-in and thinning");
  return d;
}

PointPrediction predict_point(const PosteriorDraws& draws, const Eigen::RowVectorXd& x,
                              const std::vector<double>& y_grid, double obs_weight, Rng& rng,
                              bool want_draws) {
  PointPrediction p;
  p.pdf.assign(y_grid.size(), 0.0);
  p.cdf.assign(y_grid.size(), 0.0);
  double second = 0.0;
  for (const auto& s : draws.states) {
    const auto mix = conditional_mixture(draws.spec, s, x, obs_weight);
    for (std::size_t g = 0; g < y_grid.size(); ++g) {
      p.pdf[g] += mixture_pdf(mix, y_grid[g]);
      p.cdf[g] += mixture_cdf(mix, y_grid[g]);
    }
    p.mean += mixture_mean(mix);
    second += mixture_second_moment(mix);
    if (want_draws) {
      double total = 0.0;
      for (const auto& c : mix) total += c.weight;
      double target = rng.uniform() * total;
      std::size_t k = 0;
      while (k + 1 < mix.size() && target >= mix[k].weight) {
        target -= mix[k].weight;
        ++k;
      }
      p.sorted_draws.push_back(rng.normal(mix[k].mean, std::sqrt(mix[k].var)));
    }
  }
  const double R = static_cast<double>(draws.states.size());
  for (auto& v : p.pdf) v /= R;
  for (auto& v : p.cdf) v = std::min(v / R, 1.0);
  p.mean /= R;
  p.variance = std::max(second / R - p.mean * p.mean, 0.0);
  std::sort(p.sorted_draws.begin(), p.sorted_draws.end());
  return p;
}

double survival_from_cdf(double F) { return 1.0 - F; }

double hazard_from(double f, double F) {
  if (F >= 1.0 - 1e-12) return kInf;
  return f / (1.0 - F);
}

double cumhaz_from_cdf(double F) {
  if (F >= 1.0) return kInf;
  return -std::log1p(-F);
}

std::vector<double> default_y_grid(const PosteriorDraws& draws, const ModelData& data,
                                   std::size_t points) {
  double lo = kInf;
  double hi = -kInf;
  for (Eigen::Index i = 0; i < data.y.size(); ++i) {
    if (is_missing(data.y(i))) continue;
    lo = std::min(lo, data.y(i));
    hi = std::max(hi, data.y(i));
  }
  if (!std::isfinite(lo)) invalid("no_response", "no observed responses");
  const Eigen::RowVectorXd xbar = data.X.colwise().mean();
  double var = 0.0;
  for (const auto& s : draws.states) {
    const auto mix = conditional_mixture(draws.spec, s, xbar);
    double w = 0.0;
    double v = 0.0;
    for (const auto& c : mix) {
      w += c.weight;
      v += c.weight * c.var;
    }
    var += v / w;
  }
  const double sd = std::sqrt(var / static_cast<double>(draws.states.size()));
  lo -= 4.0 * sd;
  hi += 4.0 * sd;
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  }
  return grid;
}

PredictiveTable pd_functional(const PosteriorDraws& draws, const ModelData& data,
                              const PredictiveQuery& query) {
  if (query.functionals.empty()) invalid("no_functionals", "no functionals requested");
  if (!(query.obs_weight > 0.0)) invalid("bad_weight", "observation weight must be positive");
  std::vector<std::string> focal_names;
  std::vector<Eigen::Index> focal_cols;
  std::size_t n_points = 1;
  for (const auto& [name, grid] : query.focal) {
    const auto it = std::find(data.coef_names.begin() + 1, data.coef_names.end(), name);
    if (it == data.coef_names.end()) {
      invalid("unknown_covariate", name + " is not a covariate of the model");
    }
    if (grid.empty()) invalid("bad_grid", "empty grid for " + name);
    focal_names.push_back(name);
    focal_cols.push_back(static_cast<Eigen::Index>(it - data.coef_names.begin()));
    n_points *= grid.size();
    if (n_points > kMaxFocalPoints) {
      invalid("grid_too_large", "more than " + std::to_string(kMaxFocalPoints) + " focal points");
    }
  }
  if (std::set<std::string>(focal_names.begin(), focal_names.end()).size() != focal_names.size()) {
    invalid("duplicate_covariate", "a focal covariate is listed twice");
  }

  bool need_grid = false;
  bool need_draws = false;
  bool need_zero = false;
  for (const auto& f : query.functionals) {
    need_grid = need_grid || f.on_y_grid();
    need_draws = need_draws || f.kind == FunctionalKind::quantile;
    need_zero = need_zero || f.kind == FunctionalKind::prob_y_ge_0;
  }
  std::vector<double> y_grid;
  if (need_grid) y_grid = query.y_grid.empty() ? default_y_grid(draws, data) : query.y_grid;
  for (std::size_t g = 1; g < y_grid.size(); ++g) {
    if (!(y_grid[g] > y_grid[g - 1])) invalid("bad_y_grid", "y grid must be strictly increasing");
  }
  std::vector<double> eval_grid = y_grid;
  if (need_zero) eval_grid.push_back(0.0);

  const Rng base(query.seed);
  Rng profile_rng = base.split(0);
  const Profile profile = profile_covariates(data, focal_names, query.profile, profile_rng);
  std::vector<Eigen::Index> profile_cols;
  for (const auto& name : profile.names) {
    profile_cols.push_back(static_cast<Eigen::Index>(
        std::find(data.coef_names.begin(), data.coef_names.end(), name) - data.coef_names.begin()));
  }

  PredictiveTable table;
  table.columns = focal_names;
  if (need_grid) table.columns.push_back("y");
  for (const auto& f : query.functionals) table.columns.push_back(f.label());

  const auto p1 = static_cast<Eigen::Index>(data.p1());
  for (std::size_t pt = 0; pt < n_points; ++pt) {
    Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(p1);
    x(0) = 1.0;
    std::vector<double> focal_values;
    std::size_t rem = pt;
    for (std::size_t k = focal_cols.size(); k-- > 0;) {
      const auto& grid = query.focal[k].second;
      focal_values.insert(focal_values.begin(), grid[rem % grid.size()]);
      rem /= grid.size();
    }
    for (std::size_t k = 0; k < focal_cols.size(); ++k) x(focal_cols[k]) = focal_values[k];

    std::vector<double> pdf(eval_grid.size(), 0.0);
    std::vector<double> cdf(eval_grid.size(), 0.0);
    double mean = 0.0;
    double var = 0.0;
    std::vector<double> quants(query.functionals.size(), 0.0);
    for (std::size_t t = 0; t < profile.rows.size(); ++t) {
      for (std::size_t k = 0; k < profile_cols.size(); ++k) x(profile_cols[k]) = profile.rows[t][k];
      Rng rng = base.split(1 + pt * profile.rows.size() + t);
      const auto pp = predict_point(draws, x, eval_grid, query.obs_weight, rng, need_draws);
      const double w = profile.weights[t];
      for (std::size_t g = 0; g < eval_grid.size(); ++g) {
        pdf[g] += w * pp.pdf[g];
        cdf[g] += w * pp.cdf[g];
      }
      mean += w * pp.mean;
      var += w * pp.variance;
      for (std::size_t f = 0; f < query.functionals.size(); ++f) {
        if (query.functionals[f].kind == FunctionalKind::quantile) {
          quants[f] += w * quantile_sorted(pp.sorted_draws, query.functionals[f].u);
        }
      }
    }
    const double cdf_zero = need_zero ? cdf.back() : 0.0;
    const std::size_t rows_here = need_grid ? y_grid.size() : 1;
    for (std::size_t g = 0; g < rows_here; ++g) {
      std::vector<double> row = focal_values;
      if (need_grid) row.push_back(y_grid[g]);
      for (std::size_t f = 0; f < query.functionals.size(); ++f) {
        const auto& fn = query.functionals[f];
        double v = 0.0;
        switch (fn.kind) {
          case FunctionalKind::pdf: v = pdf[g]; break;
          case FunctionalKind::cdf: v = cdf[g]; break;
          case FunctionalKind::mean: v = mean; break;
          case FunctionalKind::variance: v = var; break;
          case FunctionalKind::quantile: v = quants[f]; break;
          case FunctionalKind::survival: v = survival_from_cdf(cdf[g]); break;
          case FunctionalKind::hazard: v = hazard_from(pdf[g], cdf[g]); break;
          case FunctionalKind::cumhaz: v = cumhaz_from_cdf(cdf[g]); break;
          case FunctionalKind::prob_y_ge_0: v = 1.0 - cdf_zero; break;
        }
        row.push_back(v);
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

std::string PredictiveTable::to_csv() const {
  std::string s;
  for (std::size_t k = 0; k < columns.size(); ++k) s += (k ? "," : "") + columns[k];
  s += "\n";
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.size(); ++k) s += (k ? "," : "") + format_double(r[k]);
    s += "\n";
  }
  return s;
}

FitReport fit_report(const std::vector<double>& y, const std::vector<double>& mean,
                     const std::vector<double>& var) {
  const std::size_t n = y.size();
  if (mean.size() != n || var.size() != n) invalid("dimension_mismatch", "fit inputs differ in length");
  if (n == 0) invalid("no_rows", "no observations");
  FitReport f;
  f.y = y;
  f.mean = mean;
  f.var = var;
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  double sst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - mean[i];
    f.goodness += e * e;
    f.penalty += var[i];
    sst += (y[i] - ybar) * (y[i] - ybar);
    const double r = e == 0.0 ? 0.0 : e / std::sqrt(var[i]);
    f.residual.push_back(r);
    if (std::fabs(r) > 2.0) ++f.outliers2;
    if (std::fabs(r) > 3.0) ++f.outliers3;
  }
  f.d_m = f.goodness + f.penalty;
  f.r_squared = sst > 0.0 ? 1.0 - f.goodness / sst : std::numeric_limits<double>::quiet_NaN();
  return f;
}

FitReport fit_report(const ModelData& data, const FitAccumulator& acc) {
  const FitMoments m = fit_moments(data, acc);
  return fit_report(m.y, m.mean, m.var);
}

std::string fit_csv(const FitReport& f, const std::vector<std::size_t>& source_rows) {
  std::string s = "row,y,mean,variance,residual,outlier2,outlier3\n";
  for (std::size_t i = 0; i < f.y.size(); ++i) {
    const double r = f.residual[i];
    s += std::to_string(i < source_rows.size() ? source_rows[i] + 1 : i + 1) + "," +
         format_double(f.y[i]) + "," + format_double(f.mean[i]) + "," + format_double(f.var[i]) +
         "," + format_double(r) + "," + (std::fabs(r) > 2.0 ? "1" : "0") + "," +
         (std::fabs(r) > 3.0 ? "1" : "0") + "\n";
  }
  return s;
}

std::string fit_summary_csv(const FitReport& f) {
  std::string s = "statistic,value\n";
  s += "n," + std::to_string(f.y.size()) + "\n";
  s += "r_squared," + format_double(f.r_squared) + "\n";
  s += "goodness," + format_double(f.goodness) + "\n";
  s += "penalty," + format_double(f.penalty) + "\n";
  s += "d_m," + format_double(f.d_m) + "\n";
  s += "outliers_2," + std::to_string(f.outliers2) + "\n";
  s += "outliers_3," + std::to_string(f.outliers3) + "\n";
  return s;
}

}  // namespace bnpreg
