#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "bnpreg/error.hpp"
#include "bnpreg/mcmc.hpp"
#include "bnpreg/special.hpp"

namespace bnpreg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::RowVectorXd xrow(const ModelData& d, std::size_t i) {
  return d.X.row(static_cast<Eigen::Index>(i));
}

double wi(const ModelData& d, std::size_t i) { return d.w(static_cast<Eigen::Index>(i)); }

double& yw(ModelState& s, std::size_t i) { return s.y_work(static_cast<Eigen::Index>(i)); }
double yw(const ModelState& s, std::size_t i) { return s.y_work(static_cast<Eigen::Index>(i)); }

double stick_draw(double a, double b, Rng& rng) {
  if (!(b > 0.0)) return 1.0;
  return rng.beta(a, b);
}

// Weighted least squares, ridge-stabilized when X'WX is singular.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& w) {
  const Eigen::MatrixXd Xw = X.transpose() * w.asDiagonal();
  Eigen::MatrixXd A = Xw * X;
  const Eigen::VectorXd b = Xw * y;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (lu.rank() < A.rows()) {
    const double ridge = 1e-8 * std::max(1.0, A.diagonal().maxCoeff());
    A += ridge * Eigen::MatrixXd::Identity(A.rows(), A.cols());
  }
  return A.ldlt().solve(b);
}

// ---- unit bookkeeping for the stick-breaking mixture ----

std::size_t ddp_units(const ModelData& d) { return d.group.empty() ? d.n() : d.n_groups(); }

std::vector<std::vector<std::size_t>> ddp_members(const ModelData& d) {
  std::vector<std::vector<std::size_t>> m(ddp_units(d));
  for (std::size_t i = 0; i < d.n(); ++i) m[d.group.empty() ? i : d.group[i]].push_back(i);
  return m;
}

std::size_t ddp_unit_of(const ModelData& d, std::size_t i) {
  return d.group.empty() ? i : static_cast<std::size_t>(d.group[i]);
}

// x_s' beta_s for intercept-only mixing, else 0.
std::vector<double> slope_offsets(const ModelSpec& spec, const ModelData& d, const ModelState& s) {
  std::vector<double> off(d.n(), 0.0);
  if (spec.target != MixingTarget::intercept_only || d.p1() < 2) return off;
  const Eigen::VectorXd o = d.X.rightCols(d.X.cols() - 1) * s.beta.tail(s.beta.size() - 1);
  for (std::size_t i = 0; i < d.n(); ++i) off[i] = o(static_cast<Eigen::Index>(i));
  return off;
}

double atom_mean(const ModelSpec& spec, const ModelData& d, const Eigen::VectorXd& b,
                 const std::vector<double>& off, std::size_t i) {
  if (spec.target == MixingTarget::intercept_only) return b(0) + off[i];
  return xrow(d, i).dot(b);
}

double atom_var(const ModelSpec& spec, const ModelState& s, double atom_sigma2) {
  if (spec.probit()) return 1.0;
  return spec.mixes_variance() ? atom_sigma2 : s.sigma2;
}

double unit_loglik(const ModelSpec& spec, const ModelData& d, const ModelState& s,
                   const std::vector<double>& off, const std::vector<std::size_t>& members,
                   const Eigen::VectorXd& b, double sigma2) {
  double ll = 0.0;
  const double var = atom_var(spec, s, sigma2);
  for (std::size_t i : members) {
    ll += normal_logpdf(yw(s, i), atom_mean(spec, d, b, off, i), var / wi(d, i));
  }
  return ll;
}

DdpAtom draw_ddp_atom(const ModelSpec& spec, const ModelState& s, Rng& rng) {
  DdpAtom a;
  a.beta = rng.mvn(s.mu, s.T);
  a.sigma2 = spec.mixes_variance() ? rng.inv_gamma(spec.ddp.a0 / 2.0, spec.ddp.a0 / 2.0) : 1.0;
  return a;
}

double next_stick(const ModelSpec& spec, const ModelState& s, double log_remaining, Rng& rng) {
  const auto& st = spec.stick;
  const std::size_t j = s.sticks.size() + 1;
  switch (st.family) {
    case StickFamily::dp: return stick_draw(1.0, s.alpha, rng);
    case StickFamily::geometric:
      return s.sticks.empty() ? rng.beta(st.a, st.b) : s.sticks.front();
    case StickFamily::nig: return draw_nig_stick(st.c, j, log_remaining, rng);
    default: return stick_draw(st.stick_a(j), st.stick_b(j), rng);
  }
}

double log_remaining_mass(const std::vector<double>& sticks) {
  double lr = 0.0;
  for (double v : sticks) lr += std::log1p(-v);
  return lr;
}

double logit(double v) { return std::log(v) - std::log1p(-v); }
double inv_logit(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// ---- censoring and probit scores ----

void impute_latent(const ModelSpec& spec, const ModelData& d, ChainState& c) {
  if (!spec.probit() && !d.has_censoring()) return;
  for (std::size_t i = 0; i < d.n(); ++i) {
    if (spec.probit()) {
      const auto [lo, hi] = probit_augment_bounds(d.y(static_cast<Eigen::Index>(i)));
      const auto [m, v] = kernel_moments(spec, d, c.params, i);
      yw(c.params, i) = c.rng.truncated_normal(m, std::sqrt(v), lo, hi);
    } else if (d.censored(i)) {
      const auto [m, v] = kernel_moments(spec, d, c.params, i);
      yw(c.params, i) = impute_censored_value(m, std::sqrt(v), d.censor[i], c.rng);
    }
  }
}

// ---- linear ----

void step_linear(const ModelSpec& spec, const ModelData& d, ChainState& c) {
  auto& s = c.params;
  gibbs_linear_block(d.X, s.y_work, d.w, spec.linear, spec.probit(), s.beta, s.sigma2, c.rng);
  impute_latent(spec, d, c);
}

// ---- two-level ----

void step_hlm(const ModelSpec& spec, const ModelData& d, const SamplerConfig& cfg, ChainState& c) {
  auto& s = c.params;
  const auto& h = spec.hlm;
  const Eigen::Index p1 = d.X.cols();
  const std::size_t G = d.n_groups();
  std::vector<std::vector<std::size_t>> members(G);
  for (std::size_t i = 0; i < d.n(); ++i) members[static_cast<std::size_t>(d.group[i])].push_back(i);

  Eigen::VectorXd prior_var = Eigen::VectorXd::Constant(p1, h.v_beta);
  prior_var(0) = h.flat_intercept ? kInf : h.v_beta0;
  Eigen::VectorXd resid(d.X.rows());
  for (std::size_t i = 0; i < d.n(); ++i) {
    resid(static_cast<Eigen::Index>(i)) =
        yw(s, i) - xrow(d, i).dot(s.u.row(d.group[i]));
  }
  const double kernel_s2 = spec.probit() ? 1.0 : s.sigma2;
  s.beta = draw_regression_coefficients(d.X, resid, d.w, kernel_s2, kernel_s2, prior_var, c.rng);

  const Eigen::LLT<Eigen::MatrixXd> tl(s.T);
  const double sigma2 = kernel_s2;
  for (std::size_t g = 0; g < G; ++g) {
    for (Eigen::Index k = 0; k < p1; ++k) {
      auto target = [&](double v) {
        Eigen::VectorXd ug = s.u.row(static_cast<Eigen::Index>(g)).transpose();
        ug(k) = v;
        double lp = -0.5 * ug.dot(tl.solve(ug));
        const Eigen::VectorXd b = s.beta + ug;
        for (std::size_t i : members[g]) {
          lp += normal_logpdf(yw(s, i), xrow(d, i).dot(b), sigma2 / wi(d, i));
        }
        return lp;
      };
      auto& sc = c.scales["u:" + std::to_string(k)];
      s.u(static_cast<Eigen::Index>(g), k) =
          arwmh_step(target, s.u(static_cast<Eigen::Index>(g), k), sc, c.rng, cfg.target_accept,
                     cfg.adapt_exponent);
    }
  }

  if (!spec.probit()) {
    double ss = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i) {
      const double r = yw(s, i) - xrow(d, i).dot(s.beta + s.u.row(d.group[i]).transpose());
      ss += wi(d, i) * r * r;
    }
    double proper = 0.0;
    for (Eigen::Index k = 0; k < p1; ++k) {
      if (std::isfinite(prior_var(k))) {
        ss += s.beta(k) * s.beta(k) / prior_var(k);
        proper += 1.0;
      }
    }
    s.sigma2 = c.rng.inv_gamma(h.a0 / 2.0 + static_cast<double>(d.n()) / 2.0 + proper / 2.0,
                               h.a0 / 2.0 + ss / 2.0);
  }

  const Eigen::MatrixXd scale =
      h.s0 * Eigen::MatrixXd::Identity(p1, p1) + s.u.transpose() * s.u;
  s.T = c.rng.inv_wishart(static_cast<double>(p1) + 2.0 + static_cast<double>(G), scale);
  impute_latent(spec, d, c);
}

// ---- stick-breaking mixture ----

constexpr double kSliceDecay = 0.8;

bool power_law_sticks(const StickPriorSpec& st) {
  return st.family == StickFamily::normalized_stable || st.family == StickFamily::nig ||
         (st.family == StickFamily::pitman_yor && st.a > 0.0);
}

void step_ddp(const ModelSpec& spec, const ModelData& d, const SamplerConfig& cfg, ChainState& c) {
  auto& s = c.params;
  auto& rng = c.rng;
  const auto& hp = spec.ddp;
  const auto& st = spec.stick;
  const std::size_t units = ddp_units(d);
  const auto members = ddp_members(d);
  const auto dim = static_cast<Eigen::Index>(ddp_atom_dim(spec, d.p1()));

  std::size_t jstar = 0;
  for (int z : s.z) jstar = std::max(jstar, static_cast<std::size_t>(z) + 1);
  std::vector<std::size_t> counts(jstar, 0);
  for (int z : s.z) ++counts[static_cast<std::size_t>(z)];
  const auto occupied = static_cast<std::size_t>(
      std::count_if(counts.begin(), counts.end(), [](std::size_t m) { return m > 0; }));

  // 1. precision
  if (st.family == StickFamily::dp) {
    s.alpha = escobar_west_alpha(s.alpha, occupied, units, hp.a_alpha, hp.b_alpha, rng);
  }

  // 2-3. sticks up to the largest occupied label
  s.sticks.resize(std::max(s.sticks.size(), jstar), 0.5);
  std::vector<std::size_t> above(jstar, 0);
  for (std::size_t j = jstar; j-- > 0;) above[j] = (j + 1 < jstar ? above[j + 1] + counts[j + 1] : 0);
  if (st.beta_sticks()) {
    for (std::size_t j = 0; j < jstar; ++j) {
      const double a = (st.family == StickFamily::dp ? 1.0 : st.stick_a(j + 1)) +
                       static_cast<double>(counts[j]);
      const double b = (st.family == StickFamily::dp ? s.alpha : st.stick_b(j + 1)) +
                       static_cast<double>(above[j]);
      s.sticks[j] = stick_draw(a, b, rng);
    }
  } else if (st.family == StickFamily::geometric) {
    double n_sum = 0.0;
    double z_sum = 0.0;
    for (int z : s.z) {
      n_sum += 1.0;
      z_sum += static_cast<double>(z);
    }
    auto target = [&](double x) {
      const double v = inv_logit(x);
      if (!(v > 0.0 && v < 1.0)) return -kInf;
      return (st.a + n_sum) * std::log(v) + (st.b + z_sum) * std::log1p(-v);
    };
    const double v = inv_logit(arwmh_step(target, logit(s.sticks.front()), c.scales["stick"], rng,
                                          cfg.target_accept, cfg.adapt_exponent));
    std::fill(s.sticks.begin(), s.sticks.end(), v);
  } else {
    for (std::size_t j = 0; j < jstar; ++j) {
      auto target = [&](double x) {
        const double v = inv_logit(x);
        if (!(v > 0.0 && v < 1.0)) return -kInf;
        const double keep = s.sticks[j];
        s.sticks[j] = v;
        double lp = std::log(v) + std::log1p(-v);
        lp += static_cast<double>(counts[j]) * std::log(v) +
              static_cast<double>(above[j]) * std::log1p(-v);
        double lr = 0.0;
        for (std::size_t l = 0; l < j; ++l) lr += std::log1p(-s.sticks[l]);
        for (std::size_t l = j; l < jstar; ++l) {
          lp += nig_stick_log_density(s.sticks[l], st.c, l + 1, lr);
          lr += std::log1p(-s.sticks[l]);
        }
        s.sticks[j] = keep;
        return lp;
      };
      s.sticks[j] = inv_logit(arwmh_step(target, logit(s.sticks[j]), c.scales["stick"], rng,
                                         cfg.target_accept, cfg.adapt_exponent));
    }
  }
  s.sticks.resize(jstar);
  s.atoms.resize(jstar);

  // 4. baseline mean and covariance
  {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
    for (std::size_t j = 0; j < jstar; ++j) {
      if (counts[j]) sum += s.atoms[j].beta;
    }
    const Eigen::MatrixXd Tinv = s.T.llt().solve(Eigen::MatrixXd::Identity(dim, dim));
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(dim, dim) / hp.r0 +
                              static_cast<double>(occupied) * Tinv;
    s.mu = rng.mvn_precision(Tinv * sum, Q);
    Eigen::MatrixXd scale = hp.s0 * Eigen::MatrixXd::Identity(dim, dim);
    for (std::size_t j = 0; j < jstar; ++j) {
      if (counts[j]) {
        const Eigen::VectorXd r = s.atoms[j].beta - s.mu;
        scale += r * r.transpose();
      }
    }
    s.T = rng.inv_wishart(static_cast<double>(dim) + 2.0 + static_cast<double>(occupied), scale);
  }

  // 5. atoms
  std::vector<std::vector<std::size_t>> atom_rows(jstar);
  for (std::size_t i = 0; i < d.n(); ++i) {
    atom_rows[static_cast<std::size_t>(s.z[ddp_unit_of(d, i)])].push_back(i);
  }
  std::vector<double> off = slope_offsets(spec, d, s);
  const Eigen::LLT<Eigen::MatrixXd> tl(s.T);
  for (std::size_t j = 0; j < jstar; ++j) {
    if (!counts[j]) {
      s.atoms[j] = draw_ddp_atom(spec, s, rng);
      continue;
    }
    auto& atom = s.atoms[j];
    const auto& rows = atom_rows[j];
    if (hp.atom_gibbs) {
      const double var = atom_var(spec, s, atom.sigma2);
      const Eigen::MatrixXd Tinv = tl.solve(Eigen::MatrixXd::Identity(dim, dim));
      Eigen::MatrixXd Q = Tinv;
      Eigen::VectorXd b = Tinv * s.mu;
      for (std::size_t i : rows) {
        const Eigen::VectorXd x = spec.target == MixingTarget::intercept_only
                                      ? Eigen::VectorXd::Ones(1)
                                      : Eigen::VectorXd(xrow(d, i).transpose());
        const double wv = wi(d, i) / var;
        Q += wv * x * x.transpose();
        b += wv * x * (yw(s, i) - off[i]);
      }
      atom.beta = rng.mvn_precision(b, Q);
    } else {
      for (Eigen::Index k = 0; k < dim; ++k) {
        auto target = [&](double v) {
          Eigen::VectorXd bj = atom.beta;
          bj(k) = v;
          const Eigen::VectorXd r = bj - s.mu;
          return -0.5 * r.dot(tl.solve(r)) + unit_loglik(spec, d, s, off, rows, bj, atom.sigma2);
        };
        atom.beta(k) = arwmh_step(target, atom.beta(k), c.scales["atom:" + std::to_string(k)], rng,
                                  cfg.target_accept, cfg.adapt_exponent);
      }
    }
  }

  // 6. variances and common slopes
  if (spec.mixes_variance()) {
    for (std::size_t j = 0; j < jstar; ++j) {
      if (!counts[j]) continue;
      double ss = 0.0;
      for (std::size_t i : atom_rows[j]) {
        const double r = yw(s, i) - atom_mean(spec, d, s.atoms[j].beta, off, i);
        ss += wi(d, i) * r * r;
      }
      s.atoms[j].sigma2 = rng.inv_gamma(hp.a0 / 2.0 + static_cast<double>(atom_rows[j].size()) / 2.0,
                                        hp.a0 / 2.0 + ss / 2.0);
    }
  }
  const bool slopes = spec.target == MixingTarget::intercept_only && d.p1() > 1;
  if (slopes) {
    const Eigen::Index p = d.X.cols() - 1;
    Eigen::VectorXd r(d.X.rows());
    Eigen::VectorXd w_eff(d.X.rows());
    for (std::size_t i = 0; i < d.n(); ++i) {
      const auto& atom = s.atoms[static_cast<std::size_t>(s.z[ddp_unit_of(d, i)])];
      r(static_cast<Eigen::Index>(i)) = yw(s, i) - atom.beta(0);
      w_eff(static_cast<Eigen::Index>(i)) = wi(d, i) / atom_var(spec, s, atom.sigma2);
    }
    const double prior_scale = spec.shares_variance() ? s.sigma2 : 1.0;
    const Eigen::VectorXd bs =
        draw_regression_coefficients(d.X.rightCols(p), r, w_eff, 1.0, prior_scale,
                                     Eigen::VectorXd::Constant(p, hp.v_beta), rng);
    s.beta.tail(p) = bs;
    off = slope_offsets(spec, d, s);
  }
  if (spec.shares_variance()) {
    double ss = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i) {
      const auto& atom = s.atoms[static_cast<std::size_t>(s.z[ddp_unit_of(d, i)])];
      const double r = yw(s, i) - atom_mean(spec, d, atom.beta, off, i);
      ss += wi(d, i) * r * r;
    }
    double shape = hp.a0 / 2.0 + static_cast<double>(d.n()) / 2.0;
    if (slopes) {
      const Eigen::Index p = s.beta.size() - 1;
      ss += s.beta.tail(p).squaredNorm() / hp.v_beta;
      shape += static_cast<double>(p) / 2.0;
    }
    s.sigma2 = rng.inv_gamma(shape, hp.a0 / 2.0 + ss / 2.0);
  }

  // 7. slice variables. Power-law weights use the deterministic bound
  // xi_j = (1 - kappa) kappa^j so the active set stays finite.
  const bool bounded = power_law_sticks(st);
  auto xi = [](std::size_t j) { return (1.0 - kSliceDecay) * std::pow(kSliceDecay, static_cast<double>(j)); };
  {
    const auto w = weights_from_sticks(s.sticks).weights;
    s.slice.resize(units);
    for (std::size_t h = 0; h < units; ++h) {
      const auto z = static_cast<std::size_t>(s.z[h]);
      s.slice[h] = rng.uniform() * (bounded ? xi(z) : w[z]);
    }
  }
  const double u_min = *std::min_element(s.slice.begin(), s.slice.end());

  // 8. extend until every atom that could exceed a slice level exists
  double lr = log_remaining_mass(s.sticks);
  const std::size_t needed =
      bounded ? static_cast<std::size_t>(std::ceil(std::log(u_min / (1.0 - kSliceDecay)) / std::log(kSliceDecay)))
              : 0;
  while (bounded ? s.sticks.size() < needed : std::exp(lr) > u_min) {
    if (s.sticks.size() >= cfg.max_atoms) {
      fail(ErrorKind::numerical, "atom_cap",
           "active atom count reached the cap of " + std::to_string(cfg.max_atoms));
    }
    const double v = next_stick(spec, s, lr, rng);
    s.sticks.push_back(v);
    s.atoms.push_back(draw_ddp_atom(spec, s, rng));
    if (v >= 1.0) break;
    lr += std::log1p(-v);
  }

  // 9. allocations
  {
    const auto w = weights_from_sticks(s.sticks).weights;
    std::vector<double> logp;
    std::vector<std::size_t> idx;
    for (std::size_t h = 0; h < units; ++h) {
      logp.clear();
      idx.clear();
      for (std::size_t j = 0; j < w.size(); ++j) {
        if ((bounded ? xi(j) : w[j]) > s.slice[h]) {
          idx.push_back(j);
          double lp = unit_loglik(spec, d, s, off, members[h], s.atoms[j].beta, s.atoms[j].sigma2);
          if (bounded) lp += std::log(w[j]) - std::log(xi(j));
          logp.push_back(lp);
        }
      }
      if (idx.empty()) {
        fail(ErrorKind::numerical, "empty_slice", "no atom exceeds the slice level");
      }
      s.z[h] = static_cast<int>(idx[rng.categorical_log(logp)]);
    }
  }

  // 10. latent responses
  impute_latent(spec, d, c);
}

// ---- infinite probits ----

struct IpCache {
  std::vector<double> center;
  std::vector<double> scale;
};

IpCache ip_cache(const ModelSpec& spec, const ModelData& d, const ModelState& s) {
  IpCache cc;
  const Eigen::VectorXd ctr = d.X * s.beta_omega;
  cc.center.assign(ctr.data(), ctr.data() + ctr.size());
  if (spec.ip.heteroscedastic) {
    const Eigen::VectorXd lv = d.X * s.lambda_omega;
    for (Eigen::Index i = 0; i < lv.size(); ++i) cc.scale.push_back(std::sqrt(std::exp(lv(i))));
  } else {
    cc.scale.assign(d.n(), s.sigma_omega);
  }
  return cc;
}

// Sum over rows of log omega_{z_i}(x_i).
double ip_alloc_loglik(const ModelSpec& spec, const ModelData& d, const ModelState& s) {
  double lp = 0.0;
  const IpCache cc = ip_cache(spec, d, s);
  for (std::size_t i = 0; i < d.n(); ++i) lp += ip_log_weight(cc.center[i], cc.scale[i], s.z[i]);
  return lp;
}

IpAtom draw_ip_atom(const ModelSpec& spec, const ModelState& s, Rng& rng) {
  IpAtom a;
  a.mu = rng.normal(0.0, s.sigma_mu);
  a.sigma2 = spec.ip.heteroscedastic ? rng.inv_gamma(spec.ip.a0 / 2.0, spec.ip.a0 / 2.0) : 1.0;
  return a;
}

double ip_coef_prior_var(const IpHyper& h, const std::vector<int>& gamma, bool ssvs,
                         Eigen::Index k, double slab) {
  if (ssvs && k > 0 && !gamma[static_cast<std::size_t>(k)]) return slab * h.spike_ratio;
  return slab;
}

void step_ip(const ModelSpec& spec, const ModelData& d, const SamplerConfig& cfg, ChainState& c) {
  auto& s = c.params;
  auto& rng = c.rng;
  const auto& h = spec.ip;
  const bool hetero = h.heteroscedastic;
  const std::size_t n = d.n();
  const Eigen::Index p1 = d.X.cols();
  const double kernel_s2 = spec.probit() ? 1.0 : s.sigma2;

  std::vector<double> shift(n, 0.0);
  if (!hetero) {
    const Eigen::VectorXd xb = d.X * s.beta;
    for (std::size_t i = 0; i < n; ++i) shift[i] = xb(static_cast<Eigen::Index>(i));
  }
  auto kernel_ll = [&](std::size_t i, const IpAtom& a) {
    return normal_logpdf(yw(s, i), a.mu + shift[i], (hetero ? a.sigma2 : kernel_s2) / wi(d, i));
  };

  // 1-2. slice variables and allocations over the contiguous candidate window
  {
    const IpCache cc = ip_cache(spec, d, s);
    s.slice.resize(n);
    std::vector<double> logp;
    std::vector<int> idx;
    for (std::size_t i = 0; i < n; ++i) {
      const double lw = ip_log_weight(cc.center[i], cc.scale[i], s.z[i]);
      const double log_u = lw + std::log(rng.uniform());
      s.slice[i] = std::exp(log_u);
      logp.clear();
      idx.clear();
      auto visit = [&](int j) {
        if (!(ip_log_weight(cc.center[i], cc.scale[i], j) > log_u)) return false;
        auto it = s.ip_atoms.find(j);
        if (it == s.ip_atoms.end()) it = s.ip_atoms.emplace(j, draw_ip_atom(spec, s, rng)).first;
        idx.push_back(j);
        logp.push_back(kernel_ll(i, it->second));
        return true;
      };
      visit(s.z[i]);
      for (int j = s.z[i] - 1; visit(j); --j) {
      }
      for (int j = s.z[i] + 1; visit(j); ++j) {
      }
      s.z[i] = idx[rng.categorical_log(logp)];
    }
  }

  // 3. drop unoccupied atoms
  std::map<int, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < n; ++i) rows[s.z[i]].push_back(i);
  for (auto it = s.ip_atoms.begin(); it != s.ip_atoms.end();) {
    it = rows.count(it->first) ? std::next(it) : s.ip_atoms.erase(it);
  }

  // 4. atom locations (and variances)
  for (auto& [j, atom] : s.ip_atoms) {
    const auto& r = rows[j];
    const double var = hetero ? atom.sigma2 : kernel_s2;
    double prec = 1.0 / (s.sigma_mu * s.sigma_mu);
    double b = 0.0;
    for (std::size_t i : r) {
      prec += wi(d, i) / var;
      b += wi(d, i) * (yw(s, i) - shift[i]) / var;
    }
    atom.mu = rng.normal(b / prec, 1.0 / std::sqrt(prec));
    if (hetero) {
      double ss = 0.0;
      for (std::size_t i : r) ss += wi(d, i) * (yw(s, i) - atom.mu) * (yw(s, i) - atom.mu);
      atom.sigma2 = rng.inv_gamma(h.a0 / 2.0 + static_cast<double>(r.size()) / 2.0, h.a0 / 2.0 + ss / 2.0);
    }
  }

  // 5. spread of the atom locations
  {
    auto target = [&](double sm) {
      if (!(sm > 0.0 && sm < h.b_sigma_mu)) return -kInf;
      double lp = 0.0;
      for (const auto& [j, atom] : s.ip_atoms) lp += normal_logpdf(atom.mu, 0.0, sm * sm);
      return lp;
    };
    s.sigma_mu = stepping_out_slice(target, s.sigma_mu, std::min(1.0, h.b_sigma_mu / 2.0), 0.0,
                                    h.b_sigma_mu, rng);
  }

  // 6. kernel coefficients and variance
  if (!hetero) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      r(static_cast<Eigen::Index>(i)) = yw(s, i) - s.ip_atoms.at(s.z[i]).mu;
    }
    Eigen::VectorXd prior_var(p1);
    prior_var(0) = kInf;
    for (Eigen::Index k = 1; k < p1; ++k) {
      prior_var(k) = ip_coef_prior_var(h, s.gamma_kernel, h.ssvs_kernel, k, h.v);
    }
    if (spec.probit()) {
      s.beta = draw_regression_coefficients(d.X, r, d.w, 1.0, 1.0, prior_var, rng);
    } else {
      s.beta = draw_regression_coefficients(d.X, r, d.w, s.sigma2, s.sigma2, prior_var, rng);
      const Eigen::VectorXd e = r - d.X * s.beta;
      double ss = e.dot(d.w.cwiseProduct(e));
      for (Eigen::Index k = 1; k < p1; ++k) ss += s.beta(k) * s.beta(k) / prior_var(k);
      s.sigma2 = rng.inv_gamma(h.a0 / 2.0 + static_cast<double>(n) / 2.0 +
                                   static_cast<double>(p1 - 1) / 2.0,
                               h.a0 / 2.0 + ss / 2.0);
    }
  }

  // 7. weight coefficients and scale
  auto alloc_ll = [&]() { return ip_alloc_loglik(spec, d, s); };
  const double slab_scale = hetero ? 1.0 : s.sigma_omega * s.sigma_omega;
  for (Eigen::Index k = 0; k < p1; ++k) {
    const double keep = s.beta_omega(k);
    auto target = [&](double v) {
      s.beta_omega(k) = v;
      const double var = ip_coef_prior_var(h, s.gamma_weights, h.ssvs_weights, k, slab_scale * h.v_omega);
      const double lp = normal_logpdf(v, 0.0, var) + alloc_ll();
      s.beta_omega(k) = keep;
      return lp;
    };
    s.beta_omega(k) = arwmh_step(target, keep, c.scales["beta_omega:" + std::to_string(k)], rng,
                                 cfg.target_accept, cfg.adapt_exponent);
  }
  if (!hetero) {
    const double keep = s.sigma_omega;
    auto target = [&](double log_so) {
      const double so = std::exp(log_so);
      const double so2 = so * so;
      if (!(so2 > 0.0) || !std::isfinite(so2)) return -kInf;
      s.sigma_omega = so;
      double lp = log_inv_gamma_pdf(so2, h.a_omega / 2.0, h.a_omega / 2.0) + std::log(2.0) +
                  2.0 * log_so;
      for (Eigen::Index k = 0; k < p1; ++k) {
        lp += normal_logpdf(s.beta_omega(k), 0.0,
                            ip_coef_prior_var(h, s.gamma_weights, h.ssvs_weights, k, so2 * h.v_omega));
      }
      lp += alloc_ll();
      s.sigma_omega = keep;
      return lp;
    };
    s.sigma_omega = std::exp(arwmh_step(target, std::log(keep), c.scales["log_sigma_omega"], rng,
                                        cfg.target_accept, cfg.adapt_exponent));
  } else {
    for (Eigen::Index k = 0; k < p1; ++k) {
      const double keep = s.lambda_omega(k);
      auto target = [&](double v) {
        s.lambda_omega(k) = v;
        const double var = ip_coef_prior_var(h, s.gamma_lambda, h.ssvs_weights, k, h.v_omega);
        const double lp = normal_logpdf(v, 0.0, var) + alloc_ll();
        s.lambda_omega(k) = keep;
        return lp;
      };
      s.lambda_omega(k) = arwmh_step(target, keep, c.scales["lambda_omega:" + std::to_string(k)],
                                     rng, cfg.target_accept, cfg.adapt_exponent);
    }
  }

  // 8. inclusion indicators
  if (h.ssvs_kernel && !hetero) {
    const double scale2 = spec.probit() ? 1.0 : s.sigma2;
    for (Eigen::Index k = 1; k < p1; ++k) {
      const double pr = ssvs_inclusion_probability(s.beta(k), scale2 * h.v, scale2 * h.v * h.spike_ratio,
                                                   h.inclusion_prob);
      s.gamma_kernel[static_cast<std::size_t>(k)] = rng.uniform() < pr ? 1 : 0;
    }
  }
  if (h.ssvs_weights) {
    const double slab = (hetero ? 1.0 : s.sigma_omega * s.sigma_omega) * h.v_omega;
    for (Eigen::Index k = 1; k < p1; ++k) {
      const double pr = ssvs_inclusion_probability(s.beta_omega(k), slab, slab * h.spike_ratio,
                                                   h.inclusion_prob);
      s.gamma_weights[static_cast<std::size_t>(k)] = rng.uniform() < pr ? 1 : 0;
      if (hetero) {
        const double pl = ssvs_inclusion_probability(s.lambda_omega(k), h.v_omega,
                                                     h.v_omega * h.spike_ratio, h.inclusion_prob);
        s.gamma_lambda[static_cast<std::size_t>(k)] = rng.uniform() < pl ? 1 : 0;
      }
    }
  }

  impute_latent(spec, d, c);
}

void check_finite(const ModelSpec& spec, const ModelState& s) {
  bool ok = std::isfinite(s.sigma2) && s.sigma2 > 0.0 && s.beta.allFinite() &&
            s.y_work.allFinite();
  if (spec.family == Family::ddp_mixture) {
    ok = ok && s.mu.allFinite() && s.T.allFinite() && std::isfinite(s.alpha);
    for (const auto& a : s.atoms) ok = ok && a.beta.allFinite() && std::isfinite(a.sigma2);
  }
  if (spec.family == Family::infinite_probits) {
    ok = ok && std::isfinite(s.sigma_mu) && s.beta_omega.allFinite() && std::isfinite(s.sigma_omega);
    for (const auto& [j, a] : s.ip_atoms) ok = ok && std::isfinite(a.mu) && std::isfinite(a.sigma2);
  }
  if (spec.family == Family::hlm2) ok = ok && s.u.allFinite() && s.T.allFinite();
  if (!ok) fail(ErrorKind::numerical, "non_finite_state", "sampler produced a non-finite value");
}

void accumulate_fit(const ModelSpec& spec, const ModelData& d, ChainState& c) {
  auto& f = c.fit;
  const std::size_t n = d.n();
  if (f.sum_mean.size() != n) {
    f.sum_mean.assign(n, 0.0);
    f.sum_second.assign(n, 0.0);
    f.sum_y.assign(n, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int g = spec.family == Family::hlm2 ? d.group[i] : -1;
    const auto mix = conditional_mixture(spec, c.params, xrow(d, i), wi(d, i), g);
    if (spec.probit()) {
      const double p = mixture_ccdf(mix, 0.0);
      f.sum_mean[i] += p;
      f.sum_second[i] += p;
    } else {
      f.sum_mean[i] += mixture_mean(mix);
      f.sum_second[i] += mixture_second_moment(mix);
    }
    f.sum_y[i] += yw(c.params, i);
  }
  f.count += 1;
}

}  // namespace

std::pair<double, double> kernel_moments(const ModelSpec& spec, const ModelData& d,
                                         const ModelState& s, std::size_t i) {
  const auto x = xrow(d, i);
  const double sigma2 = spec.probit() ? 1.0 : s.sigma2;
  switch (spec.family) {
    case Family::linear_nig: return {x.dot(s.beta), sigma2 / wi(d, i)};
    case Family::hlm2:
      return {x.dot(s.beta + s.u.row(d.group[i]).transpose()), sigma2 / wi(d, i)};
    case Family::ddp_mixture: {
      const auto j = static_cast<std::size_t>(s.z[ddp_unit_of(d, i)]);
      return {ddp_kernel_mean(spec, s, x, j), ddp_kernel_var(spec, s, j) / wi(d, i)};
    }
    case Family::infinite_probits: {
      const auto& a = s.ip_atoms.at(s.z[i]);
      if (spec.ip.heteroscedastic) return {a.mu, a.sigma2 / wi(d, i)};
      return {a.mu + x.dot(s.beta), sigma2 / wi(d, i)};
    }
  }
  return {0.0, 1.0};
}

ChainState init_chain(const ModelSpec& spec, const ModelData& d, std::uint64_t seed) {
  ChainState c;
  c.rng = Rng(seed);
  auto& s = c.params;
  const std::size_t n = d.n();
  const Eigen::Index p1 = d.X.cols();

  // Starting responses: probit scores at +-1, censored rows near their bounds.
  s.y_work = d.y;
  double ysd = 1.0;
  {
    std::vector<double> obs;
    for (std::size_t i = 0; i < n; ++i) {
      if (!d.censored(i)) obs.push_back(d.y(static_cast<Eigen::Index>(i)));
    }
    if (obs.size() > 1) {
      const double m = std::accumulate(obs.begin(), obs.end(), 0.0) / static_cast<double>(obs.size());
      double v = 0.0;
      for (double o : obs) v += (o - m) * (o - m);
      v /= static_cast<double>(obs.size() - 1);
      if (v > 0.0) ysd = std::sqrt(v);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (spec.probit()) {
      yw(s, i) = d.y(static_cast<Eigen::Index>(i)) == 1.0 ? 1.0 : -1.0;
    } else if (d.censored(i)) {
      const auto& cs = d.censor[i];
      switch (cs.kind) {
        case CensorKind::interval: yw(s, i) = 0.5 * (cs.lb + cs.ub); break;
        case CensorKind::right: yw(s, i) = cs.lb + ysd; break;
        case CensorKind::left: yw(s, i) = cs.ub - ysd; break;
        case CensorKind::uncensored: break;
      }
    }
  }

  s.beta = least_squares(d.X, s.y_work, d.w);
  if (spec.probit()) {
    s.sigma2 = 1.0;
  } else {
    const Eigen::VectorXd r = s.y_work - d.X * s.beta;
    const double ss = r.dot(d.w.cwiseProduct(r));
    const double dof = static_cast<double>(n) - static_cast<double>(p1);
    s.sigma2 = dof > 0.0 && ss > 0.0 ? ss / dof : ysd * ysd;
    if (!(s.sigma2 > 1e-12)) s.sigma2 = 1.0;
  }

  switch (spec.family) {
    case Family::linear_nig: break;
    case Family::hlm2:
      s.u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.n_groups()), p1);
      s.T = Eigen::MatrixXd::Identity(p1, p1);
      break;
    case Family::ddp_mixture: {
      const auto dim = static_cast<Eigen::Index>(ddp_atom_dim(spec, d.p1()));
      DdpAtom a;
      a.beta = s.beta.head(dim);
      a.sigma2 = s.sigma2;
      s.atoms = {a};
      s.mu = a.beta;
      s.T = spec.ddp.s0 * Eigen::MatrixXd::Identity(dim, dim);
      s.alpha = 1.0;
      if (spec.target != MixingTarget::intercept_only) s.beta.setZero();
      s.sticks = {next_stick(spec, s, 0.0, c.rng)};
      s.z.assign(ddp_units(d), 0);
      break;
    }
    case Family::infinite_probits: {
      const auto& h = spec.ip;
      s.beta_omega = Eigen::VectorXd::Zero(p1);
      s.beta_omega(0) = -0.5;
      s.sigma_omega = 1.0;
      s.sigma_mu = std::min(1.0, h.b_sigma_mu / 2.0);
      IpAtom a;
      if (h.heteroscedastic) {
        s.lambda_omega = Eigen::VectorXd::Zero(p1);
        const double m = s.y_work.mean();
        a.mu = m;
        a.sigma2 = std::max((s.y_work.array() - m).square().mean(), 1e-6);
        if (spec.probit()) a.sigma2 = 1.0;
        s.beta = Eigen::VectorXd::Zero(p1);
      }
      s.ip_atoms = {{0, a}};
      s.z.assign(n, 0);
      s.gamma_kernel.assign(static_cast<std::size_t>(p1), 1);
      s.gamma_weights.assign(static_cast<std::size_t>(p1), 1);
      s.gamma_lambda.assign(static_cast<std::size_t>(p1), 1);
      break;
    }
  }
  return c;
}

void chain_step(const ModelSpec& spec, const ModelData& d, const SamplerConfig& cfg, ChainState& c) {
  switch (spec.family) {
    case Family::linear_nig: step_linear(spec, d, c); break;
    case Family::hlm2: step_hlm(spec, d, cfg, c); break;
    case Family::ddp_mixture: step_ddp(spec, d, cfg, c); break;
    case Family::infinite_probits: step_ip(spec, d, cfg, c); break;
  }
  check_finite(spec, c.params);
}

// ---- stored draws ----

namespace {

std::vector<std::string> lower_triangle_names(Eigen::Index d) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      out.push_back("T_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    }
  }
  return out;
}

std::size_t count_clusters(const std::vector<int>& z) {
  return std::set<int>(z.begin(), z.end()).size();
}

}  // namespace

std::vector<std::string> parameter_names(const ModelSpec& spec, const ModelData& d) {
  std::vector<std::string> out;
  const auto& cn = d.coef_names;
  auto add_coefs = [&](const std::string& prefix, std::size_t from, std::size_t to) {
    for (std::size_t k = from; k < to; ++k) out.push_back(prefix + ":" + cn[k]);
  };
  const bool probit = spec.probit();
  switch (spec.family) {
    case Family::linear_nig:
      add_coefs("beta", 0, cn.size());
      if (!probit) out.push_back("sigma2");
      break;
    case Family::hlm2: {
      add_coefs("beta", 0, cn.size());
      if (!probit) out.push_back("sigma2");
      const auto t = lower_triangle_names(static_cast<Eigen::Index>(cn.size()));
      out.insert(out.end(), t.begin(), t.end());
      break;
    }
    case Family::ddp_mixture: {
      const std::size_t dim = ddp_atom_dim(spec, cn.size());
      if (spec.stick.family == StickFamily::dp) out.push_back("alpha");
      if (spec.shares_variance()) out.push_back("sigma2");
      if (spec.target == MixingTarget::intercept_only) add_coefs("beta", 1, cn.size());
      add_coefs("mu", 0, dim);
      const auto t = lower_triangle_names(static_cast<Eigen::Index>(dim));
      out.insert(out.end(), t.begin(), t.end());
      out.push_back("clusters");
      break;
    }
    case Family::infinite_probits: {
      const auto& h = spec.ip;
      out.push_back("sigma_mu");
      if (!h.heteroscedastic) {
        add_coefs("beta", 0, cn.size());
        if (!probit) out.push_back("sigma2");
      }
      add_coefs("beta_omega", 0, cn.size());
      if (h.heteroscedastic) {
        add_coefs("lambda_omega", 0, cn.size());
      } else {
        out.push_back("sigma_omega");
      }
      if (h.ssvs_kernel) add_coefs("gamma", 1, cn.size());
      if (h.ssvs_weights) {
        add_coefs("gamma_omega", 1, cn.size());
        if (h.heteroscedastic) add_coefs("gamma_lambda", 1, cn.size());
      }
      out.push_back("clusters");
      break;
    }
  }
  return out;
}

std::vector<std::string> atom_coef_names(const ModelSpec& spec, const ModelData& d) {
  switch (spec.family) {
    case Family::linear_nig: return {};
    case Family::hlm2: return d.coef_names;
    case Family::ddp_mixture:
      return {d.coef_names.begin(),
              d.coef_names.begin() + static_cast<std::ptrdiff_t>(ddp_atom_dim(spec, d.p1()))};
    case Family::infinite_probits: return {"mu"};
  }
  return {};
}

std::vector<double> parameter_row(const ModelSpec& spec, const ModelData& d, const ModelState& s) {
  std::vector<double> out;
  auto add_vec = [&](const Eigen::VectorXd& v, Eigen::Index from) {
    for (Eigen::Index k = from; k < v.size(); ++k) out.push_back(v(k));
  };
  auto add_tri = [&](const Eigen::MatrixXd& T) {
    for (Eigen::Index i = 0; i < T.rows(); ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) out.push_back(T(i, j));
    }
  };
  auto add_ints = [&](const std::vector<int>& g) {
    for (std::size_t k = 1; k < g.size(); ++k) out.push_back(g[k]);
  };
  const bool probit = spec.probit();
  switch (spec.family) {
    case Family::linear_nig:
      add_vec(s.beta, 0);
      if (!probit) out.push_back(s.sigma2);
      break;
    case Family::hlm2:
      add_vec(s.beta, 0);
      if (!probit) out.push_back(s.sigma2);
      add_tri(s.T);
      break;
    case Family::ddp_mixture:
      if (spec.stick.family == StickFamily::dp) out.push_back(s.alpha);
      if (spec.shares_variance()) out.push_back(s.sigma2);
      if (spec.target == MixingTarget::intercept_only) add_vec(s.beta, 1);
      add_vec(s.mu, 0);
      add_tri(s.T);
      out.push_back(static_cast<double>(count_clusters(s.z)));
      break;
    case Family::infinite_probits: {
      const auto& h = spec.ip;
      out.push_back(s.sigma_mu);
      if (!h.heteroscedastic) {
        add_vec(s.beta, 0);
        if (!probit) out.push_back(s.sigma2);
      }
      add_vec(s.beta_omega, 0);
      if (h.heteroscedastic) {
        add_vec(s.lambda_omega, 0);
      } else {
        out.push_back(s.sigma_omega);
      }
      if (h.ssvs_kernel) add_ints(s.gamma_kernel);
      if (h.ssvs_weights) {
        add_ints(s.gamma_weights);
        if (h.heteroscedastic) add_ints(s.gamma_lambda);
      }
      out.push_back(static_cast<double>(count_clusters(s.z)));
      break;
    }
  }
  (void)d;
  return out;
}

std::vector<AtomDraw> atom_draws(const ModelSpec& spec, const ModelData& d, const ModelState& s) {
  std::vector<AtomDraw> out;
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  switch (spec.family) {
    case Family::linear_nig: break;
    case Family::hlm2:
      for (Eigen::Index g = 0; g < s.u.rows(); ++g) {
        out.push_back({static_cast<int>(g), 0.0, 0.0, vec(s.u.row(g).transpose())});
      }
      break;
    case Family::ddp_mixture: {
      const auto w = weights_from_sticks(s.sticks).weights;
      std::set<int> occ(s.z.begin(), s.z.end());
      for (int j : occ) {
        const auto& a = s.atoms[static_cast<std::size_t>(j)];
        out.push_back({j + 1, w[static_cast<std::size_t>(j)],
                       ddp_kernel_var(spec, s, static_cast<std::size_t>(j)), vec(a.beta)});
      }
      break;
    }
    case Family::infinite_probits:
      for (const auto& [j, a] : s.ip_atoms) {
        const double var = spec.ip.heteroscedastic ? a.sigma2 : (spec.probit() ? 1.0 : s.sigma2);
        out.push_back({j, 0.0, var, {a.mu}});
      }
      break;
  }
  (void)d;
  return out;
}

ModelState state_from_draw(const ModelSpec& spec, std::size_t p1, std::size_t n_groups,
                           const SampleStore& store, std::size_t r) {
  const auto row = store.row(r);
  std::size_t pos = 0;
  auto next = [&]() {
    if (pos >= row.size()) fail(ErrorKind::io, "corrupt_samples", "stored draw is too short");
    return row[pos++];
  };
  auto read_vec = [&](Eigen::VectorXd& v, Eigen::Index size, Eigen::Index from) {
    v = Eigen::VectorXd::Zero(size);
    for (Eigen::Index k = from; k < size; ++k) v(k) = next();
  };
  auto read_tri = [&](Eigen::MatrixXd& T, Eigen::Index dim) {
    T = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) T(i, j) = T(j, i) = next();
    }
  };
  auto read_ints = [&](std::vector<int>& g) {
    g.assign(p1, 1);
    for (std::size_t k = 1; k < p1; ++k) g[k] = static_cast<int>(next());
  };
  auto to_vec = [](const std::vector<double>& c) {
    return Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())).eval();
  };

  ModelState s;
  const auto P = static_cast<Eigen::Index>(p1);
  const bool probit = spec.probit();
  s.sigma2 = 1.0;
  switch (spec.family) {
    case Family::linear_nig:
      read_vec(s.beta, P, 0);
      if (!probit) s.sigma2 = next();
      break;
    case Family::hlm2:
      read_vec(s.beta, P, 0);
      if (!probit) s.sigma2 = next();
      read_tri(s.T, P);
      s.u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_groups), P);
      for (const auto& a : store.atoms(r)) {
        if (a.label >= 0 && static_cast<std::size_t>(a.label) < n_groups) {
          s.u.row(a.label) = to_vec(a.coef).transpose();
        }
      }
      break;
    case Family::ddp_mixture: {
      const auto dim = static_cast<Eigen::Index>(ddp_atom_dim(spec, p1));
      if (spec.stick.family == StickFamily::dp) s.alpha = next();
      if (spec.shares_variance()) s.sigma2 = next();
      if (spec.target == MixingTarget::intercept_only) {
        read_vec(s.beta, P, 1);
      } else {
        s.beta = Eigen::VectorXd::Zero(P);
      }
      read_vec(s.mu, dim, 0);
      read_tri(s.T, dim);
      for (const auto& a : store.atoms(r)) {
        s.atoms.push_back({to_vec(a.coef), a.sigma2});
        s.atom_weights.push_back(a.weight);
      }
      break;
    }
    case Family::infinite_probits: {
      const auto& h = spec.ip;
      s.sigma_mu = next();
      if (!h.heteroscedastic) {
        read_vec(s.beta, P, 0);
        if (!probit) s.sigma2 = next();
      } else {
        s.beta = Eigen::VectorXd::Zero(P);
      }
      read_vec(s.beta_omega, P, 0);
      if (h.heteroscedastic) {
        read_vec(s.lambda_omega, P, 0);
      } else {
        s.sigma_omega = next();
      }
      if (h.ssvs_kernel) read_ints(s.gamma_kernel);
      if (h.ssvs_weights) {
        read_ints(s.gamma_weights);
        if (h.heteroscedastic) read_ints(s.gamma_lambda);
      }
      for (const auto& a : store.atoms(r)) {
        s.ip_atoms[a.label] = IpAtom{a.coef.empty() ? 0.0 : a.coef[0], a.sigma2};
      }
      break;
    }
  }
  return s;
}

SampleStore empty_store(const ModelSpec& spec, const ModelData& d) {
  return SampleStore(parameter_names(spec, d), atom_coef_names(spec, d));
}

std::uint64_t progress_interval(std::uint64_t total) {
  return std::max<std::uint64_t>((total + 99) / 100, 100);
}

RunResult run_chain(const ModelSpec& spec, const ModelData& d, const SamplerConfig& cfg,
                    ChainState& c, SampleStore& store, const RunHooks& hooks) {
  cfg.validate();
  RunResult res;
  const std::uint64_t every = progress_interval(cfg.iterations);
  for (std::uint64_t t = 0; t < cfg.iterations; ++t) {
    if (hooks.cancel && hooks.cancel->load()) {
      res.cancelled = true;
      break;
    }
    chain_step(spec, d, cfg, c);
    c.iteration += 1;
    accumulate_fit(spec, d, c);
    if (c.iteration % cfg.thin == 0) {
      store.append(c.iteration, parameter_row(spec, d, c.params), atom_draws(spec, d, c.params));
    }
    res.completed += 1;
    if (hooks.on_iteration) hooks.on_iteration(c);
    if (hooks.on_progress && (res.completed % every == 0 || res.completed == cfg.iterations)) {
      hooks.on_progress(res.completed, cfg.iterations);
    }
  }
  return res;
}

FitMoments fit_moments(const ModelData& d, const FitAccumulator& acc) {
  if (acc.count == 0 || acc.sum_mean.size() != d.n()) {
    invalid("no_draws", "the chain has not been run");
  }
  FitMoments m;
  const double S = static_cast<double>(acc.count);
  for (std::size_t i = 0; i < d.n(); ++i) {
    const double e = acc.sum_mean[i] / S;
    m.mean.push_back(e);
    m.var.push_back(std::max(acc.sum_second[i] / S - e * e, 0.0));
    const double y = d.y(static_cast<Eigen::Index>(i));
    m.y.push_back(d.censored(i) && is_missing(y) ? acc.sum_y[i] / S : y);
  }
  return m;
}

// ---- chain state text form ----

namespace {

using nlohmann::json;

json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Eigen::MatrixXd json_mat(const json& j) {
  Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) = json_vec(j.at("data").at(i)).transpose();
  return m;
}

}  // namespace

std::string serialize_chain(const ChainState& c) {
  const auto& s = c.params;
  json p;
  p["beta"] = vec_json(s.beta);
  p["sigma2"] = s.sigma2;
  p["u"] = mat_json(s.u);
  p["T"] = mat_json(s.T);
  p["sticks"] = s.sticks;
  json atoms = json::array();
  for (const auto& a : s.atoms) atoms.push_back({{"beta", vec_json(a.beta)}, {"sigma2", a.sigma2}});
  p["atoms"] = atoms;
  p["atom_weights"] = s.atom_weights;
  p["mu"] = vec_json(s.mu);
  p["alpha"] = s.alpha;
  json ip = json::array();
  for (const auto& [j, a] : s.ip_atoms) ip.push_back({j, a.mu, a.sigma2});
  p["ip_atoms"] = ip;
  p["sigma_mu"] = s.sigma_mu;
  p["beta_omega"] = vec_json(s.beta_omega);
  p["sigma_omega"] = s.sigma_omega;
  p["lambda_omega"] = vec_json(s.lambda_omega);
  p["gamma_kernel"] = s.gamma_kernel;
  p["gamma_weights"] = s.gamma_weights;
  p["gamma_lambda"] = s.gamma_lambda;
  p["z"] = s.z;
  p["slice"] = s.slice;
  p["y_work"] = vec_json(s.y_work);

  json scales = json::object();
  for (const auto& [k, a] : c.scales) scales[k] = {a.scale, a.steps, a.accepted};
  json out;
  out["iteration"] = c.iteration;
  out["params"] = p;
  out["scales"] = scales;
  out["rng"] = c.rng.save();
  out["fit"] = {{"sum_mean", c.fit.sum_mean},
                {"sum_second", c.fit.sum_second},
                {"sum_y", c.fit.sum_y},
                {"count", c.fit.count}};
  return out.dump(1) + "\n";
}

ChainState deserialize_chain(const std::string& text) {
  ChainState c;
  try {
    const json in = json::parse(text);
    const json& p = in.at("params");
    auto& s = c.params;
    s.beta = json_vec(p.at("beta"));
    s.sigma2 = p.at("sigma2").get<double>();
    s.u = json_mat(p.at("u"));
    s.T = json_mat(p.at("T"));
    s.sticks = p.at("sticks").get<std::vector<double>>();
    for (const auto& a : p.at("atoms")) {
      s.atoms.push_back({json_vec(a.at("beta")), a.at("sigma2").get<double>()});
    }
    s.atom_weights = p.at("atom_weights").get<std::vector<double>>();
    s.mu = json_vec(p.at("mu"));
    s.alpha = p.at("alpha").get<double>();
    for (const auto& a : p.at("ip_atoms")) {
      s.ip_atoms[a.at(0).get<int>()] = IpAtom{a.at(1).get<double>(), a.at(2).get<double>()};
    }
    s.sigma_mu = p.at("sigma_mu").get<double>();
    s.beta_omega = json_vec(p.at("beta_omega"));
    s.sigma_omega = p.at("sigma_omega").get<double>();
    s.lambda_omega = json_vec(p.at("lambda_omega"));
    s.gamma_kernel = p.at("gamma_kernel").get<std::vector<int>>();
    s.gamma_weights = p.at("gamma_weights").get<std::vector<int>>();
    s.gamma_lambda = p.at("gamma_lambda").get<std::vector<int>>();
    s.z = p.at("z").get<std::vector<int>>();
    s.slice = p.at("slice").get<std::vector<double>>();
    s.y_work = json_vec(p.at("y_work"));
    for (const auto& [k, v] : in.at("scales").items()) {
      c.scales[k] = AdaptiveScale{v.at(0).get<double>(), v.at(1).get<std::uint64_t>(),
                                  v.at(2).get<std::uint64_t>()};
    }
    c.iteration = in.at("iteration").get<std::uint64_t>();
    c.rng.restore(in.at("rng").get<std::string>());
    const json& f = in.at("fit");
    c.fit.sum_mean = f.at("sum_mean").get<std::vector<double>>();
    c.fit.sum_second = f.at("sum_second").get<std::vector<double>>();
    c.fit.sum_y = f.at("sum_y").get<std::vector<double>>();
    c.fit.count = f.at("count").get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::io, "corrupt_state", std::string("chain state is unreadable: ") + e.what());
  }
  return c;
}

}  // namespace bnpreg
