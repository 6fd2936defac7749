#include "bnpreg/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <boost/math/special_functions/gamma.hpp>

#include "bnpreg/error.hpp"
#include "bnpreg/special.hpp"

namespace bnpreg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kTailPoints = 16;

template <class E>
E enum_from(const std::string& s, std::initializer_list<E> all, const char* what) {
  for (E e : all) {
    if (to_string(e) == s) return e;
  }
  invalid(std::string("unknown_") + what, std::string("unknown ") + what + " " + s);
}

// Inverse-gamma quantiles at the midpoints of 16 equal-probability bins.
std::vector<double> inv_gamma_nodes(double shape, double rate) {
  std::vector<double> out(kTailPoints);
  for (int k = 0; k < kTailPoints; ++k) {
    const double u = (k + 0.5) / kTailPoints;
    out[static_cast<std::size_t>(k)] = rate / boost::math::gamma_p_inv(shape, 1.0 - u);
  }
  return out;
}

void add_variance_mixed_tail(std::vector<MixtureComponent>& mix, double weight, double mean,
                             double fixed_var, double shape, double rate, double obs_weight) {
  if (!(weight > 0.0)) return;
  for (double s2 : inv_gamma_nodes(shape, rate)) {
    mix.push_back({weight / kTailPoints, mean, fixed_var + s2 / obs_weight});
  }
}

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::linear_nig: return "linear_nig";
    case Family::hlm2: return "hlm2";
    case Family::ddp_mixture: return "ddp_mixture";
    case Family::infinite_probits: return "infinite_probits";
  }
  return "linear_nig";
}

std::string to_string(Link l) { return l == Link::identity ? "identity" : "binary_probit"; }

std::string to_string(MixingTarget t) {
  switch (t) {
    case MixingTarget::intercept_only: return "intercept_only";
    case MixingTarget::coefficients: return "coefficients";
    case MixingTarget::coefficients_and_variance: return "coefficients_and_variance";
  }
  return "coefficients";
}

Family family_from_string(const std::string& s) {
  return enum_from(s, {Family::linear_nig, Family::hlm2, Family::ddp_mixture,
                       Family::infinite_probits}, "family");
}

Link link_from_string(const std::string& s) {
  return enum_from(s, {Link::identity, Link::binary_probit}, "link");
}

MixingTarget mixing_target_from_string(const std::string& s) {
  return enum_from(s, {MixingTarget::intercept_only, MixingTarget::coefficients,
                       MixingTarget::coefficients_and_variance}, "mixing_target");
}

bool ModelSpec::shares_variance() const { return !mixes_variance() && !probit(); }

void ModelSpec::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      invalid("bad_hyperparameter", std::string(name) + " must be positive and finite");
    }
  };
  auto check_linear = [&](const LinearHyper& h) {
    positive(h.v_beta, "v_beta");
    positive(h.a0, "a0");
    if (!h.flat_intercept) positive(h.v_beta0, "v_beta0");
  };
  switch (family) {
    case Family::linear_nig: check_linear(linear); break;
    case Family::hlm2:
      check_linear(hlm);
      positive(hlm.s0, "s0");
      break;
    case Family::ddp_mixture:
      stick.validate();
      positive(ddp.a0, "a0");
      positive(ddp.r0, "r0");
      positive(ddp.s0, "s0");
      positive(ddp.a_alpha, "a_alpha");
      positive(ddp.b_alpha, "b_alpha");
      positive(ddp.v_beta, "v_beta");
      if (probit() && target == MixingTarget::coefficients_and_variance) {
        invalid("probit_mixed_variance", "the probit link fixes the kernel variance at 1");
      }
      break;
    case Family::infinite_probits:
      positive(ip.b_sigma_mu, "b_sigma_mu");
      positive(ip.v, "v");
      positive(ip.a0, "a0");
      positive(ip.v_omega, "v_omega");
      positive(ip.a_omega, "a_omega");
      positive(ip.spike_ratio, "spike_ratio");
      if (!(ip.inclusion_prob > 0.0 && ip.inclusion_prob < 1.0)) {
        invalid("bad_hyperparameter", "inclusion_prob must lie in (0,1)");
      }
      if (probit() && ip.heteroscedastic) {
        invalid("probit_mixed_variance", "the probit link fixes the kernel variance at 1");
      }
      if (ip.heteroscedastic && ip.ssvs_kernel) {
        invalid("ssvs_without_coefficients", "the heteroscedastic kernels have no coefficients");
      }
      break;
  }
}

bool ModelData::has_censoring() const {
  return std::any_of(censor.begin(), censor.end(),
                     [](const CensorStatus& c) { return c.kind != CensorKind::uncensored; });
}

ModelData build_model_data(const DataTable& table, const RoleAssignment& roles,
                           const ModelSpec& spec) {
  spec.validate();
  roles.validate(table);
  if (spec.family == Family::hlm2 && !roles.group) {
    invalid("missing_group", "the 2-level model needs a group column");
  }
  if (roles.group && spec.family != Family::hlm2 && spec.family != Family::ddp_mixture) {
    invalid("group_not_supported", "a group column is only used by hlm2 and ddp_mixture");
  }
  if (spec.probit() && roles.weights) {
    invalid("probit_weights", "observation weights are not available with the probit link");
  }
  if (spec.probit() && roles.censor_lb) {
    invalid("probit_censoring", "censoring is not available with the probit link");
  }

  const auto& y = table.column(roles.dependent).values;
  std::vector<const std::vector<double>*> xs;
  for (const auto& c : roles.covariates) xs.push_back(&table.column(c).values);
  const std::vector<double>* w = roles.weights ? &table.column(*roles.weights).values : nullptr;
  const std::vector<double>* g = roles.group ? &table.column(*roles.group).values : nullptr;
  std::vector<CensorStatus> censor_all;
  if (roles.censor_lb) {
    censor_all = parse_censoring(table, *roles.censor_lb, *roles.censor_ub, roles.dependent);
  }

  ModelData d;
  d.coef_names.push_back("(Intercept)");
  for (const auto& c : roles.covariates) d.coef_names.push_back(c);
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    bool ok = true;
    for (const auto* col : xs) ok = ok && !is_missing((*col)[i]);
    if (w) ok = ok && !is_missing((*w)[i]);
    if (g) ok = ok && !is_missing((*g)[i]);
    const bool cens = !censor_all.empty() && censor_all[i].kind != CensorKind::uncensored;
    if (!cens) ok = ok && !is_missing(y[i]);
    if (ok) d.rows.push_back(i);
  }
  const std::size_t n = d.rows.size();
  if (n == 0) invalid("no_complete_rows", "no rows are complete for the assigned roles");
  const std::size_t p1 = xs.size() + 1;
  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p1));
  d.y.resize(static_cast<Eigen::Index>(n));
  d.w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = d.rows[r];
    const auto ri = static_cast<Eigen::Index>(r);
    d.X(ri, 0) = 1.0;
    for (std::size_t k = 0; k < xs.size(); ++k) d.X(ri, static_cast<Eigen::Index>(k + 1)) = (*xs[k])[i];
    d.y(ri) = y[i];
    if (w) {
      if (!((*w)[i] > 0.0)) {
        invalid("bad_weight", "row " + std::to_string(i + 1) + ": weights must be positive");
      }
      d.w(ri) = (*w)[i];
    }
    if (!censor_all.empty()) d.censor.push_back(censor_all[i]);
    if (spec.probit() && y[i] != 0.0 && y[i] != 1.0) {
      invalid("non_binary_response", "row " + std::to_string(i + 1) +
                                         ": the probit link needs a 0/1 dependent variable");
    }
  }
  d.weighted = w != nullptr;
  if (g) {
    std::set<double> levels;
    for (std::size_t i : d.rows) levels.insert((*g)[i]);
    d.group_values.assign(levels.begin(), levels.end());
    for (std::size_t i : d.rows) {
      const auto it = std::lower_bound(d.group_values.begin(), d.group_values.end(), (*g)[i]);
      d.group.push_back(static_cast<int>(it - d.group_values.begin()));
    }
  }
  return d;
}

double mixture_pdf(std::span<const MixtureComponent> mix, double y) {
  double s = 0.0;
  for (const auto& c : mix) s += c.weight * normal_pdf(y, c.mean, std::sqrt(c.var));
  return s;
}

double mixture_cdf(std::span<const MixtureComponent> mix, double y) {
  double s = 0.0;
  for (const auto& c : mix) s += c.weight * normal_cdf((y - c.mean) / std::sqrt(c.var));
  return s;
}

double mixture_ccdf(std::span<const MixtureComponent> mix, double y) {
  double s = 0.0;
  for (const auto& c : mix) s += c.weight * normal_ccdf((y - c.mean) / std::sqrt(c.var));
  return s;
}

double mixture_mean(std::span<const MixtureComponent> mix) {
  double s = 0.0;
  for (const auto& c : mix) s += c.weight * c.mean;
  return s;
}

double mixture_second_moment(std::span<const MixtureComponent> mix) {
  double s = 0.0;
  for (const auto& c : mix) s += c.weight * (c.var + c.mean * c.mean);
  return s;
}

double ip_log_weight(double center, double scale, int j) {
  return log_normal_interval((j - 1 - center) / scale, (j - center) / scale);
}

std::vector<double> ip_mixture_weights(double center, double scale, int j_lo, int j_hi) {
  if (!(scale > 0.0)) invalid("bad_scale", "weight scale must be positive");
  std::vector<double> out;
  for (int j = j_lo; j <= j_hi; ++j) out.push_back(std::exp(ip_log_weight(center, scale, j)));
  return out;
}

double ip_weight_scale(const ModelSpec& spec, const ModelState& s, const Eigen::RowVectorXd& x) {
  if (spec.ip.heteroscedastic) return std::sqrt(std::exp(x.dot(s.lambda_omega)));
  return s.sigma_omega;
}

std::size_t ddp_atom_dim(const ModelSpec& spec, std::size_t p1) {
  return spec.target == MixingTarget::intercept_only ? 1 : p1;
}

std::vector<double> ddp_weights(const ModelSpec& spec, const ModelState& s) {
  (void)spec;
  if (!s.atom_weights.empty()) return s.atom_weights;
  return weights_from_sticks(s.sticks).weights;
}

double ddp_kernel_mean(const ModelSpec& spec, const ModelState& s, const Eigen::RowVectorXd& x,
                       std::size_t atom) {
  const auto& b = s.atoms[atom].beta;
  if (spec.target == MixingTarget::intercept_only) {
    double m = b(0);
    for (Eigen::Index k = 1; k < x.size(); ++k) m += x(k) * s.beta(k);
    return m;
  }
  return x.dot(b);
}

double ddp_kernel_var(const ModelSpec& spec, const ModelState& s, std::size_t atom) {
  if (spec.probit()) return 1.0;
  return spec.mixes_variance() ? s.atoms[atom].sigma2 : s.sigma2;
}

std::vector<MixtureComponent> conditional_mixture(const ModelSpec& spec, const ModelState& s,
                                                  const Eigen::RowVectorXd& x, double obs_weight,
                                                  int group) {
  std::vector<MixtureComponent> mix;
  const double sigma2 = spec.probit() ? 1.0 : s.sigma2;
  switch (spec.family) {
    case Family::linear_nig:
      mix.push_back({1.0, x.dot(s.beta), sigma2 / obs_weight});
      break;
    case Family::hlm2:
      if (group >= 0 && group < s.u.rows()) {
        mix.push_back({1.0, x.dot(s.beta + s.u.row(group).transpose()), sigma2 / obs_weight});
      } else {
        mix.push_back({1.0, x.dot(s.beta), sigma2 / obs_weight + x * s.T * x.transpose()});
      }
      break;
    case Family::ddp_mixture: {
      const auto w = ddp_weights(spec, s);
      double used = 0.0;
      for (std::size_t j = 0; j < s.atoms.size() && j < w.size(); ++j) {
        if (!(w[j] > 0.0)) continue;
        mix.push_back({w[j], ddp_kernel_mean(spec, s, x, j), ddp_kernel_var(spec, s, j) / obs_weight});
        used += w[j];
      }
      const double rest = 1.0 - used;
      if (rest > 0.0) {
        double mean = 0.0;
        double coef_var = 0.0;
        if (spec.target == MixingTarget::intercept_only) {
          mean = s.mu(0);
          for (Eigen::Index k = 1; k < x.size(); ++k) mean += x(k) * s.beta(k);
          coef_var = s.T(0, 0);
        } else {
          mean = x.dot(s.mu);
          coef_var = x * s.T * x.transpose();
        }
        if (spec.mixes_variance()) {
          add_variance_mixed_tail(mix, rest, mean, coef_var, spec.ddp.a0 / 2.0, spec.ddp.a0 / 2.0,
                                  obs_weight);
        } else {
          mix.push_back({rest, mean, coef_var + sigma2 / obs_weight});
        }
      }
      break;
    }
    case Family::infinite_probits: {
      const double center = x.dot(s.beta_omega);
      const double scale = ip_weight_scale(spec, s, x);
      const bool hetero = spec.ip.heteroscedastic;
      const double shift = hetero ? 0.0 : x.dot(s.beta);
      double used = 0.0;
      for (const auto& [j, atom] : s.ip_atoms) {
        const double wj = std::exp(ip_log_weight(center, scale, j));
        if (!(wj > 0.0)) continue;
        mix.push_back({wj, atom.mu + shift, (hetero ? atom.sigma2 : sigma2) / obs_weight});
        used += wj;
      }
      const double rest = 1.0 - used;
      if (rest > 0.0) {
        const double mu_var = s.sigma_mu * s.sigma_mu;
        if (hetero) {
          add_variance_mixed_tail(mix, rest, 0.0, mu_var, spec.ip.a0 / 2.0, spec.ip.a0 / 2.0,
                                  obs_weight);
        } else {
          mix.push_back({rest, shift, mu_var + sigma2 / obs_weight});
        }
      }
      break;
    }
  }
  return mix;
}

double mixture_density(const ModelSpec& spec, const ModelState& s, double y,
                       const Eigen::RowVectorXd& x) {
  const auto mix = conditional_mixture(spec, s, x);
  return mixture_pdf(mix, y);
}

double log_likelihood(const ModelSpec& spec, const ModelState& s, const ModelData& data) {
  const Eigen::VectorXd& y = s.y_work.size() == data.y.size() ? s.y_work : data.y;
  const std::size_t n = data.n();
  const double sigma2 = spec.probit() ? 1.0 : s.sigma2;
  if (!(sigma2 > 0.0)) invalid("nonpositive_variance", "kernel variance must be positive");
  double ll = 0.0;
  auto row = [&](std::size_t i) { return data.X.row(static_cast<Eigen::Index>(i)); };
  auto yi = [&](std::size_t i) { return y(static_cast<Eigen::Index>(i)); };
  auto wi = [&](std::size_t i) { return data.w(static_cast<Eigen::Index>(i)); };
  switch (spec.family) {
    case Family::linear_nig:
      if (s.beta.size() != data.X.cols()) invalid("dimension_mismatch", "coefficient length");
      for (std::size_t i = 0; i < n; ++i) {
        ll += normal_logpdf(yi(i), row(i).dot(s.beta), sigma2 / wi(i));
      }
      break;
    case Family::hlm2:
      for (std::size_t i = 0; i < n; ++i) {
        const auto h = static_cast<Eigen::Index>(data.group[i]);
        ll += normal_logpdf(yi(i), row(i).dot(s.beta + s.u.row(h).transpose()), sigma2 / wi(i));
      }
      break;
    case Family::ddp_mixture: {
      const auto w = ddp_weights(spec, s);
      const bool grouped = !data.group.empty();
      const std::size_t units = grouped ? data.n_groups() : n;
      std::vector<std::vector<std::size_t>> members(units);
      for (std::size_t i = 0; i < n; ++i) members[grouped ? data.group[i] : i].push_back(i);
      for (std::size_t h = 0; h < units; ++h) {
        auto unit_ll = [&](std::size_t j) {
          double v = 0.0;
          for (std::size_t i : members[h]) {
            v += normal_logpdf(yi(i), ddp_kernel_mean(spec, s, row(i), j),
                               ddp_kernel_var(spec, s, j) / wi(i));
          }
          return v;
        };
        if (s.z.size() == units) {
          ll += unit_ll(static_cast<std::size_t>(s.z[h]));
        } else {
          std::vector<double> terms;
          for (std::size_t j = 0; j < s.atoms.size(); ++j) {
            if (w[j] > 0.0) terms.push_back(std::log(w[j]) + unit_ll(j));
          }
          ll += log_sum_exp(terms);
        }
      }
      break;
    }
    case Family::infinite_probits: {
      const bool hetero = spec.ip.heteroscedastic;
      for (std::size_t i = 0; i < n; ++i) {
        const double shift = hetero ? 0.0 : row(i).dot(s.beta);
        if (s.z.size() == n) {
          const auto& atom = s.ip_atoms.at(s.z[i]);
          ll += normal_logpdf(yi(i), atom.mu + shift, (hetero ? atom.sigma2 : sigma2) / wi(i));
        } else {
          const double center = row(i).dot(s.beta_omega);
          const double scale = ip_weight_scale(spec, s, row(i));
          std::vector<double> terms;
          for (const auto& [j, atom] : s.ip_atoms) {
            terms.push_back(ip_log_weight(center, scale, j) +
                            normal_logpdf(yi(i), atom.mu + shift,
                                          (hetero ? atom.sigma2 : sigma2) / wi(i)));
          }
          ll += log_sum_exp(terms);
        }
      }
      break;
    }
  }
  return ll;
}

double log_mvn_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return kNegInf;
  const Eigen::VectorXd z = llt.matrixL().solve(x - mean);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * static_cast<double>(x.size()) * 2.0 * kLogSqrt2Pi - 0.5 * log_det -
         0.5 * z.squaredNorm();
}

double log_inv_wishart_density(const Eigen::MatrixXd& T, double dof, const Eigen::MatrixXd& scale) {
  const auto d = static_cast<double>(T.rows());
  Eigen::LLT<Eigen::MatrixXd> lt(T);
  Eigen::LLT<Eigen::MatrixXd> ls(scale);
  if (lt.info() != Eigen::Success || ls.info() != Eigen::Success) return kNegInf;
  double log_det_t = 0.0;
  double log_det_s = 0.0;
  for (Eigen::Index i = 0; i < T.rows(); ++i) {
    log_det_t += 2.0 * std::log(lt.matrixL()(i, i));
    log_det_s += 2.0 * std::log(ls.matrixL()(i, i));
  }
  double log_mgamma = 0.25 * d * (d - 1.0) * std::log(M_PI);
  for (int k = 0; k < static_cast<int>(d); ++k) log_mgamma += std::lgamma(0.5 * (dof - k));
  const double trace = (scale * lt.solve(Eigen::MatrixXd::Identity(T.rows(), T.cols()))).trace();
  return 0.5 * dof * log_det_s - 0.5 * dof * d * std::log(2.0) - log_mgamma -
         0.5 * (dof + d + 1.0) * log_det_t - 0.5 * trace;
}

namespace {

double log_coef_prior(const Eigen::VectorXd& beta, double scale2, bool flat_intercept,
                      double v0, double v, const std::vector<int>* gamma, double spike_ratio,
                      double inclusion) {
  double lp = 0.0;
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    if (k == 0) {
      if (!flat_intercept) lp += normal_logpdf(beta(0), 0.0, scale2 * v0);
      continue;
    }
    double vk = v;
    if (gamma && !gamma->empty()) {
      const int g = (*gamma)[static_cast<std::size_t>(k)];
      if (!g) vk *= spike_ratio;
      lp += std::log(g ? inclusion : 1.0 - inclusion);
    }
    lp += normal_logpdf(beta(k), 0.0, scale2 * vk);
  }
  return lp;
}

}  // namespace

double log_prior(const ModelSpec& spec, const ModelState& s) {
  double lp = 0.0;
  const bool probit = spec.probit();
  switch (spec.family) {
    case Family::linear_nig:
    case Family::hlm2: {
      const LinearHyper& h = spec.family == Family::hlm2 ? spec.hlm : spec.linear;
      const double s2 = probit ? 1.0 : s.sigma2;
      if (!(s2 > 0.0)) return kNegInf;
      lp += log_coef_prior(s.beta, s2, h.flat_intercept, h.v_beta0, h.v_beta, nullptr, 1.0, 0.5);
      if (!probit) lp += log_inv_gamma_pdf(s.sigma2, h.a0 / 2.0, h.a0 / 2.0);
      if (spec.family == Family::hlm2) {
        const auto d = s.T.rows();
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
        for (Eigen::Index g = 0; g < s.u.rows(); ++g) {
          lp += log_mvn_density(s.u.row(g).transpose(), zero, s.T);
        }
        lp += log_inv_wishart_density(s.T, static_cast<double>(d) + 2.0,
                                      spec.hlm.s0 * Eigen::MatrixXd::Identity(d, d));
      }
      break;
    }
    case Family::ddp_mixture: {
      const auto& st = spec.stick;
      double log_rest = 0.0;
      for (std::size_t j = 0; j < s.sticks.size(); ++j) {
        const double v = s.sticks[j];
        if (st.family == StickFamily::geometric) {
          if (j == 0) lp += log_beta_pdf(v, st.a, st.b);
        } else if (st.family == StickFamily::nig) {
          lp += nig_stick_log_density(v, st.c, j + 1, log_rest);
        } else {
          const double b = st.family == StickFamily::dp ? s.alpha : st.stick_b(j + 1);
          lp += log_beta_pdf(v, st.stick_a(j + 1), b);
        }
        log_rest += std::log1p(-v);
      }
      const auto d = s.mu.size();
      for (const auto& atom : s.atoms) {
        lp += log_mvn_density(atom.beta, s.mu, s.T);
        if (spec.mixes_variance()) lp += log_inv_gamma_pdf(atom.sigma2, spec.ddp.a0 / 2.0, spec.ddp.a0 / 2.0);
      }
      if (spec.shares_variance()) lp += log_inv_gamma_pdf(s.sigma2, spec.ddp.a0 / 2.0, spec.ddp.a0 / 2.0);
      if (spec.target == MixingTarget::intercept_only && s.beta.size() > 1) {
        const double s2 = spec.shares_variance() ? s.sigma2 : 1.0;
        lp += log_coef_prior(s.beta, s2, true, 1.0, spec.ddp.v_beta, nullptr, 1.0, 0.5);
      }
      lp += log_mvn_density(s.mu, Eigen::VectorXd::Zero(d), spec.ddp.r0 * Eigen::MatrixXd::Identity(d, d));
      lp += log_inv_wishart_density(s.T, static_cast<double>(d) + 2.0,
                                    spec.ddp.s0 * Eigen::MatrixXd::Identity(d, d));
      if (st.family == StickFamily::dp) lp += log_gamma_pdf(s.alpha, spec.ddp.a_alpha, spec.ddp.b_alpha);
      break;
    }
    case Family::infinite_probits: {
      const auto& h = spec.ip;
      if (!(s.sigma_mu > 0.0 && s.sigma_mu < h.b_sigma_mu)) return kNegInf;
      lp += -std::log(h.b_sigma_mu);
      for (const auto& [j, atom] : s.ip_atoms) {
        lp += normal_logpdf(atom.mu, 0.0, s.sigma_mu * s.sigma_mu);
        if (h.heteroscedastic) lp += log_inv_gamma_pdf(atom.sigma2, h.a0 / 2.0, h.a0 / 2.0);
      }
      if (!h.heteroscedastic) {
        const double s2 = probit ? 1.0 : s.sigma2;
        if (!(s2 > 0.0)) return kNegInf;
        lp += log_coef_prior(s.beta, s2, true, 1.0, h.v, h.ssvs_kernel ? &s.gamma_kernel : nullptr,
                             h.spike_ratio, h.inclusion_prob);
        if (!probit) lp += log_inv_gamma_pdf(s.sigma2, h.a0 / 2.0, h.a0 / 2.0);
        if (!(s.sigma_omega > 0.0)) return kNegInf;
        const double so2 = s.sigma_omega * s.sigma_omega;
        lp += normal_logpdf(s.beta_omega(0), 0.0, so2 * h.v_omega);
        lp += log_coef_prior(s.beta_omega, so2, true, 1.0, h.v_omega,
                             h.ssvs_weights ? &s.gamma_weights : nullptr, h.spike_ratio,
                             h.inclusion_prob);
        lp += log_inv_gamma_pdf(so2, h.a_omega / 2.0, h.a_omega / 2.0);
      } else {
        lp += normal_logpdf(s.beta_omega(0), 0.0, h.v_omega);
        lp += log_coef_prior(s.beta_omega, 1.0, true, 1.0, h.v_omega,
                             h.ssvs_weights ? &s.gamma_weights : nullptr, h.spike_ratio,
                             h.inclusion_prob);
        lp += normal_logpdf(s.lambda_omega(0), 0.0, h.v_omega);
        lp += log_coef_prior(s.lambda_omega, 1.0, true, 1.0, h.v_omega,
                             h.ssvs_weights ? &s.gamma_lambda : nullptr, h.spike_ratio,
                             h.inclusion_prob);
      }
      break;
    }
  }
  return lp;
}

std::pair<double, double> probit_augment_bounds(double y) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (y == 1.0) return {0.0, inf};
  if (y == 0.0) return {-inf, 0.0};
  invalid("non_binary_response", "binary response must be 0 or 1");
}

}  // namespace bnpreg
