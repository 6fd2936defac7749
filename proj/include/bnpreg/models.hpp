#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bnpreg/dataframe.hpp"
#include "bnpreg/priors.hpp"

namespace bnpreg {

enum class Family { linear_nig, hlm2, ddp_mixture, infinite_probits };
enum class Link { identity, binary_probit };
enum class MixingTarget { intercept_only, coefficients, coefficients_and_variance };

std::string to_string(Family f);
std::string to_string(Link l);
std::string to_string(MixingTarget t);
Family family_from_string(const std::string& s);
Link link_from_string(const std::string& s);
MixingTarget mixing_target_from_string(const std::string& s);

// beta_0 ~ N(0, sigma^2 v_beta0) unless flat, beta_k ~ N(0, sigma^2 v_beta),
// sigma^2 ~ IG(a0/2, a0/2) with IG in shape/rate form.
struct LinearHyper {
  bool flat_intercept = true;
  double v_beta0 = 1000.0;
  double v_beta = 1000.0;
  double a0 = 0.002;
};

struct HlmHyper : LinearHyper {
  double s0 = 1.0;  // T ~ IW(p+3, s0 I)
};

struct DdpHyper {
  double a0 = 2.0;
  double r0 = 10.0;
  double s0 = 10.0;
  double a_alpha = 1.0;
  double b_alpha = 1.0;
  double v_beta = 1000.0;    // slopes when only the intercept is mixed
  bool atom_gibbs = false;   // conjugate atom draws instead of random-walk
};

struct IpHyper {
  double b_sigma_mu = 5.0;
  double v = 100.0;
  double a0 = 0.01;
  double v_omega = 10.0;
  double a_omega = 0.01;
  bool heteroscedastic = false;
  bool ssvs_kernel = false;
  bool ssvs_weights = false;
  double spike_ratio = 1e-4;     // spike variance / slab variance
  double inclusion_prob = 0.5;
};

struct ModelSpec {
  Family family = Family::linear_nig;
  Link link = Link::identity;
  MixingTarget target = MixingTarget::coefficients;
  StickPriorSpec stick = StickPriorSpec::dp(1.0);
  LinearHyper linear;
  HlmHyper hlm;
  DdpHyper ddp;
  IpHyper ip;

  void validate() const;
  bool probit() const { return link == Link::binary_probit; }
  bool mixes_variance() const {
    return family == Family::ddp_mixture && target == MixingTarget::coefficients_and_variance;
  }
  bool shares_variance() const;
};

// Regression data after role assignment and listwise deletion.
struct ModelData {
  Eigen::MatrixXd X;  // n x (p+1), first column all ones
  Eigen::VectorXd y;  // NaN allowed only on censored rows
  Eigen::VectorXd w;
  std::vector<CensorStatus> censor;  // empty when no censoring roles
  std::vector<int> group;            // empty when no group role
  std::vector<double> group_values;
  std::vector<std::string> coef_names;  // "(Intercept)" then covariates
  std::vector<std::size_t> rows;        // source row of each kept observation
  bool weighted = false;

  std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t p1() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t n_groups() const { return group_values.size(); }
  bool censored(std::size_t i) const {
    return !censor.empty() && censor[i].kind != CensorKind::uncensored;
  }
  bool has_censoring() const;
};

ModelData build_model_data(const DataTable& table, const RoleAssignment& roles,
                           const ModelSpec& spec);

struct DdpAtom {
  Eigen::VectorXd beta;  // length 1 when only the intercept is mixed
  double sigma2 = 1.0;   // used when the variance is mixed
};

struct IpAtom {
  double mu = 0.0;
  double sigma2 = 1.0;  // heteroscedastic variant only
};

// Parameters and latent augmentation of every family; each family uses its
// own subset.
struct ModelState {
  Eigen::VectorXd beta;  // kernel / fixed coefficients (DDP: slopes only when intercept-mixed)
  double sigma2 = 1.0;

  Eigen::MatrixXd u;  // HLM random coefficients, one row per group
  Eigen::MatrixXd T;  // HLM covariance, DDP baseline covariance

  std::vector<double> sticks;
  std::vector<DdpAtom> atoms;
  // Set on states rebuilt from stored draws, which keep only occupied atoms
  // and their weights; otherwise weights come from the sticks.
  std::vector<double> atom_weights;
  Eigen::VectorXd mu;  // DDP baseline mean
  double alpha = 1.0;

  std::map<int, IpAtom> ip_atoms;
  double sigma_mu = 1.0;
  Eigen::VectorXd beta_omega;
  double sigma_omega = 1.0;
  Eigen::VectorXd lambda_omega;
  std::vector<int> gamma_kernel;   // SSVS indicators, entry 0 unused
  std::vector<int> gamma_weights;
  std::vector<int> gamma_lambda;

  std::vector<int> z;            // allocation per unit (group or row)
  std::vector<double> slice;     // slice variables per unit
  Eigen::VectorXd y_work;        // y with censored/probit entries imputed
};

struct MixtureComponent {
  double weight;
  double mean;
  double var;
};

double mixture_pdf(std::span<const MixtureComponent> mix, double y);
double mixture_cdf(std::span<const MixtureComponent> mix, double y);
double mixture_ccdf(std::span<const MixtureComponent> mix, double y);
double mixture_mean(std::span<const MixtureComponent> mix);
double mixture_second_moment(std::span<const MixtureComponent> mix);

// omega_j(x) for j in [j_lo, j_hi], center = x'beta_omega, scale = s(x).
std::vector<double> ip_mixture_weights(double center, double scale, int j_lo, int j_hi);
double ip_log_weight(double center, double scale, int j);
double ip_weight_scale(const ModelSpec& spec, const ModelState& s, const Eigen::RowVectorXd& x);

// DDP stick weights omega_j from the current sticks.
std::vector<double> ddp_weights(const ModelSpec& spec, const ModelState& s);
double ddp_kernel_mean(const ModelSpec& spec, const ModelState& s, const Eigen::RowVectorXd& x,
                       std::size_t atom);
double ddp_kernel_var(const ModelSpec& spec, const ModelState& s, std::size_t atom);

// Conditional predictive law of y at covariates x (intercept included) for
// one parameter state, integrating out unoccupied atoms analytically.
// `obs_weight` scales the kernel variance as sigma^2 / w. When `group` is a
// valid HLM group index, the group's random effect is used.
std::vector<MixtureComponent> conditional_mixture(const ModelSpec& spec, const ModelState& s,
                                                  const Eigen::RowVectorXd& x,
                                                  double obs_weight = 1.0, int group = -1);

// Density of y under the active (occupied) components plus tail mass.
double mixture_density(const ModelSpec& spec, const ModelState& s, double y,
                       const Eigen::RowVectorXd& x);

// Sum over rows of log n(y_i | mean_i, var_i / w_i) under the current
// allocation (mixtures) or random effects (HLM).
double log_likelihood(const ModelSpec& spec, const ModelState& s, const ModelData& data);
// Log prior density of the parameter state; -inf outside the support.
double log_prior(const ModelSpec& spec, const ModelState& s);

// Truncation interval of the latent score for a binary response.
std::pair<double, double> probit_augment_bounds(double y);

double log_mvn_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov);
double log_inv_wishart_density(const Eigen::MatrixXd& T, double dof, const Eigen::MatrixXd& scale);

// Dimension of DDP atoms and the baseline (1 or p+1).
std::size_t ddp_atom_dim(const ModelSpec& spec, std::size_t p1);

}  // namespace bnpreg
