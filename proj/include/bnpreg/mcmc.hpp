#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bnpreg/models.hpp"
#include "bnpreg/random.hpp"
#include "bnpreg/sample_store.hpp"

namespace bnpreg {

struct SamplerConfig {
  std::uint64_t iterations = 1000;
  std::uint64_t burn_in = 0;
  std::uint64_t thin = 1;
  std::uint64_t seed = 1;
  double target_accept = 0.44;
  double adapt_exponent = 0.6;
  std::size_t max_atoms = 100000;

  void validate() const;
};

struct AdaptiveScale {
  double scale = 1.0;
  std::uint64_t steps = 0;
  std::uint64_t accepted = 0;
};

// Running sums of the per-observation conditional mean and second moment of
// y, over every iteration of the chain.
struct FitAccumulator {
  std::vector<double> sum_mean;
  std::vector<double> sum_second;
  std::vector<double> sum_y;  // imputed responses, for censored rows
  std::uint64_t count = 0;
};

struct ChainState {
  ModelState params;
  std::uint64_t iteration = 0;
  std::map<std::string, AdaptiveScale> scales;
  Rng rng;
  FitAccumulator fit;
};

// ---- building blocks ----

// One Metropolis step with a normal proposal; the scale adapts by
// exp(t^-exponent (accepted - target)).
double arwmh_step(const std::function<double(double)>& log_target, double current,
                  AdaptiveScale& scale, Rng& rng, double target_accept = 0.44,
                  double adapt_exponent = 0.6, bool* accepted = nullptr);

// Neal's stepping-out and shrinkage slice sampler on (lo, hi).
double stepping_out_slice(const std::function<double(double)>& log_target, double current,
                          double width, double lo, double hi, Rng& rng,
                          std::size_t max_steps = 100);

// Auxiliary-variable draw of the DP precision given k clusters among n units
// and a Gamma(a, b) prior (rate b).
double escobar_west_alpha(double alpha, std::size_t k, std::size_t n, double a, double b,
                          Rng& rng);

// Normal regression coefficients given the variance: prior N(0, scale2 * v_k)
// per coefficient, with v_k = +inf meaning flat.
Eigen::VectorXd draw_regression_coefficients(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& w, double sigma2,
                                             double prior_scale2,
                                             const Eigen::VectorXd& prior_var, Rng& rng);

// beta | sigma2 then sigma2 | beta for the normal inverse-gamma linear model.
// With `fix_sigma2` only beta is drawn (probit link).
void gibbs_linear_block(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& w, const LinearHyper& h, bool fix_sigma2,
                        Eigen::VectorXd& beta, double& sigma2, Rng& rng);

// Draw from N(mean, sd^2) restricted to the censoring interval.
double impute_censored_value(double mean, double sd, const CensorStatus& c, Rng& rng);

// Pr(gamma = 1 | coef) under a spike-and-slab prior.
double ssvs_inclusion_probability(double coef, double slab_var, double spike_var,
                                  double prior_inclusion);

// ---- chains ----

ChainState init_chain(const ModelSpec& spec, const ModelData& data, std::uint64_t seed);

// One full cycle of the family's sampler.
void chain_step(const ModelSpec& spec, const ModelData& data, const SamplerConfig& config,
                ChainState& chain);

// Conditional mean and variance of y_i under the current allocation, used by
// imputation and fit statistics.
std::pair<double, double> kernel_moments(const ModelSpec& spec, const ModelData& data,
                                         const ModelState& s, std::size_t i);

std::vector<std::string> parameter_names(const ModelSpec& spec, const ModelData& data);
std::vector<std::string> atom_coef_names(const ModelSpec& spec, const ModelData& data);
std::vector<double> parameter_row(const ModelSpec& spec, const ModelData& data,
                                  const ModelState& s);
std::vector<AtomDraw> atom_draws(const ModelSpec& spec, const ModelData& data,
                                 const ModelState& s);
// Rebuilds the parts of a state that predictive functionals need.
ModelState state_from_draw(const ModelSpec& spec, std::size_t p1, std::size_t n_groups,
                           const SampleStore& store, std::size_t r);

SampleStore empty_store(const ModelSpec& spec, const ModelData& data);

struct RunHooks {
  // Called after every iteration.
  std::function<void(const ChainState&)> on_iteration;
  // Called every max(1%, 100) iterations and at the end.
  std::function<void(std::uint64_t done, std::uint64_t total)> on_progress;
  const std::atomic<bool>* cancel = nullptr;
};

struct RunResult {
  std::uint64_t completed = 0;
  bool cancelled = false;
};

// Runs config.iterations more iterations, appending every draw whose global
// iteration number is a multiple of config.thin.
RunResult run_chain(const ModelSpec& spec, const ModelData& data, const SamplerConfig& config,
                    ChainState& chain, SampleStore& store, const RunHooks& hooks = {});

std::uint64_t progress_interval(std::uint64_t total);

struct FitMoments {
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<double> y;
};
FitMoments fit_moments(const ModelData& data, const FitAccumulator& acc);

std::string serialize_chain(const ChainState& chain);
ChainState deserialize_chain(const std::string& text);

}  // namespace bnpreg
