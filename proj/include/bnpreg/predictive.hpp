#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bnpreg/mcmc.hpp"
#include "bnpreg/models.hpp"
#include "bnpreg/sample_store.hpp"

namespace bnpreg {

enum class FunctionalKind { pdf, cdf, mean, variance, quantile, survival, hazard, cumhaz, prob_y_ge_0 };

struct Functional {
  FunctionalKind kind = FunctionalKind::mean;
  double u = 0.5;  // quantile level

  bool on_y_grid() const;
  std::string label() const;
};

// "mean,quantile(0.9),pdf"
std::vector<Functional> parse_functionals(const std::string& text);

inline constexpr std::size_t kMaxFocalPoints = 300;

// "a:step:b" (both ends inclusive up to rounding) or a comma list of values.
std::vector<double> parse_grid(const std::string& text);

enum class ProfileMethod { grand_mean, zero_center, partial_dependence, clustered_pd };
std::string to_string(ProfileMethod m);
ProfileMethod profile_method_from_string(const std::string& s);

// Values of the non-focal covariates to average over.
struct Profile {
  std::vector<std::string> names;          // non-focal covariates, data order
  std::vector<std::vector<double>> rows;   // one entry per profile row
  std::vector<double> weights;
};

Profile profile_covariates(const ModelData& data, const std::vector<std::string>& focal,
                           ProfileMethod method, Rng& rng);

// K-means by Lloyd iterations from `restarts` random starts; returns centroids.
std::vector<std::vector<double>> kmeans(const std::vector<std::vector<double>>& points,
                                        std::size_t k, Rng& rng, std::size_t restarts = 10);
std::size_t clustered_pd_k(std::size_t n);

// Parameter states of the retained draws used for prediction.
struct PosteriorDraws {
  ModelSpec spec;
  std::vector<ModelState> states;
};
PosteriorDraws load_draws(const ModelSpec& spec, std::size_t p1, std::size_t n_groups,
                          const SampleStore& store, std::uint64_t burn_in = 0,
                          std::uint64_t thin = 1);

// Predictive functionals at one full covariate row x (intercept first).
// Density-type functionals are evaluated at every y in y_grid, the others
// once (repeated across the grid in the output). Quantiles come from one
// composition draw per retained state.
struct PointPrediction {
  std::vector<double> pdf;
  std::vector<double> cdf;
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> sorted_draws;
};
PointPrediction predict_point(const PosteriorDraws& draws, const Eigen::RowVectorXd& x,
                              const std::vector<double>& y_grid, double obs_weight, Rng& rng,
                              bool want_draws);

struct PredictiveQuery {
  std::vector<std::pair<std::string, std::vector<double>>> focal;
  std::vector<Functional> functionals;
  ProfileMethod profile = ProfileMethod::grand_mean;
  std::vector<double> y_grid;  // empty: default grid
  double obs_weight = 1.0;
  std::uint64_t seed = 1;
  std::uint64_t burn_in = 0;
  std::uint64_t thin = 1;
};

struct PredictiveTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string to_csv() const;
};

std::vector<double> default_y_grid(const PosteriorDraws& draws, const ModelData& data,
                                   std::size_t points = 512);

PredictiveTable pd_functional(const PosteriorDraws& draws, const ModelData& data,
                              const PredictiveQuery& query);

// Values of every functional derived from averaged f and F at each y.
double survival_from_cdf(double F);
double hazard_from(double f, double F);
double cumhaz_from_cdf(double F);

struct FitReport {
  std::vector<double> y;
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<double> residual;
  double r_squared = 0.0;
  double goodness = 0.0;  // sum of squared errors
  double penalty = 0.0;   // sum of predictive variances
  double d_m = 0.0;
  std::size_t outliers2 = 0;
  std::size_t outliers3 = 0;
};

FitReport fit_report(const std::vector<double>& y, const std::vector<double>& mean,
                     const std::vector<double>& var);
FitReport fit_report(const ModelData& data, const FitAccumulator& acc);
// Per-observation file: row, y, E, V, r, |r|>2, |r|>3.
std::string fit_csv(const FitReport& f, const std::vector<std::size_t>& source_rows);
std::string fit_summary_csv(const FitReport& f);

}  // namespace bnpreg
