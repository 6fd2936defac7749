#pragma once

#include <span>
#include <string>
#include <vector>

#include "bnpreg/random.hpp"

namespace bnpreg {

enum class StickFamily { dp, pitman_yor, normalized_stable, beta2, geometric, nig };

std::string to_string(StickFamily f);
StickFamily stick_family_from_string(const std::string& s);

struct StickPriorSpec {
  StickFamily family = StickFamily::dp;
  double alpha = 1.0;  // DP precision
  double a = 0.0;      // PY discount / stable index / beta & geometric first shape
  double b = 1.0;      // PY strength / beta & geometric second shape
  double c = 1.0;      // NIG

  static StickPriorSpec dp(double alpha);
  static StickPriorSpec pitman_yor(double a, double b);
  static StickPriorSpec normalized_stable(double a);
  static StickPriorSpec beta2(double a, double b);
  static StickPriorSpec geometric(double a, double b);
  static StickPriorSpec nig(double c);

  void validate() const;
  // Beta parameters of stick j (1-based) for the independent-beta families.
  double stick_a(std::size_t j) const;
  double stick_b(std::size_t j) const;
  bool beta_sticks() const;
};

struct WeightSequence {
  std::vector<double> weights;
  std::vector<double> sticks;
  double truncation_mass = 1.0;  // prod (1 - v_l)
};

WeightSequence weights_from_sticks(std::span<const double> sticks);

// Exactly J sticks from the prior.
WeightSequence draw_sticks(const StickPriorSpec& spec, std::size_t J, Rng& rng);
// Sticks until the leftover mass drops below `tol` or `max_sticks` is reached.
WeightSequence draw_sticks_until(const StickPriorSpec& spec, Rng& rng, double tol = 1e-10,
                                 std::size_t max_sticks = 10000);

// NIG stick j (1-based) given log prod_{l<j}(1 - v_l).
double draw_nig_stick(double c, std::size_t j, double log_remaining, Rng& rng);
// Log density of that conditional stick law at v.
double nig_stick_log_density(double v, double c, std::size_t j, double log_remaining);

struct PartitionState {
  std::vector<int> allocations;  // cluster index per item, 0-based
  std::vector<int> sizes;        // n_c, all positive

  std::size_t n() const { return allocations.size(); }
  std::size_t k() const { return sizes.size(); }
  static PartitionState from_sizes(const std::vector<int>& sizes);
};

// (new-cluster prob, prob for each existing cluster).
std::vector<double> py_allocation_probs(double a, double b, const PartitionState& partition);

struct NigWeights {
  double w0;
  double w1;
};
inline constexpr int kNigMaxN = 500;
NigWeights nig_allocation_weights(double c, int n, int k);
// New-cluster prob followed by w1 (n_c - 1/2) per cluster.
std::vector<double> nig_allocation_probs(double c, const PartitionState& partition);

PartitionState simulate_partition_py(double a, double b, std::size_t n, Rng& rng);
PartitionState simulate_partition_nig(double c, std::size_t n, Rng& rng);

struct MomentCheck {
  double mean;
  double variance;
  double mean_se;
  double variance_se;
};
// Monte Carlo E[G(B)], V[G(B)] under a DP with G0(B) = p.
MomentCheck dp_moment_check(double alpha, double p, std::size_t draws, Rng& rng);

}  // namespace bnpreg
