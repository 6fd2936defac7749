#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bnpreg {

// One mixture atom (or random-effect row) attached to a retained draw.
struct AtomDraw {
  int label = 0;
  double weight = 0.0;
  double sigma2 = 0.0;
  std::vector<double> coef;
};

// Retained MCMC draws. Scalar parameters live in the MC1 table, one row per
// retained iteration; the variable-length atom sets live in a long-format
// MIX table keyed by the same iteration number.
class SampleStore {
 public:
  SampleStore() = default;
  SampleStore(std::vector<std::string> names, std::vector<std::string> atom_coef_names);

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::string>& atom_coef_names() const { return atom_coef_names_; }
  std::size_t n_draws() const { return iterations_.size(); }
  bool empty() const { return iterations_.empty(); }

  void append(std::uint64_t iteration, std::vector<double> row, std::vector<AtomDraw> atoms);

  std::uint64_t iteration(std::size_t r) const { return iterations_[r]; }
  std::span<const double> row(std::size_t r) const;
  std::span<const AtomDraw> atoms(std::size_t r) const;
  std::optional<std::size_t> index_of(const std::string& name) const;
  // Throws not_found for an unknown name.
  std::vector<double> column(const std::string& name) const;
  double value(std::size_t r, const std::string& name) const;

  std::string mc1_header() const;
  std::string mc1_row(std::size_t r) const;
  std::string mix_header() const;
  std::string mix_rows(std::size_t r) const;
  std::string to_mc1() const;
  std::string to_mix() const;

  // Inverse of to_mc1/to_mix.
  static SampleStore parse(const std::string& mc1, const std::string& mix);

 private:
  std::vector<std::string> names_;
  std::vector<std::string> atom_coef_names_;
  std::vector<std::uint64_t> iterations_;
  std::vector<double> values_;  // row-major
  std::vector<AtomDraw> atoms_;
  std::vector<std::size_t> atom_offsets_{0};
};

}  // namespace bnpreg
