#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bnpreg/sample_store.hpp"

namespace bnpreg {

enum class Estimand { mean, sd, quantile };

// Half-width of the Monte Carlo confidence interval of a point estimate from
// floor(sqrt(S)) non-overlapping batches. Needs at least 16 draws.
double batch_means_mcci(std::span<const double> draws, Estimand estimand, double u = 0.5,
                        double confidence = 0.95);

// Share of interior points of the centered cumulative-sum path where the
// path changes direction. Zero steps count as no change.
double cusum_hairiness(std::span<const double> draws);

struct SummaryRow {
  std::string name;
  std::size_t draws = 0;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double q975 = 0.0;
  // MCCI half-widths of mean, median, sd, q025, q25, q75, q975; NaN when
  // fewer than 16 draws are kept.
  std::vector<double> half_width;
  double hairiness = 0.0;
};

// Rows of the store whose iteration exceeds burn_in, then every thin-th.
std::vector<std::size_t> kept_rows(const SampleStore& store, std::uint64_t burn_in,
                                   std::uint64_t thin);

std::vector<SummaryRow> summarize(const SampleStore& store, std::uint64_t burn_in,
                                  std::uint64_t thin);
SummaryRow summarize_draws(const std::string& name, std::span<const double> draws);

std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string summary_text(const std::vector<SummaryRow>& rows);
// MCCI half-widths and hairiness per parameter.
std::string diagnostics_csv(const std::vector<SummaryRow>& rows);

// At most `window` (iteration, value) pairs, evenly spaced over the stored
// draws and always keeping the first and last. A window below 2 acts as 2.
std::vector<std::pair<std::uint64_t, double>> trace(const SampleStore& store,
                                                    const std::string& name,
                                                    std::size_t window = 4096);

}  // namespace bnpreg
