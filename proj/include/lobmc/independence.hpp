#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lobmc/chain.hpp"
#include "lobmc/types.hpp"

namespace lobmc {

using CountTable = std::vector<std::vector<std::uint64_t>>;

CountTable to_table(const TransitionCounts& counts);

// E_ij = row_i * col_j / grand_total. Throws std::domain_error on an all-zero
// table. Margins are preserved: sum(E) == sum(O) up to rounding.
std::vector<std::vector<double>> expected_counts(const CountTable& observed);

// Likelihood-ratio statistic 2 * sum O_ij ln(O_ij / E_ij); O_ij = 0 terms
// contribute zero.
double g_statistic(const CountTable& observed);

// Upper-tail probability of the chi-square distribution with df degrees of
// freedom, i.e. Q(df/2, x/2). Throws std::domain_error for df < 1 or x < 0.
double chi2_sf(double x, int df);

struct GTestResult {
  double g = 0.0;
  int df = 0;
  double p_value = 1.0;
  int dropped_rows = 0;
  int dropped_cols = 0;
  bool reject = false;     // p < alpha
  bool conclusive = true;  // false when the reduced table is smaller than 2x2
};

// Drops all-zero rows/columns, computes df on the reduced table. A reduced
// table smaller than 2x2 yields an inconclusive (never rejecting) result.
GTestResult g_test(const CountTable& observed, double alpha = 0.05);
GTestResult g_test(const TransitionCounts& counts, double alpha = 0.05);

struct AcfResult {
  std::vector<int> lags;
  std::vector<double> values;
  double threshold = 0.0;               // 1/sqrt(N)
  double threshold_conventional = 0.0;  // 1.96/sqrt(N)
  std::size_t n = 0;
  bool valid = true;  // false for constant series (undefined correlation)
};

// Sample autocorrelation at lags 1..max_lag, mean-centered and normalized by
// the lag-0 sum of squares. Requires series.size() > max_lag + 1.
AcfResult acf(std::span<const double> series, int max_lag);

}  // namespace lobmc
