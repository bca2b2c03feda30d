#include "lobmc/independence.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lobmc {

namespace {

void check_rectangular(const CountTable& observed) {
  if (observed.empty() || observed.front().empty())
    throw std::domain_error("contingency table is empty");
  const std::size_t cols = observed.front().size();
  for (const auto& row : observed)
    if (row.size() != cols) throw std::domain_error("contingency table is ragged");
}

std::uint64_t grand_total(const CountTable& observed) {
  std::uint64_t total = 0;
  for (const auto& row : observed)
    for (auto v : row) total += v;
  return total;
}

}  // namespace

CountTable to_table(const TransitionCounts& counts) {
  CountTable table(kNumStates, std::vector<std::uint64_t>(kNumStates, 0));
  for (int i = 0; i < kNumStates; ++i)
    for (int j = 0; j < kNumStates; ++j) table[i][j] = counts.n[i][j];
  return table;
}

std::vector<std::vector<double>> expected_counts(const CountTable& observed) {
  check_rectangular(observed);
  const std::size_t rows = observed.size();
  const std::size_t cols = observed.front().size();
  const std::uint64_t total = grand_total(observed);
  if (total == 0) throw std::domain_error("expected_counts: all-zero table");

  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      row_sum[i] += double(observed[i][j]);
      col_sum[j] += double(observed[i][j]);
    }

  std::vector<std::vector<double>> expected(rows, std::vector<double>(cols, 0.0));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      expected[i][j] = row_sum[i] * col_sum[j] / double(total);
  return expected;
}

double g_statistic(const CountTable& observed) {
  const auto expected = expected_counts(observed);
  double g = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i)
    for (std::size_t j = 0; j < observed[i].size(); ++j) {
      const auto o = observed[i][j];
      if (o == 0) continue;
      g += double(o) * std::log(double(o) / expected[i][j]);
    }
  g *= 2.0;
  return g < 0.0 ? 0.0 : g;  // clamp rounding noise at the O == E fixed point
}

double chi2_sf(double x, int df) {
  if (df < 1) throw std::domain_error("chi2_sf: df must be >= 1");
  if (!(x >= 0.0)) throw std::domain_error("chi2_sf: x must be >= 0");
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

GTestResult g_test(const CountTable& observed, double alpha) {
  check_rectangular(observed);
  if (grand_total(observed) == 0) throw std::domain_error("g_test: all-zero table");

  const std::size_t rows = observed.size();
  const std::size_t cols = observed.front().size();
  std::vector<bool> keep_row(rows, false), keep_col(cols, false);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      if (observed[i][j] > 0) {
        keep_row[i] = true;
        keep_col[j] = true;
      }

  CountTable reduced;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!keep_row[i]) continue;
    std::vector<std::uint64_t> row;
    for (std::size_t j = 0; j < cols; ++j)
      if (keep_col[j]) row.push_back(observed[i][j]);
    reduced.push_back(std::move(row));
  }

  GTestResult result;
  result.dropped_rows = int(rows - reduced.size());
  result.dropped_cols = int(cols - reduced.front().size());

  const std::size_t r = reduced.size();
  const std::size_t c = reduced.front().size();
  if (r < 2 || c < 2) {
    result.conclusive = false;
    result.g = 0.0;
    result.df = 0;
    result.p_value = 1.0;
    result.reject = false;
    return result;
  }

  result.g = g_statistic(reduced);
  result.df = int((r - 1) * (c - 1));
  result.p_value = chi2_sf(result.g, result.df);
  result.reject = result.p_value < alpha;
  return result;
}

GTestResult g_test(const TransitionCounts& counts, double alpha) {
  return g_test(to_table(counts), alpha);
}

AcfResult acf(std::span<const double> series, int max_lag) {
  if (max_lag < 1) throw std::invalid_argument("acf: max_lag must be >= 1");
  const std::size_t n = series.size();
  if (n <= std::size_t(max_lag) + 1)
    throw std::invalid_argument("acf: series too short for requested max_lag");

  AcfResult result;
  result.n = n;
  result.threshold = 1.0 / std::sqrt(double(n));
  result.threshold_conventional = 1.96 / std::sqrt(double(n));

  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / double(n);
  double denom = 0.0;
  for (double x : series) denom += (x - mean) * (x - mean);

  result.lags.resize(max_lag);
  result.values.assign(max_lag, 0.0);
  for (int lag = 1; lag <= max_lag; ++lag) result.lags[lag - 1] = lag;

  if (denom <= 0.0) {
    result.valid = false;
    return result;
  }
  for (int lag = 1; lag <= max_lag; ++lag) {
    double num = 0.0;
    for (std::size_t k = 0; k + lag < n; ++k)
      num += (series[k] - mean) * (series[k + lag] - mean);
    result.values[lag - 1] = num / denom;
  }
  return result;
}

}  // namespace lobmc
