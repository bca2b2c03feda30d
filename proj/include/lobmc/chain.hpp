#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lobmc/types.hpp"

namespace lobmc {

// Half-width of the neutral band, in percent. Prices are decimal ticks, so a
// true zero change is exact; the tolerance only absorbs decimal-to-binary
// conversion noise.
inline constexpr double kZeroTolerancePct = 1e-9;

// 100 * (curr - prev) / prev. Throws std::domain_error when prev <= 0.
double pct_change(double prev_price, double curr_price);

// Exhaustive partition of finite percent changes into the nine states:
//   S1 (-inf,-5)  S2 [-5,-2)  S3 [-2,-1)  S4 [-1,0)  S5 {0}
//   S6 (0,1]      S7 (1,2]    S8 (2,5]    S9 (5,inf)
// with S5 taken as |x| <= kZeroTolerancePct. Throws std::domain_error on
// non-finite input.
StateId classify(double change_pct);

// States for one ordered price run: states[k] = classify(pct_change(p[k], p[k+1])).
// Runs with fewer than two prices yield an empty sequence.
std::vector<StateId> build_sequence(std::span<const double> prices);

// Percent changes for one ordered price run (same indexing as build_sequence).
std::vector<double> change_series(std::span<const double> prices);

struct TransitionCounts {
  Counts9 n{};
  std::uint64_t total = 0;

  void add(StateId from, StateId to, std::uint64_t k = 1);
  void merge(const TransitionCounts& other);
  std::uint64_t row_total(int i) const;
  std::uint64_t col_total(int j) const;
  bool operator==(const TransitionCounts&) const = default;
};

TransitionCounts count_transitions(std::span<const StateId> states);

// Occurrence count per state; feeds the sparsity report.
std::array<std::uint64_t, kNumStates> state_histogram(std::span<const StateId> states);

// Compact audit form: one letter per change, e.g. "EEDF".
std::string sequence_letters(std::span<const StateId> states);
std::vector<StateId> sequence_from_letters(std::string_view letters);

}  // namespace lobmc
