#include "lobmc/chain.hpp"

#include <cmath>

namespace lobmc {

double pct_change(double prev_price, double curr_price) {
  if (!(prev_price > 0.0)) throw std::domain_error("pct_change: previous price must be > 0");
  return 100.0 * (curr_price - prev_price) / prev_price;
}

StateId classify(double x) {
  if (!std::isfinite(x)) throw std::domain_error("classify: change must be finite");
  if (std::fabs(x) <= kZeroTolerancePct) return StateId::S5;
  if (x < 0.0) {
    if (x < -5.0) return StateId::S1;
    if (x < -2.0) return StateId::S2;
    if (x < -1.0) return StateId::S3;
    return StateId::S4;
  }
  if (x <= 1.0) return StateId::S6;
  if (x <= 2.0) return StateId::S7;
  if (x <= 5.0) return StateId::S8;
  return StateId::S9;
}

std::vector<StateId> build_sequence(std::span<const double> prices) {
  std::vector<StateId> states;
  if (prices.size() < 2) return states;
  states.reserve(prices.size() - 1);
  for (std::size_t k = 0; k + 1 < prices.size(); ++k)
    states.push_back(classify(pct_change(prices[k], prices[k + 1])));
  return states;
}

std::vector<double> change_series(std::span<const double> prices) {
  std::vector<double> changes;
  if (prices.size() < 2) return changes;
  changes.reserve(prices.size() - 1);
  for (std::size_t k = 0; k + 1 < prices.size(); ++k)
    changes.push_back(pct_change(prices[k], prices[k + 1]));
  return changes;
}

void TransitionCounts::add(StateId from, StateId to, std::uint64_t k) {
  n[index_of(from)][index_of(to)] += k;
  total += k;
}

void TransitionCounts::merge(const TransitionCounts& other) {
  for (int i = 0; i < kNumStates; ++i)
    for (int j = 0; j < kNumStates; ++j) n[i][j] += other.n[i][j];
  total += other.total;
}

std::uint64_t TransitionCounts::row_total(int i) const {
  std::uint64_t t = 0;
  for (int j = 0; j < kNumStates; ++j) t += n[i][j];
  return t;
}

std::uint64_t TransitionCounts::col_total(int j) const {
  std::uint64_t t = 0;
  for (int i = 0; i < kNumStates; ++i) t += n[i][j];
  return t;
}

TransitionCounts count_transitions(std::span<const StateId> states) {
  TransitionCounts counts;
  for (std::size_t k = 0; k + 1 < states.size(); ++k) counts.add(states[k], states[k + 1]);
  return counts;
}

std::array<std::uint64_t, kNumStates> state_histogram(std::span<const StateId> states) {
  std::array<std::uint64_t, kNumStates> hist{};
  for (StateId s : states) ++hist[index_of(s)];
  return hist;
}

std::string sequence_letters(std::span<const StateId> states) {
  std::string out;
  out.reserve(states.size());
  for (StateId s : states) out.push_back(state_letter(s));
  return out;
}

std::vector<StateId> sequence_from_letters(std::string_view letters) {
  std::vector<StateId> states;
  states.reserve(letters.size());
  for (char c : letters) states.push_back(state_from_letter(c));
  return states;
}

}  // namespace lobmc
