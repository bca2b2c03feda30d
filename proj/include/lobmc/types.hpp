#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lobmc {

inline constexpr int kNumStates = 9;

using Vector9 = std::array<double, kNumStates>;
using Matrix9 = std::array<Vector9, kNumStates>;
using Counts9 = std::array<std::array<std::uint64_t, kNumStates>, kNumStates>;

// Nine discrete price-change states, S1 (very aggressive sell) through
// S9 (very aggressive buy), stored as indices 0..8.
enum class StateId : std::uint8_t { S1, S2, S3, S4, S5, S6, S7, S8, S9 };

constexpr int index_of(StateId s) { return static_cast<int>(s); }

constexpr StateId state_at(int i) {
  if (i < 0 || i >= kNumStates) throw std::out_of_range("state index out of range");
  return static_cast<StateId>(i);
}

char state_letter(StateId s);       // 'A'..'I'
const char* state_name(StateId s);  // "S1".."S9"
StateId state_from_letter(char c);  // inverse of state_letter
StateId mirror_state(StateId s);    // S1<->S9, S2<->S8, ..., S5<->S5

enum class Side : std::uint8_t { Ask, Bid };
const char* side_name(Side s);  // "ask" / "bid"
Side side_from_name(std::string_view name);

enum class Tier : std::uint8_t { HMC, MMC, LMC };
const char* tier_name(Tier t);  // "HMC" / "MMC" / "LMC"
Tier tier_from_name(std::string_view name);

struct Date {
  std::int16_t year = 0;
  std::int8_t month = 0;
  std::int8_t day = 0;

  auto operator<=>(const Date&) const = default;
  std::string to_string() const;             // YYYY-MM-DD
  static Date parse(std::string_view text);  // throws DataError
};

// Failure taxonomy used by the CLI exit codes: DataError -> 2, NumericError -> 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lobmc
