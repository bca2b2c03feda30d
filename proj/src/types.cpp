#include "lobmc/types.hpp"

#include <charconv>
#include <cstdio>

namespace lobmc {

char state_letter(StateId s) { return static_cast<char>('A' + index_of(s)); }

const char* state_name(StateId s) {
  static constexpr const char* names[kNumStates] = {"S1", "S2", "S3", "S4", "S5",
                                                    "S6", "S7", "S8", "S9"};
  return names[index_of(s)];
}

StateId state_from_letter(char c) {
  if (c < 'A' || c > 'I') throw std::out_of_range("state letter out of range");
  return static_cast<StateId>(c - 'A');
}

StateId mirror_state(StateId s) { return static_cast<StateId>(kNumStates - 1 - index_of(s)); }

const char* side_name(Side s) { return s == Side::Ask ? "ask" : "bid"; }

Side side_from_name(std::string_view name) {
  if (name == "ask" || name == "Ask" || name == "ASK") return Side::Ask;
  if (name == "bid" || name == "Bid" || name == "BID") return Side::Bid;
  throw DataError("unknown side: " + std::string(name));
}

const char* tier_name(Tier t) {
  switch (t) {
    case Tier::HMC: return "HMC";
    case Tier::MMC: return "MMC";
    default: return "LMC";
  }
}

Tier tier_from_name(std::string_view name) {
  if (name == "HMC") return Tier::HMC;
  if (name == "MMC") return Tier::MMC;
  if (name == "LMC") return Tier::LMC;
  throw DataError("unknown tier: " + std::string(name));
}

std::string Date::to_string() const {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", int(year), int(month), int(day));
  return buf;
}

Date Date::parse(std::string_view text) {
  // YYYY-MM-DD
  auto bad = [&] { return DataError("bad date: " + std::string(text)); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  int y = 0, m = 0, d = 0;
  auto r1 = std::from_chars(text.data(), text.data() + 4, y);
  auto r2 = std::from_chars(text.data() + 5, text.data() + 7, m);
  auto r3 = std::from_chars(text.data() + 8, text.data() + 10, d);
  if (r1.ec != std::errc{} || r2.ec != std::errc{} || r3.ec != std::errc{}) throw bad();
  if (m < 1 || m > 12 || d < 1 || d > 31) throw bad();
  return Date{static_cast<std::int16_t>(y), static_cast<std::int8_t>(m),
              static_cast<std::int8_t>(d)};
}

}  // namespace lobmc
