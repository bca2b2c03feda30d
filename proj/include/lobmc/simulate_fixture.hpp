#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lobmc/config.hpp"
#include "lobmc/dtmc.hpp"
#include "lobmc/tickstore.hpp"

namespace lobmc {

// Synthetic-feed generator: per (tier, interval, side) a transition matrix is
// planted around a target neutral self-transition probability p55; state
// chains are sampled from it and turned into a price path (each state drawn
// uniformly inside its percent band), emitted as raw 8-column tick files.
struct PlantConfig {
  std::uint64_t seed = 1;
  std::vector<Date> days;
  std::map<std::string, Tier> tier_map;
  std::vector<IntervalSpec> intervals = default_intervals();
  int events_per_interval = 120;
  double noise_fraction = 0.03;  // share of non-ADD / off-universe rows
  double extreme_scale = 1.0;    // 0 confines support to S3..S7
  double start_price_min = 150.0;
  double start_price_max = 450.0;
  std::string exchange = "NASDAQ";
  // p55 per tier and side, one value per interval
  std::map<Tier, std::map<Side, std::vector<double>>> p55;

  static PlantConfig from_json(const nlohmann::json& j);
  static PlantConfig from_json_file(const std::string& path);
  nlohmann::json to_json() const;
};

// Center-heavy 9-state matrix with the given neutral self-transition
// probability; extreme_scale scales the mass on S1/S2/S8/S9 (0 removes it).
Tpm plant_tpm(double p55, double extreme_scale = 1.0);

// Percent band sampled for each state when synthesizing prices; kept clear of
// the classification boundaries so cent rounding cannot flip a state.
std::pair<double, double> state_percent_band(StateId s);

struct FixtureResult {
  std::vector<std::string> tick_files;
  std::string truth_path;   // planted p55 profiles + matrices
  std::string config_path;  // ready-to-run RunConfig for this fixture
  std::uint64_t total_rows = 0;
  std::uint64_t total_bytes = 0;
};

FixtureResult generate_fixture(const PlantConfig& plant, const std::string& out_dir);

// Built-in plants: the full-scale study-shaped fixture (15 tickers, 12 days,
// U-shaped p55 with an HMC > MMC > LMC gradient) and a small smoke fixture
// (3 tickers, 2 days, support confined to S3..S7).
PlantConfig builtin_full_plant();
PlantConfig builtin_small_plant();

}  // namespace lobmc
