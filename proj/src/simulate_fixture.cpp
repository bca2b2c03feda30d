#include "lobmc/simulate_fixture.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "lobmc/export.hpp"

namespace lobmc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Row templates (percent-band targets S1..S9); rows 6..9 mirror rows 4..1.
// Sell-side rows lean toward further selling (momentum) with a pull back to
// neutral, which keeps consecutive states strongly dependent.
constexpr std::array<std::array<double, 9>, 4> kOuterRows = {{
    {0.060, 0.100, 0.140, 0.260, 0.280, 0.100, 0.040, 0.015, 0.005},  // from S1
    {0.030, 0.090, 0.160, 0.280, 0.290, 0.100, 0.030, 0.015, 0.005},  // from S2
    {0.012, 0.048, 0.250, 0.300, 0.230, 0.110, 0.040, 0.008, 0.002},  // from S3
    {0.008, 0.022, 0.060, 0.360, 0.380, 0.130, 0.030, 0.008, 0.002},  // from S4
}};
constexpr std::array<double, 9> kNeutralRow = {0.005, 0.015, 0.040, 0.440, 0.0,
                                               0.440, 0.040, 0.015, 0.005};

bool is_extreme(int j) { return j <= 1 || j >= 7; }

}  // namespace

Tpm plant_tpm(double p55, double extreme_scale) {
  if (!(p55 > 0.0 && p55 < 1.0)) throw std::invalid_argument("plant_tpm: p55 must be in (0,1)");
  if (extreme_scale < 0.0) throw std::invalid_argument("plant_tpm: extreme_scale must be >= 0");

  Matrix9 p{};
  for (int i = 0; i < kNumStates; ++i) {
    std::array<double, 9> w{};
    if (i == 4) {
      w = kNeutralRow;
    } else if (i < 4) {
      w = kOuterRows[i];
    } else {
      const auto& src = kOuterRows[8 - i];
      for (int j = 0; j < kNumStates; ++j) w[j] = src[8 - j];
    }
    for (int j = 0; j < kNumStates; ++j)
      if (is_extreme(j)) w[j] *= extreme_scale;

    double sum = 0.0;
    for (double v : w) sum += v;
    if (i == 4) {
      for (int j = 0; j < kNumStates; ++j) p[i][j] = w[j] / sum * (1.0 - p55);
      p[i][i] = p55;
    } else {
      for (int j = 0; j < kNumStates; ++j) p[i][j] = w[j] / sum;
    }
  }

  Tpm tpm;
  tpm.p = p;
  for (int i = 0; i < kNumStates; ++i) {
    double sum = 0.0;
    for (int j = 0; j < kNumStates; ++j) sum += p[i][j];
    // exact row sums: fold rounding residue into the largest entry
    int arg = 0;
    for (int j = 1; j < kNumStates; ++j)
      if (p[i][j] > p[i][arg]) arg = j;
    tpm.p[i][arg] += 1.0 - sum;
    tpm.row_support[i] = true;
  }
  return tpm;
}

std::pair<double, double> state_percent_band(StateId s) {
  switch (s) {
    case StateId::S1: return {-8.00, -5.20};
    case StateId::S2: return {-4.90, -2.10};
    case StateId::S3: return {-1.90, -1.10};
    case StateId::S4: return {-0.92, -0.08};
    case StateId::S5: return {0.0, 0.0};
    case StateId::S6: return {0.08, 0.92};
    case StateId::S7: return {1.10, 1.90};
    case StateId::S8: return {2.10, 4.90};
    default: return {5.20, 8.00};
  }
}

PlantConfig PlantConfig::from_json(const json& j) {
  PlantConfig plant;
  if (j.contains("seed")) plant.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& d : j.at("days")) plant.days.push_back(Date::parse(d.get<std::string>()));
  for (const auto& [tier, tickers] : j.at("tiers").items()) {
    const Tier t = tier_from_name(tier);
    for (const auto& ticker : tickers) plant.tier_map[ticker.get<std::string>()] = t;
  }
  if (j.contains("intervals")) {
    plant.intervals.clear();
    for (const auto& spec : j.at("intervals"))
      plant.intervals.push_back({spec.at("label").get<std::string>(),
                                 parse_time_of_day_ms(spec.at("start").get<std::string>()),
                                 parse_time_of_day_ms(spec.at("end").get<std::string>())});
  }
  if (j.contains("events_per_interval"))
    plant.events_per_interval = j.at("events_per_interval").get<int>();
  if (j.contains("noise_fraction")) plant.noise_fraction = j.at("noise_fraction").get<double>();
  if (j.contains("extreme_scale")) plant.extreme_scale = j.at("extreme_scale").get<double>();
  if (j.contains("start_price_min")) plant.start_price_min = j.at("start_price_min").get<double>();
  if (j.contains("start_price_max")) plant.start_price_max = j.at("start_price_max").get<double>();
  if (j.contains("exchange")) plant.exchange = j.at("exchange").get<std::string>();
  for (const auto& [tier, sides] : j.at("p55").items()) {
    const Tier t = tier_from_name(tier);
    for (const auto& [side, values] : sides.items())
      plant.p55[t][side_from_name(side)] = values.get<std::vector<double>>();
  }
  for (const auto& [ticker, tier] : plant.tier_map) {
    (void)ticker;
    for (Side side : {Side::Ask, Side::Bid}) {
      const auto it = plant.p55.find(tier);
      if (it == plant.p55.end() || it->second.find(side) == it->second.end() ||
          it->second.at(side).size() != plant.intervals.size())
        throw DataError("plant config: p55 profile missing or wrong length for " +
                        std::string(tier_name(tier)) + "/" + side_name(side));
    }
  }
  if (plant.events_per_interval < 3) throw DataError("plant config: events_per_interval too small");
  return plant;
}

PlantConfig PlantConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open plant config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("plant config parse error in " + path + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const json::exception& e) {
    throw DataError("plant config schema error in " + path + ": " + e.what());
  }
}

json PlantConfig::to_json() const {
  json tiers(json::value_t::object);
  for (Tier t : {Tier::HMC, Tier::MMC, Tier::LMC}) {
    json list(json::value_t::array);
    for (const auto& [ticker, tier] : tier_map)
      if (tier == t) list.push_back(ticker);
    if (!list.empty()) tiers[tier_name(t)] = list;
  }
  json days_json(json::value_t::array);
  for (const auto& d : days) days_json.push_back(d.to_string());
  json intervals_json(json::value_t::array);
  for (const auto& spec : intervals)
    intervals_json.push_back({{"label", spec.label},
                              {"start", format_time_of_day(spec.start_ms)},
                              {"end", format_time_of_day(spec.end_ms)}});
  json p55_json(json::value_t::object);
  for (const auto& [tier, sides] : p55) {
    json per_side(json::value_t::object);
    for (const auto& [side, values] : sides) per_side[side_name(side)] = values;
    p55_json[tier_name(tier)] = per_side;
  }
  return json{{"seed", seed},
              {"days", days_json},
              {"tiers", tiers},
              {"intervals", intervals_json},
              {"events_per_interval", events_per_interval},
              {"noise_fraction", noise_fraction},
              {"extreme_scale", extreme_scale},
              {"start_price_min", start_price_min},
              {"start_price_max", start_price_max},
              {"exchange", exchange},
              {"p55", p55_json}};
}

namespace {

double round_cents(double price) { return std::round(price * 100.0) / 100.0; }

inline double uniform01(std::mt19937_64& gen) { return double(gen() >> 11) * 0x1.0p-53; }

struct RawRow {
  int timestamp_ms;
  int tie_rank;  // deterministic tie-break before order ids are assigned
  std::string ticker;
  const char* event;
  double price;  // 0 for non-ADD rows
  int quantity;
};

void append_row(std::string& out, const Date& day, const RawRow& row, std::int64_t order_id,
                const std::string& exchange) {
  char buf[160];
  const int n = std::snprintf(buf, sizeof(buf), "%s,%s,%lld,%s,%s,%.2f,%d,%s\n",
                              day.to_string().c_str(), format_time_of_day(row.timestamp_ms).c_str(),
                              static_cast<long long>(order_id), row.event, row.ticker.c_str(),
                              row.price, row.quantity, exchange.c_str());
  out.append(buf, std::size_t(n));
}

}  // namespace

FixtureResult generate_fixture(const PlantConfig& plant, const std::string& out_dir) {
  fs::create_directories(out_dir);
  FixtureResult result;

  std::vector<std::string> tickers;
  for (const auto& [ticker, tier] : plant.tier_map) tickers.push_back(ticker);
  std::sort(tickers.begin(), tickers.end());
  std::vector<Date> days = plant.days;
  std::sort(days.begin(), days.end());

  // deterministic per-ticker start price
  auto start_price = [&](const std::string& ticker) {
    const std::uint64_t h = fnv1a64(ticker);
    const double frac = double(h % 100000) / 100000.0;
    return round_cents(plant.start_price_min +
                       frac * (plant.start_price_max - plant.start_price_min));
  };

  const int n_intervals = int(plant.intervals.size());
  std::vector<RawRow> rows;
  std::string text;

  for (const auto& day : days) {
    rows.clear();
    const std::string day_str = day.to_string();

    for (std::size_t t_idx = 0; t_idx < tickers.size(); ++t_idx) {
      const std::string& ticker = tickers[t_idx];
      const Tier tier = plant.tier_map.at(ticker);
      for (Side side : {Side::Ask, Side::Bid}) {
        const char* add_event = side == Side::Ask ? "ADD-ASK" : "ADD-BID";
        const std::uint64_t key_seed =
            fnv1a64(ticker + "|" + day_str + "|" + side_name(side), plant.seed);
        std::mt19937_64 band_gen(key_seed ^ 0x9e3779b97f4a7c15ULL);

        double price = start_price(ticker);
        if (side == Side::Bid) price = round_cents(price * 0.999);

        // two pre-session submissions feed the optional seed path
        rows.push_back({kFeedOpenMs + 122 + int(t_idx) * 7 + (side == Side::Bid ? 3 : 0), 0,
                        ticker, add_event, price, 300});
        rows.push_back({(9 * 60 + 15) * 60000 + int(t_idx) * 11 + (side == Side::Bid ? 5 : 0), 0,
                        ticker, add_event, price, 200});

        for (int k = 0; k < n_intervals; ++k) {
          const auto& spec = plant.intervals[k];
          const double p55 = plant.p55.at(tier).at(side).at(std::size_t(k));
          const Tpm tpm = plant_tpm(p55, plant.extreme_scale);

          const int n_events = plant.events_per_interval;
          Vector9 init{};
          init[index_of(StateId::S5)] = 1.0;
          const auto states =
              simulate(tpm, init, std::size_t(n_events - 1), key_seed + std::uint64_t(k) + 1);

          const int duration = spec.end_ms - spec.start_ms + 1;
          const int step = std::max(1, duration / n_events);
          const int offset = int((t_idx * 97 + (side == Side::Bid ? 13 : 0)) % std::size_t(step));

          for (int e = 0; e < n_events; ++e) {
            int ts = spec.start_ms + offset + e * step;
            if (ts > spec.end_ms) ts = spec.end_ms;
            // pin one run's final submission to the inclusive interval end
            if (t_idx == 0 && side == Side::Ask && e == n_events - 1) ts = spec.end_ms;
            if (e > 0) {
              const StateId s = states[std::size_t(e - 1)];
              const auto [lo, hi] = state_percent_band(s);
              double change = lo == hi ? lo : lo + uniform01(band_gen) * (hi - lo);
              if (price < 40.0 && change < 0.0) change = -change;  // price floor guard
              price = round_cents(price * (1.0 + change / 100.0));
            }
            rows.push_back({ts, 1, ticker, add_event, price,
                            100 * (1 + int((key_seed >> (e % 32)) & 7))});
          }
        }
      }
    }

    // deterministic noise: non-ADD rows, off-universe tickers, after-hours
    // submissions, and two malformed lines to exercise row diagnostics
    std::mt19937_64 noise_gen(fnv1a64(day_str, plant.seed) ^ 0x51ed2701ULL);
    const std::size_t base_rows = rows.size();
    const auto n_noise = std::size_t(double(base_rows) * plant.noise_fraction);
    static constexpr const char* kOtherEvents[] = {"FILL-BID", "DELETE-ASK", "CANCEL-BID",
                                                   "EXECUTE-ASK", "DELETE-BID"};
    for (std::size_t k = 0; k < n_noise; ++k) {
      const int ts = kFeedOpenMs + int(uniform01(noise_gen) * double(kFeedCloseMs - kFeedOpenMs));
      const auto pick = std::size_t(uniform01(noise_gen) * double(tickers.size()));
      const double which = uniform01(noise_gen);
      if (which < 0.75) {
        rows.push_back({ts, 2, tickers[std::min(pick, tickers.size() - 1)],
                        kOtherEvents[k % 5], 0.0, 100});
      } else {
        rows.push_back({ts, 2, "ZZZX", k % 2 == 0 ? "ADD-ASK" : "ADD-BID",
                        round_cents(20.0 + 10.0 * uniform01(noise_gen)), 50});
      }
    }

    std::stable_sort(rows.begin(), rows.end(), [](const RawRow& a, const RawRow& b) {
      return std::tie(a.timestamp_ms, a.tie_rank, a.ticker) <
             std::tie(b.timestamp_ms, b.tie_rank, b.ticker);
    });

    text.clear();
    text.reserve(rows.size() * 56 + 128);
    std::int64_t order_id = 10000;
    for (const auto& row : rows) append_row(text, day, row, ++order_id, plant.exchange);
    // malformed rows: unparseable timestamp, unparseable price
    text += day_str + ",9:99:00.000,1,ADD-ASK," + tickers.front() + ",100.00,100," +
            plant.exchange + "\n";
    text += day_str + ",10:00:00.000,2,ADD-BID," + tickers.front() + ",not-a-price,100," +
            plant.exchange + "\n";

    const fs::path path = fs::path(out_dir) / ("ticks_" + day_str + ".csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write fixture file: " + path.string());
    out << text;
    out.close();
    result.tick_files.push_back(path.string());
    result.total_rows += rows.size() + 2;
    result.total_bytes += text.size();
  }

  // truth sidecar: planted profiles and matrices
  json truth;
  truth["plant"] = plant.to_json();
  json matrices(json::value_t::object);
  for (const auto& [tier, sides] : plant.p55) {
    json per_side(json::value_t::object);
    for (const auto& [side, values] : sides) {
      json per_interval(json::value_t::array);
      for (double p : values) {
        const Tpm tpm = plant_tpm(p, plant.extreme_scale);
        json rows_json(json::value_t::array);
        for (int i = 0; i < kNumStates; ++i) {
          json row(json::value_t::array);
          for (int j = 0; j < kNumStates; ++j) row.push_back(tpm.p[i][j]);
          rows_json.push_back(std::move(row));
        }
        per_interval.push_back(std::move(rows_json));
      }
      per_side[side_name(side)] = std::move(per_interval);
    }
    matrices[tier_name(tier)] = std::move(per_side);
  }
  truth["tpms"] = std::move(matrices);

  const fs::path truth_path = fs::path(out_dir) / "plant_truth.json";
  {
    std::ofstream out(truth_path);
    out << truth.dump(2) << "\n";
  }
  result.truth_path = truth_path.string();

  // ready-to-run config
  RunConfig cfg;
  cfg.inputs = result.tick_files;
  cfg.universe.tier_map = plant.tier_map;
  cfg.universe.trading_days = days;
  cfg.universe.intervals = plant.intervals;
  cfg.output_dir = (fs::path(out_dir) / "out").string();
  cfg.tsne.seed = plant.seed + 7;
  const fs::path config_path = fs::path(out_dir) / "run_config.json";
  {
    std::ofstream out(config_path);
    out << cfg.to_json().dump(2) << "\n";
  }
  result.config_path = config_path.string();
  return result;
}

PlantConfig builtin_full_plant() {
  PlantConfig plant;
  plant.seed = 20181107;
  for (const char* d : {"2018-11-07", "2018-11-09", "2018-11-12", "2018-11-14", "2018-11-15",
                        "2018-11-28", "2018-12-04", "2018-12-06", "2018-12-07", "2018-12-10",
                        "2018-12-21", "2018-12-26"})
    plant.days.push_back(Date::parse(d));
  for (const char* t : {"HAAA", "HBBB", "HCCC", "HDDD", "HEEE"}) plant.tier_map[t] = Tier::HMC;
  for (const char* t : {"MAAA", "MBBB", "MCCC", "MDDD", "MEEE"}) plant.tier_map[t] = Tier::MMC;
  for (const char* t : {"LAAA", "LBBB", "LCCC", "LDDD", "LEEE"}) plant.tier_map[t] = Tier::LMC;
  plant.events_per_interval = 200;
  plant.p55[Tier::HMC][Side::Ask] = {0.62, 0.44, 0.42, 0.43, 0.46, 0.66};
  plant.p55[Tier::HMC][Side::Bid] = {0.60, 0.42, 0.40, 0.41, 0.44, 0.64};
  plant.p55[Tier::MMC][Side::Ask] = {0.50, 0.32, 0.30, 0.31, 0.34, 0.54};
  plant.p55[Tier::MMC][Side::Bid] = {0.48, 0.30, 0.28, 0.29, 0.32, 0.52};
  plant.p55[Tier::LMC][Side::Ask] = {0.38, 0.20, 0.18, 0.19, 0.22, 0.42};
  plant.p55[Tier::LMC][Side::Bid] = {0.36, 0.18, 0.16, 0.17, 0.20, 0.40};
  return plant;
}

PlantConfig builtin_small_plant() {
  PlantConfig plant;
  plant.seed = 42;
  plant.days = {Date::parse("2018-11-07"), Date::parse("2018-11-09")};
  plant.tier_map = {{"HXX", Tier::HMC}, {"MXX", Tier::MMC}, {"LXX", Tier::LMC}};
  plant.events_per_interval = 900;
  plant.extreme_scale = 0.0;  // confine support to S3..S7
  plant.p55[Tier::HMC][Side::Ask] = {0.60, 0.45, 0.43, 0.44, 0.47, 0.64};
  plant.p55[Tier::HMC][Side::Bid] = {0.58, 0.43, 0.41, 0.42, 0.45, 0.62};
  plant.p55[Tier::MMC][Side::Ask] = {0.48, 0.33, 0.31, 0.32, 0.35, 0.52};
  plant.p55[Tier::MMC][Side::Bid] = {0.46, 0.31, 0.29, 0.30, 0.33, 0.50};
  plant.p55[Tier::LMC][Side::Ask] = {0.36, 0.21, 0.19, 0.20, 0.23, 0.40};
  plant.p55[Tier::LMC][Side::Bid] = {0.34, 0.19, 0.17, 0.18, 0.21, 0.38};
  return plant;
}

}  // namespace lobmc
