#include "lobmc/config.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace lobmc {

using nlohmann::json;

const char* aggregation_name(Aggregation a) {
  return a == Aggregation::Pooled ? "pooled" : "averaged";
}

const char* cluster_space_name(ClusterSpace c) {
  switch (c) {
    case ClusterSpace::Pca: return "pca";
    case ClusterSpace::Tsne: return "tsne";
    default: return "raw";
  }
}

std::vector<Side> RunConfig::selected_sides() const {
  switch (sides) {
    case SideSelection::Ask: return {Side::Ask};
    case SideSelection::Bid: return {Side::Bid};
    default: return {Side::Ask, Side::Bid};
  }
}

namespace {

double parse_log_base(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "e" || s == "nat") return kNatBase;
    if (s == "2" || s == "bit") return 2.0;
    throw DataError("entropy_log_base must be \"e\", \"2\", or a number");
  }
  const double base = j.get<double>();
  if (!(base > 0.0) || base == 1.0) throw DataError("entropy_log_base must be positive and != 1");
  return base;
}

json log_base_to_json(double base) {
  if (base == kNatBase) return "e";
  return base;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  if (j.contains("inputs")) cfg.inputs = j.at("inputs").get<std::vector<std::string>>();

  if (j.contains("delimiter")) {
    const std::string d = j.at("delimiter").get<std::string>();
    if (d.size() != 1) throw DataError("delimiter must be a single character");
    cfg.schema.delimiter = d[0];
  }
  if (j.contains("has_header")) cfg.schema.has_header = j.at("has_header").get<bool>();

  if (j.contains("universe")) {
    const auto& u = j.at("universe");
    cfg.universe = UniverseConfig{};
    if (u.contains("tiers")) {
      for (const auto& [tier, tickers] : u.at("tiers").items()) {
        const Tier t = tier_from_name(tier);
        for (const auto& ticker : tickers) cfg.universe.tier_map[ticker.get<std::string>()] = t;
      }
    }
    if (u.contains("trading_days"))
      for (const auto& d : u.at("trading_days"))
        cfg.universe.trading_days.push_back(Date::parse(d.get<std::string>()));
    if (u.contains("intervals")) {
      cfg.universe.intervals.clear();
      for (const auto& spec : u.at("intervals")) {
        IntervalSpec is;
        is.label = spec.at("label").get<std::string>();
        is.start_ms = parse_time_of_day_ms(spec.at("start").get<std::string>());
        is.end_ms = parse_time_of_day_ms(spec.at("end").get<std::string>());
        if (is.end_ms < is.start_ms) throw DataError("interval " + is.label + " ends before it starts");
        cfg.universe.intervals.push_back(std::move(is));
      }
      if (cfg.universe.intervals.empty()) throw DataError("interval table is empty");
    } else {
      cfg.universe.intervals = default_intervals();
    }
    if (u.contains("include_preopen_seed"))
      cfg.universe.include_preopen_seed = u.at("include_preopen_seed").get<bool>();
  }

  if (j.contains("sides")) {
    const std::string s = j.at("sides").get<std::string>();
    if (s == "ask")
      cfg.sides = SideSelection::Ask;
    else if (s == "bid")
      cfg.sides = SideSelection::Bid;
    else if (s == "both")
      cfg.sides = SideSelection::Both;
    else
      throw DataError("sides must be ask, bid, or both");
  }
  if (j.contains("aggregation")) {
    const std::string a = j.at("aggregation").get<std::string>();
    if (a == "pooled")
      cfg.aggregation = Aggregation::Pooled;
    else if (a == "averaged")
      cfg.aggregation = Aggregation::Averaged;
    else
      throw DataError("aggregation must be pooled or averaged");
  }
  if (j.contains("smoothing_alpha")) {
    cfg.smoothing_alpha = j.at("smoothing_alpha").get<double>();
    if (cfg.smoothing_alpha < 0.0) throw DataError("smoothing_alpha must be >= 0");
  }
  if (j.contains("entropy_log_base")) cfg.entropy_log_base = parse_log_base(j.at("entropy_log_base"));
  if (j.contains("pca_components")) {
    cfg.pca_components = j.at("pca_components").get<int>();
    if (cfg.pca_components < 1) throw DataError("pca_components must be >= 1");
  }
  if (j.contains("tsne")) {
    const auto& t = j.at("tsne");
    if (t.contains("perplexity")) cfg.tsne.perplexity = t.at("perplexity").get<double>();
    if (t.contains("iterations")) cfg.tsne.iterations = t.at("iterations").get<int>();
    if (t.contains("learning_rate")) cfg.tsne.learning_rate = t.at("learning_rate").get<double>();
    if (t.contains("early_exaggeration"))
      cfg.tsne.early_exaggeration = t.at("early_exaggeration").get<double>();
    if (t.contains("exaggeration_iters"))
      cfg.tsne.exaggeration_iters = t.at("exaggeration_iters").get<int>();
    if (t.contains("seed")) cfg.tsne.seed = t.at("seed").get<std::uint64_t>();
  }
  if (j.contains("dbscan")) {
    const auto& d = j.at("dbscan");
    if (d.contains("min_pts")) cfg.dbscan.min_pts = d.at("min_pts").get<int>();
    if (d.contains("eps") && !d.at("eps").is_null()) cfg.dbscan.eps = d.at("eps").get<double>();
    if (cfg.dbscan.min_pts < 1) throw DataError("dbscan min_pts must be >= 1");
    if (cfg.dbscan.eps && !(*cfg.dbscan.eps > 0.0)) throw DataError("dbscan eps must be > 0");
  }
  if (j.contains("cluster_space")) {
    const std::string c = j.at("cluster_space").get<std::string>();
    if (c == "pca")
      cfg.cluster_space = ClusterSpace::Pca;
    else if (c == "tsne")
      cfg.cluster_space = ClusterSpace::Tsne;
    else if (c == "raw")
      cfg.cluster_space = ClusterSpace::Raw;
    else
      throw DataError("cluster_space must be pca, tsne, or raw");
  }
  if (j.contains("ward_cut_k")) {
    cfg.ward_cut_k = j.at("ward_cut_k").get<int>();
    if (cfg.ward_cut_k < 1) throw DataError("ward_cut_k must be >= 1");
  }
  if (j.contains("gtest_pooled")) cfg.gtest_pooled = j.at("gtest_pooled").get<bool>();
  if (j.contains("acf_max_lag")) {
    cfg.acf_max_lag = j.at("acf_max_lag").get<int>();
    if (cfg.acf_max_lag < 1) throw DataError("acf_max_lag must be >= 1");
  }
  if (j.contains("acf_on_states")) cfg.acf_on_states = j.at("acf_on_states").get<bool>();
  if (j.contains("dump_sequences")) cfg.dump_sequences = j.at("dump_sequences").get<bool>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("report_formats"))
    cfg.report_formats = j.at("report_formats").get<std::vector<std::string>>();
  if (j.contains("workers")) {
    cfg.workers = j.at("workers").get<int>();
    if (cfg.workers < 1) throw DataError("workers must be >= 1");
  }
  return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("config parse error in " + path + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const json::exception& e) {
    throw DataError("config schema error in " + path + ": " + e.what());
  }
}

json RunConfig::to_json() const {
  json j;
  j["inputs"] = inputs;
  j["delimiter"] = std::string(1, schema.delimiter);
  j["has_header"] = schema.has_header;

  json tiers(json::value_t::object);
  for (Tier t : {Tier::HMC, Tier::MMC, Tier::LMC}) {
    json list(json::value_t::array);
    for (const auto& [ticker, tier] : universe.tier_map)
      if (tier == t) list.push_back(ticker);
    if (!list.empty()) tiers[tier_name(t)] = list;
  }
  json days(json::value_t::array);
  for (const auto& d : universe.trading_days) days.push_back(d.to_string());
  json intervals(json::value_t::array);
  for (const auto& spec : universe.intervals)
    intervals.push_back({{"label", spec.label},
                         {"start", format_time_of_day(spec.start_ms)},
                         {"end", format_time_of_day(spec.end_ms)}});
  j["universe"] = {{"tiers", tiers},
                   {"trading_days", days},
                   {"intervals", intervals},
                   {"include_preopen_seed", universe.include_preopen_seed}};

  j["sides"] = sides == SideSelection::Ask ? "ask" : sides == SideSelection::Bid ? "bid" : "both";
  j["aggregation"] = aggregation_name(aggregation);
  j["smoothing_alpha"] = smoothing_alpha;
  j["entropy_log_base"] = log_base_to_json(entropy_log_base);
  j["pca_components"] = pca_components;
  j["tsne"] = {{"perplexity", tsne.perplexity},
               {"iterations", tsne.iterations},
               {"learning_rate", tsne.learning_rate},
               {"early_exaggeration", tsne.early_exaggeration},
               {"exaggeration_iters", tsne.exaggeration_iters},
               {"seed", tsne.seed}};
  j["dbscan"] = {{"min_pts", dbscan.min_pts}, {"eps", dbscan.eps ? json(*dbscan.eps) : json()}};
  j["cluster_space"] = cluster_space_name(cluster_space);
  j["ward_cut_k"] = ward_cut_k;
  j["gtest_pooled"] = gtest_pooled;
  j["acf_max_lag"] = acf_max_lag;
  j["acf_on_states"] = acf_on_states;
  j["dump_sequences"] = dump_sequences;
  j["output_dir"] = output_dir;
  j["report_formats"] = report_formats;
  j["workers"] = workers;
  return j;
}

std::string RunConfig::canonical_dump() const { return to_json().dump(); }

std::uint64_t fnv1a64_bytes(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed) {
  return fnv1a64_bytes(text.data(), text.size(), seed);
}

std::string fnv_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for digest: " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a64_bytes(buf, std::size_t(in.gcount()), h);
  return h;
}

}  // namespace lobmc
