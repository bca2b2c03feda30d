#include "lobmc/tickstore.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>
#include <thread>
#include <tuple>

namespace lobmc {

bool matches_side(EventType type, Side side) {
  return (side == Side::Ask && type == EventType::AddAsk) ||
         (side == Side::Bid && type == EventType::AddBid);
}

std::vector<TickEvent> filter_side(std::span<const TickEvent> events, Side side) {
  std::vector<TickEvent> out;
  for (const auto& e : events)
    if (matches_side(e.event_type, side)) out.push_back(e);
  return out;
}

int parse_time_of_day_ms(std::string_view text) {
  auto bad = [&] { return DataError("bad timestamp: " + std::string(text)); };
  // H:MM:SS.mmm or HH:MM:SS.mmm
  const std::size_t first_colon = text.find(':');
  if (first_colon == std::string_view::npos || first_colon < 1 || first_colon > 2) throw bad();
  if (text.size() != first_colon + 10 || text[first_colon + 3] != ':' ||
      text[first_colon + 6] != '.')
    throw bad();

  int h = 0, m = 0, s = 0, ms = 0;
  const char* base = text.data();
  auto parse_int = [&](std::size_t off, std::size_t len, int& out) {
    auto r = std::from_chars(base + off, base + off + len, out);
    return r.ec == std::errc{} && r.ptr == base + off + len;
  };
  if (!parse_int(0, first_colon, h) || !parse_int(first_colon + 1, 2, m) ||
      !parse_int(first_colon + 4, 2, s) || !parse_int(first_colon + 7, 3, ms))
    throw bad();
  if (h < 0 || h > 23 || m < 0 || m > 59 || s < 0 || s > 59) throw bad();
  return ((h * 60 + m) * 60 + s) * 1000 + ms;
}

std::string format_time_of_day(int ms) {
  const int h = ms / 3600000;
  const int m = (ms / 60000) % 60;
  const int s = (ms / 1000) % 60;
  const int milli = ms % 1000;
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%d:%02d:%02d.%03d", h, m, s, milli);
  return buf;
}

std::vector<IntervalSpec> default_intervals() {
  auto t = [](int h, int m, int s, int ms) { return ((h * 60 + m) * 60 + s) * 1000 + ms; };
  return {
      {"T1", t(9, 30, 0, 0), t(10, 29, 59, 999)},
      {"T2", t(10, 30, 0, 0), t(11, 29, 59, 999)},
      {"T3", t(11, 30, 0, 0), t(12, 44, 59, 999)},
      {"T4", t(12, 45, 0, 0), t(13, 59, 59, 999)},
      {"T5", t(14, 0, 0, 0), t(14, 59, 59, 999)},
      {"T6", t(15, 0, 0, 0), t(16, 0, 0, 0)},
  };
}

std::optional<int> assign_interval(int timestamp_ms, std::span<const IntervalSpec> table) {
  for (std::size_t k = 0; k < table.size(); ++k)
    if (timestamp_ms >= table[k].start_ms && timestamp_ms <= table[k].end_ms) return int(k);
  return std::nullopt;
}

UniverseConfig UniverseConfig::study_defaults() {
  UniverseConfig u;
  for (const char* t : {"AMZN", "JNJ", "JPM", "MSFT", "XOM"}) u.tier_map[t] = Tier::HMC;
  for (const char* t : {"ABBV", "HSBC", "NFLX", "ORCL", "PEP"}) u.tier_map[t] = Tier::MMC;
  for (const char* t : {"AVGO", "BKNG", "BMY", "NKE", "UNP"}) u.tier_map[t] = Tier::LMC;
  for (const char* d : {"2018-11-07", "2018-11-15", "2018-11-28", "2018-12-06", "2018-12-10",
                        "2018-12-26", "2018-11-09", "2018-11-12", "2018-11-14", "2018-12-04",
                        "2018-12-07", "2018-12-21"})
    u.trading_days.push_back(Date::parse(d));
  std::sort(u.trading_days.begin(), u.trading_days.end());
  return u;
}

bool UniverseConfig::day_selected(const Date& day) const {
  if (trading_days.empty()) return true;
  return std::find(trading_days.begin(), trading_days.end(), day) != trading_days.end();
}

std::optional<Tier> UniverseConfig::tier_of(const std::string& ticker) const {
  auto it = tier_map.find(ticker);
  if (it == tier_map.end()) return std::nullopt;
  return it->second;
}

std::vector<Tier> UniverseConfig::tiers_present() const {
  std::vector<Tier> tiers;
  for (Tier t : {Tier::HMC, Tier::MMC, Tier::LMC}) {
    for (const auto& [ticker, tier] : tier_map)
      if (tier == t) {
        tiers.push_back(t);
        break;
      }
  }
  return tiers;
}

void IngestStats::merge(const IngestStats& other) {
  rows_read += other.rows_read;
  rows_parsed += other.rows_parsed;
  rows_rejected += other.rows_rejected;
  for (const auto& [reason, count] : other.rejected_by_reason)
    rejected_by_reason[reason] += count;
}

void GroupStats::merge(const GroupStats& other) {
  kept_ask += other.kept_ask;
  kept_bid += other.kept_bid;
  skipped_other_type += other.skipped_other_type;
  skipped_unknown_ticker += other.skipped_unknown_ticker;
  skipped_off_day += other.skipped_off_day;
  skipped_out_of_session += other.skipped_out_of_session;
  preopen_seeds += other.preopen_seeds;
}

TickReader::TickReader(std::istream& in, SchemaConfig schema, std::string source_name,
                       std::uint32_t file_index)
    : in_(in),
      schema_(schema),
      source_(std::move(source_name)),
      file_index_(file_index),
      header_pending_(schema.has_header) {}

void TickReader::reject(const std::string& reason) {
  ++stats_.rows_rejected;
  ++stats_.rejected_by_reason[reason];
  if (diagnostics_.size() < kMaxDiagnostics)
    diagnostics_.push_back({file_index_, line_, reason});
  else
    ++suppressed_;
}

bool TickReader::parse_row(std::string_view row, TickEvent& out, std::string& reason) const {
  std::array<std::string_view, 8> cols;
  std::size_t n_cols = 0, start = 0;
  for (std::size_t i = 0; i <= row.size(); ++i) {
    if (i == row.size() || row[i] == schema_.delimiter) {
      if (n_cols >= cols.size()) {
        reason = "too_many_columns";
        return false;
      }
      cols[n_cols++] = row.substr(start, i - start);
      start = i + 1;
    }
  }
  if (n_cols != 8) {
    reason = "bad_column_count";
    return false;
  }

  try {
    out.date = Date::parse(cols[0]);
  } catch (const DataError&) {
    reason = "bad_date";
    return false;
  }
  try {
    out.timestamp_ms = parse_time_of_day_ms(cols[1]);
  } catch (const DataError&) {
    reason = "bad_timestamp";
    return false;
  }
  if (out.timestamp_ms < kFeedOpenMs || out.timestamp_ms > kFeedCloseMs) {
    reason = "outside_feed_window";
    return false;
  }

  auto parse_i64 = [](std::string_view sv, std::int64_t& v) {
    auto r = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    return r.ec == std::errc{} && r.ptr == sv.data() + sv.size() && !sv.empty();
  };
  if (!parse_i64(cols[2], out.order_id)) {
    reason = "bad_order_id";
    return false;
  }

  if (cols[3] == "ADD-ASK")
    out.event_type = EventType::AddAsk;
  else if (cols[3] == "ADD-BID")
    out.event_type = EventType::AddBid;
  else
    out.event_type = EventType::Other;

  if (cols[4].empty()) {
    reason = "empty_ticker";
    return false;
  }
  out.ticker.assign(cols[4]);

  {
    const std::string price_str(cols[5]);
    char* end = nullptr;
    out.price = std::strtod(price_str.c_str(), &end);
    if (end != price_str.c_str() + price_str.size() || price_str.empty() ||
        !std::isfinite(out.price) || out.price < 0.0) {
      reason = "bad_price";
      return false;
    }
  }
  if (out.event_type != EventType::Other && out.price <= 0.0) {
    reason = "nonpositive_add_price";
    return false;
  }

  if (!parse_i64(cols[6], out.quantity) || out.quantity <= 0) {
    reason = "bad_quantity";
    return false;
  }
  out.exchange.assign(cols[7]);
  return true;
}

std::optional<TickEvent> TickReader::next() {
  while (std::getline(in_, buffer_)) {
    ++line_;
    if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
    if (header_pending_) {
      header_pending_ = false;
      continue;
    }
    if (buffer_.empty()) continue;
    ++stats_.rows_read;

    TickEvent event;
    std::string reason;
    if (!parse_row(buffer_, event, reason)) {
      reject(reason);
      continue;
    }
    event.file_index = file_index_;
    event.line = line_;
    ++stats_.rows_parsed;
    return event;
  }
  if (in_.bad()) throw DataError("I/O failure while reading " + source_);
  return std::nullopt;
}

namespace {

struct PreopenSeed {
  int timestamp_ms = -1;
  std::uint32_t file_index = 0;
  std::int64_t order_id = 0;
  std::uint64_t line = 0;
  double price = 0.0;
};

using SeedKey = std::tuple<std::string, Date, Side>;

struct GroupSink {
  RunMap& runs;
  std::map<SeedKey, PreopenSeed>* seeds;
  int session_start_ms;
  GroupStats stats;

  void consume(const TickEvent& event, const UniverseConfig& universe) {
    Side side;
    if (event.event_type == EventType::AddAsk)
      side = Side::Ask;
    else if (event.event_type == EventType::AddBid)
      side = Side::Bid;
    else {
      ++stats.skipped_other_type;
      return;
    }
    if (!universe.tier_of(event.ticker)) {
      ++stats.skipped_unknown_ticker;
      return;
    }
    if (!universe.day_selected(event.date)) {
      ++stats.skipped_off_day;
      return;
    }

    const auto interval = assign_interval(event.timestamp_ms, universe.intervals);
    if (!interval) {
      ++stats.skipped_out_of_session;
      if (seeds && event.timestamp_ms < session_start_ms) {
        auto& seed = (*seeds)[{event.ticker, event.date, side}];
        const auto candidate =
            std::make_tuple(event.timestamp_ms, event.order_id, event.file_index, event.line);
        const auto incumbent =
            std::make_tuple(seed.timestamp_ms, seed.order_id, seed.file_index, seed.line);
        if (seed.timestamp_ms < 0 || candidate > incumbent)
          seed = {event.timestamp_ms, event.file_index, event.order_id, event.line, event.price};
      }
      return;
    }

    if (side == Side::Ask)
      ++stats.kept_ask;
    else
      ++stats.kept_bid;
    auto& run = runs[{event.ticker, event.date, side, *interval}];
    run.events.push_back(
        {event.timestamp_ms, event.file_index, event.order_id, event.line, event.price});
  }
};

int session_start_ms(const UniverseConfig& universe) {
  int start = kFeedCloseMs;
  for (const auto& spec : universe.intervals) start = std::min(start, spec.start_ms);
  return start;
}

// Seed candidates travel as provisional runs keyed on interval -1 until
// finalize_runs resolves them, so per-file partial maps merge trivially.
void park_seeds(const std::map<SeedKey, PreopenSeed>& seeds, RunMap& runs) {
  for (const auto& [key, seed] : seeds) {
    const auto& [ticker, day, side] = key;
    runs[{ticker, day, side, -1}].events.push_back(
        {seed.timestamp_ms, seed.file_index, seed.order_id, seed.line, seed.price});
  }
}

}  // namespace

GroupStats group_runs_stream(TickReader& reader, const UniverseConfig& universe, RunMap& runs) {
  std::map<SeedKey, PreopenSeed> seeds;
  GroupSink sink{runs, universe.include_preopen_seed ? &seeds : nullptr,
                 session_start_ms(universe), {}};
  while (auto event = reader.next()) sink.consume(*event, universe);
  park_seeds(seeds, runs);
  return sink.stats;
}

static std::uint64_t finalize_runs_counting(RunMap& runs) {
  std::uint64_t seeds_attached = 0;
  for (auto it = runs.begin(); it != runs.end();) {
    if (it->first.interval != -1) {
      ++it;
      continue;
    }
    auto& events = it->second.events;
    const auto latest = std::max_element(
        events.begin(), events.end(), [](const RunEvent& a, const RunEvent& b) {
          return std::make_tuple(a.timestamp_ms, a.order_id, a.file_index, a.line) <
                 std::make_tuple(b.timestamp_ms, b.order_id, b.file_index, b.line);
        });
    if (latest != events.end()) {
      // attach to the day's earliest non-empty in-session run; keys with the
      // same (ticker, day, side) follow immediately in map order
      for (auto next = std::next(it); next != runs.end(); ++next) {
        if (next->first.ticker != it->first.ticker || next->first.day != it->first.day ||
            next->first.side != it->first.side)
          break;
        if (!next->second.events.empty()) {
          next->second.seed_price = latest->price;
          ++seeds_attached;
          break;
        }
      }
    }
    it = runs.erase(it);
  }

  for (auto& [key, run] : runs) {
    std::sort(run.events.begin(), run.events.end(), [](const RunEvent& a, const RunEvent& b) {
      return std::make_tuple(a.timestamp_ms, a.order_id, a.file_index, a.line) <
             std::make_tuple(b.timestamp_ms, b.order_id, b.file_index, b.line);
    });
  }
  return seeds_attached;
}

void finalize_runs(RunMap& runs, const UniverseConfig&) { finalize_runs_counting(runs); }

RunMap group_runs(std::span<const TickEvent> events, const UniverseConfig& universe,
                  GroupStats* stats_out) {
  RunMap runs;
  std::map<SeedKey, PreopenSeed> seeds;
  GroupSink sink{runs, universe.include_preopen_seed ? &seeds : nullptr,
                 session_start_ms(universe), {}};
  for (const auto& event : events) sink.consume(event, universe);
  park_seeds(seeds, runs);
  sink.stats.preopen_seeds = finalize_runs_counting(runs);
  if (stats_out) *stats_out = sink.stats;
  return runs;
}

std::string IngestReport::to_text() const {
  std::ostringstream os;
  os << "ingestion report\n";
  os << "  files:            " << files.size() << "\n";
  os << "  rows read:        " << parse.rows_read << "\n";
  os << "  rows parsed:      " << parse.rows_parsed << "\n";
  os << "  rows rejected:    " << parse.rows_rejected << "\n";
  for (const auto& [reason, count] : parse.rejected_by_reason)
    os << "    " << reason << ": " << count << "\n";
  os << "  kept ask:         " << group.kept_ask << "\n";
  os << "  kept bid:         " << group.kept_bid << "\n";
  os << "  non-ADD rows:     " << group.skipped_other_type << "\n";
  os << "  unknown ticker:   " << group.skipped_unknown_ticker << "\n";
  os << "  off-day rows:     " << group.skipped_off_day << "\n";
  os << "  out of session:   " << group.skipped_out_of_session << "\n";
  os << "  pre-open seeds:   " << group.preopen_seeds << "\n";
  os << "  state occupancy:";
  for (int i = 0; i < kNumStates; ++i)
    os << " " << state_name(state_at(i)) << "=" << state_occupancy[i];
  os << "\n";
  if (!sample_diagnostics.empty()) {
    os << "  sample diagnostics (" << sample_diagnostics.size() << " shown, "
       << suppressed_diagnostics << " suppressed):\n";
    for (const auto& d : sample_diagnostics) {
      os << "    ";
      if (d.file_index < files.size()) os << files[d.file_index];
      os << ":" << d.line << " " << d.reason << "\n";
    }
  }
  return os.str();
}

IngestResult ingest_files(const std::vector<std::string>& paths, const SchemaConfig& schema,
                          const UniverseConfig& universe, int workers) {
  if (paths.empty()) throw DataError("no input files configured");

  struct FileOutput {
    RunMap runs;
    GroupStats group;
    IngestStats parse;
    std::vector<RowDiagnostic> diagnostics;
    std::uint64_t suppressed = 0;
    std::exception_ptr error;
  };
  std::vector<FileOutput> outputs(paths.size());

  auto process_file = [&](std::size_t idx) {
    auto& out = outputs[idx];
    try {
      std::ifstream in(paths[idx], std::ios::binary);
      if (!in) throw DataError("cannot open input file: " + paths[idx]);
      TickReader reader(in, schema, paths[idx], std::uint32_t(idx));
      out.group = group_runs_stream(reader, universe, out.runs);
      out.parse = reader.stats();
      out.diagnostics = reader.diagnostics();
      out.suppressed = reader.suppressed_diagnostics();
    } catch (...) {
      out.error = std::current_exception();
    }
  };

  const int n_workers = std::max(1, std::min<int>(workers, int(paths.size())));
  if (n_workers == 1) {
    for (std::size_t i = 0; i < paths.size(); ++i) process_file(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> cursor{0};
    for (int w = 0; w < n_workers; ++w)
      pool.emplace_back([&] {
        while (true) {
          const std::size_t i = cursor.fetch_add(1);
          if (i >= paths.size()) return;
          process_file(i);
        }
      });
    for (auto& t : pool) t.join();
  }

  IngestResult result;
  result.report.files = paths;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    auto& out = outputs[i];
    if (out.error) std::rethrow_exception(out.error);
    result.report.parse.merge(out.parse);
    result.report.group.merge(out.group);
    result.report.suppressed_diagnostics += out.suppressed;
    for (auto& d : out.diagnostics) {
      if (result.report.sample_diagnostics.size() < TickReader::kMaxDiagnostics)
        result.report.sample_diagnostics.push_back(std::move(d));
      else
        ++result.report.suppressed_diagnostics;
    }
    for (auto& [key, run] : out.runs) {
      auto& dest = result.runs[key];
      dest.events.insert(dest.events.end(), run.events.begin(), run.events.end());
    }
  }
  result.report.group.preopen_seeds = finalize_runs_counting(result.runs);
  return result;
}

}  // namespace lobmc
