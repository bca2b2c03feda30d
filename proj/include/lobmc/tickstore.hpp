#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lobmc/types.hpp"

namespace lobmc {

enum class EventType : std::uint8_t { AddAsk, AddBid, Other };

// Full feed window, 04:00:00.000 - 20:00:00.000 EST.
inline constexpr int kFeedOpenMs = 4 * 3600 * 1000;
inline constexpr int kFeedCloseMs = 20 * 3600 * 1000;

// One parsed order-submission row (Date, Timestamp, Order Id, Event Type,
// Ticker, Price, Quantity, Exchange).
struct TickEvent {
  Date date;
  int timestamp_ms = 0;  // milliseconds since midnight EST
  std::int64_t order_id = 0;
  EventType event_type = EventType::Other;
  std::string ticker;
  double price = 0.0;
  std::int64_t quantity = 0;
  std::string exchange;
  std::uint32_t file_index = 0;
  std::uint64_t line = 0;  // 1-based line number within its source file
};

bool matches_side(EventType type, Side side);
std::vector<TickEvent> filter_side(std::span<const TickEvent> events, Side side);

// "H:MM:SS.mmm" or "HH:MM:SS.mmm" -> milliseconds since midnight.
int parse_time_of_day_ms(std::string_view text);  // throws DataError
std::string format_time_of_day(int ms);

struct IntervalSpec {
  std::string label;  // "T1".."T6" by default
  int start_ms = 0;
  int end_ms = 0;  // inclusive at millisecond granularity
};

// The six trading-session intervals (T1/T2/T5/T6 span 60 minutes, T3/T4 span
// 75) covering 09:30:00.000 - 16:00:00.000.
std::vector<IntervalSpec> default_intervals();

// Index of the unique interval containing the timestamp (bounds inclusive),
// or nullopt outside the session.
std::optional<int> assign_interval(int timestamp_ms, std::span<const IntervalSpec> table);

struct UniverseConfig {
  std::map<std::string, Tier> tier_map;
  std::vector<Date> trading_days;  // empty accepts every day seen
  std::vector<IntervalSpec> intervals = default_intervals();
  bool include_preopen_seed = false;  // seed each day's first chain with the
                                      // last pre-session price

  // 15-ticker universe and 12 trading days of the reference study.
  static UniverseConfig study_defaults();

  bool day_selected(const Date& day) const;
  std::optional<Tier> tier_of(const std::string& ticker) const;
  std::vector<Tier> tiers_present() const;
};

struct SchemaConfig {
  char delimiter = ',';
  bool has_header = false;
};

struct RowDiagnostic {
  std::uint32_t file_index = 0;
  std::uint64_t line = 0;
  std::string reason;
};

struct IngestStats {
  std::uint64_t rows_read = 0;    // data rows seen (header excluded)
  std::uint64_t rows_parsed = 0;  // rows yielding a valid TickEvent
  std::uint64_t rows_rejected = 0;
  std::map<std::string, std::uint64_t> rejected_by_reason;
  void merge(const IngestStats& other);
};

// Pull parser over a character stream; memory use is one line at a time.
// Rows that violate the event invariants are rejected with a per-row
// diagnostic (line number + reason) and never yielded.
class TickReader {
 public:
  static constexpr std::size_t kMaxDiagnostics = 64;

  TickReader(std::istream& in, SchemaConfig schema, std::string source_name,
             std::uint32_t file_index = 0);

  std::optional<TickEvent> next();  // nullopt at end of stream

  const IngestStats& stats() const { return stats_; }
  const std::vector<RowDiagnostic>& diagnostics() const { return diagnostics_; }
  std::uint64_t suppressed_diagnostics() const { return suppressed_; }
  const std::string& source_name() const { return source_; }

 private:
  void reject(const std::string& reason);
  bool parse_row(std::string_view row, TickEvent& out, std::string& reason) const;

  std::istream& in_;
  SchemaConfig schema_;
  std::string source_;
  std::uint32_t file_index_ = 0;
  std::uint64_t line_ = 0;
  bool header_pending_ = false;
  std::string buffer_;
  IngestStats stats_;
  std::vector<RowDiagnostic> diagnostics_;
  std::uint64_t suppressed_ = 0;
};

struct RunKey {
  std::string ticker;
  Date day;
  Side side = Side::Ask;
  int interval = 0;

  auto operator<=>(const RunKey&) const = default;
};

// Slim per-event record kept inside runs; everything else lives in the key.
struct RunEvent {
  int timestamp_ms = 0;
  std::uint32_t file_index = 0;
  std::int64_t order_id = 0;
  std::uint64_t line = 0;
  double price = 0.0;
};

struct Run {
  std::vector<RunEvent> events;
  std::optional<double> seed_price;  // last pre-session price, when configured
};

using RunMap = std::map<RunKey, Run>;

struct GroupStats {
  std::uint64_t kept_ask = 0;
  std::uint64_t kept_bid = 0;
  std::uint64_t skipped_other_type = 0;
  std::uint64_t skipped_unknown_ticker = 0;
  std::uint64_t skipped_off_day = 0;
  std::uint64_t skipped_out_of_session = 0;  // valid ADD rows outside 09:30-16:00
  std::uint64_t preopen_seeds = 0;
  void merge(const GroupStats& other);
};

// Drains the reader into the run map. Events are appended unsorted; call
// finalize_runs once all sources are merged.
GroupStats group_runs_stream(TickReader& reader, const UniverseConfig& universe, RunMap& runs);

// Sorts each run by (timestamp, order_id, file position) and attaches
// pre-session seed prices to each day's earliest non-empty run.
void finalize_runs(RunMap& runs, const UniverseConfig& universe);

// One-shot variant over already-parsed events.
RunMap group_runs(std::span<const TickEvent> events, const UniverseConfig& universe,
                  GroupStats* stats_out = nullptr);

struct IngestReport {
  IngestStats parse;
  GroupStats group;
  std::vector<std::string> files;
  std::vector<RowDiagnostic> sample_diagnostics;
  std::uint64_t suppressed_diagnostics = 0;
  std::array<std::uint64_t, kNumStates> state_occupancy{};  // filled by the pipeline

  std::string to_text() const;
};

struct IngestResult {
  RunMap runs;
  IngestReport report;
};

// Parses every file (in path order; workers > 1 parses files concurrently),
// merges and finalizes the run map. Identical inputs produce an identical
// run map for any worker count. Throws DataError when a file cannot be read.
IngestResult ingest_files(const std::vector<std::string>& paths, const SchemaConfig& schema,
                          const UniverseConfig& universe, int workers = 1);

}  // namespace lobmc
