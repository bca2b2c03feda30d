#include "lobmc/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "lobmc/divergence.hpp"
#include "lobmc/export.hpp"
#include "lobmc/independence.hpp"

namespace lobmc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// artifact writer: byte-compares against existing files so reruns can report
// "reproduced" and determinism checks have something to hold on to
// ---------------------------------------------------------------------------
class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path root) : root_(std::move(root)) {}

  void write(const std::string& rel, std::string_view content) {
    const fs::path path = root_ / rel;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);

    ArtifactRecord rec;
    rec.path = rel;
    rec.bytes = content.size();
    rec.digest = fnv_hex(fnv1a64(content));

    bool reproduced = false;
    if (fs::exists(path) && fs::is_regular_file(path) &&
        fs::file_size(path) == content.size()) {
      std::ifstream in(path, std::ios::binary);
      std::string existing(content.size(), '\0');
      in.read(existing.data(), std::streamsize(existing.size()));
      reproduced = bool(in) && existing == content;
    }
    if (!reproduced) {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) throw DataError("cannot write artifact: " + path.string());
      out.write(content.data(), std::streamsize(content.size()));
      out.close();
      if (!out) throw DataError("short write on artifact: " + path.string());
    }
    rec.status = reproduced ? "reproduced" : "written";
    records_.push_back(std::move(rec));
  }

  const std::vector<ArtifactRecord>& records() const { return records_; }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::vector<ArtifactRecord> records_;
};

std::string read_file_or_throw(const fs::path& path, const std::string& hint) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("missing upstream artifact: " + path.string() + " (run `" + hint +
                    "` first)");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json read_json_or_throw(const fs::path& path, const std::string& hint) {
  try {
    return json::parse(read_file_or_throw(path, hint));
  } catch (const json::exception& e) {
    throw DataError("corrupt artifact " + path.string() + ": " + e.what());
  }
}

// first-exception-wins parallel loop over [0, n)
template <typename Fn>
void parallel_indexed(std::size_t n, int workers, Fn fn) {
  workers = std::max(1, std::min<int>(workers, int(n)));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// in-memory stage products
// ---------------------------------------------------------------------------
struct DayData {
  std::string ticker;
  Date day;
  TransitionCounts counts;
  std::vector<double> changes;
  std::vector<StateId> states;
};

using CellMap = std::map<CellKey, std::vector<DayData>>;
using TpmMap = std::map<CellKey, std::pair<Tpm, std::uint64_t>>;  // matrix, transitions
using MetricsMap = std::map<CellKey, ChainMetrics>;

std::vector<CellKey> enumerate_cells(const RunConfig& config) {
  std::vector<CellKey> cells;
  for (Tier tier : config.universe.tiers_present())
    for (int k = 0; k < int(config.universe.intervals.size()); ++k)
      for (Side side : config.selected_sides()) cells.push_back({tier, k, side});
  std::sort(cells.begin(), cells.end());
  return cells;
}

std::string interval_label(const RunConfig& config, int k) {
  return config.universe.intervals.at(std::size_t(k)).label;
}

std::string cell_name(const RunConfig& config, const CellKey& cell) {
  return std::string(tier_name(cell.tier)) + "/" + interval_label(config, cell.interval) + "/" +
         side_name(cell.side);
}

std::string cell_dir(const RunConfig& config, const CellKey& cell) {
  return std::string(side_name(cell.side)) + "/" + tier_name(cell.tier) + "/" +
         interval_label(config, cell.interval);
}

// ---------------------------------------------------------------------------
// ingest stage
// ---------------------------------------------------------------------------
struct IngestOutcome {
  CellMap cells;
  IngestReport report;
};

IngestOutcome compute_ingest(const RunConfig& config) {
  IngestResult ingested =
      ingest_files(config.inputs, config.schema, config.universe, config.workers);

  IngestOutcome out;
  out.report = std::move(ingested.report);
  const auto sides = config.selected_sides();

  std::uint64_t kept = 0;
  for (Side side : sides)
    kept += side == Side::Ask ? out.report.group.kept_ask : out.report.group.kept_bid;
  if (kept == 0)
    throw DataError("no in-session ADD events matched the configured universe (read " +
                    std::to_string(out.report.parse.rows_read) + " rows)");

  for (auto& [key, run] : ingested.runs) {
    if (std::find(sides.begin(), sides.end(), key.side) == sides.end()) continue;
    const auto tier = config.universe.tier_of(key.ticker);
    if (!tier) continue;

    DayData day_data;
    day_data.ticker = key.ticker;
    day_data.day = key.day;

    std::vector<double> prices;
    prices.reserve(run.events.size() + 1);
    if (run.seed_price) prices.push_back(*run.seed_price);
    for (const auto& e : run.events) prices.push_back(e.price);
    run.events.clear();
    run.events.shrink_to_fit();

    day_data.changes = change_series(prices);
    day_data.states.reserve(day_data.changes.size());
    for (double c : day_data.changes) day_data.states.push_back(classify(c));
    day_data.counts = count_transitions(day_data.states);
    for (StateId s : day_data.states) ++out.report.state_occupancy[index_of(s)];

    out.cells[{*tier, key.interval, key.side}].push_back(std::move(day_data));
  }
  return out;
}

json counts_cell_json(const std::vector<DayData>& days) {
  json obj(json::value_t::object);
  for (const auto& d : days) {
    json rows(json::value_t::array);
    for (int i = 0; i < kNumStates; ++i) {
      json row(json::value_t::array);
      for (int j = 0; j < kNumStates; ++j) row.push_back(d.counts.n[i][j]);
      rows.push_back(std::move(row));
    }
    obj[d.ticker + "|" + d.day.to_string()] = std::move(rows);
  }
  return obj;
}

json gtest_report_json(const CellMap& cells, const RunConfig& config) {
  json report(json::value_t::array);
  for (const auto& [cell, days] : cells) {
    json entry;
    entry["tier"] = tier_name(cell.tier);
    entry["interval"] = interval_label(config, cell.interval);
    entry["side"] = side_name(cell.side);

    // per-day tests, averaged for reporting
    int tested = 0, inconclusive = 0, rejecting = 0, skipped_empty = 0;
    double sum_g = 0.0, sum_df = 0.0, sum_p = 0.0;
    TransitionCounts pooled;
    for (const auto& d : days) {
      if (d.counts.total == 0) {
        ++skipped_empty;
        continue;
      }
      pooled.merge(d.counts);
      const GTestResult r = g_test(d.counts);
      if (!r.conclusive) {
        ++inconclusive;
        continue;
      }
      ++tested;
      sum_g += r.g;
      sum_df += r.df;
      sum_p += r.p_value;
      if (r.reject) ++rejecting;
    }
    entry["days"] = days.size();
    entry["days_tested"] = tested;
    entry["days_inconclusive"] = inconclusive;
    entry["days_empty"] = skipped_empty;
    entry["mean_g"] = tested ? sum_g / tested : 0.0;
    entry["mean_df"] = tested ? sum_df / tested : 0.0;
    entry["mean_p"] = tested ? sum_p / tested : 1.0;
    entry["reject_rate"] = tested ? double(rejecting) / tested : 0.0;
    if (config.gtest_pooled && pooled.total > 0) {
      const GTestResult r = g_test(pooled);
      entry["pooled"] = {{"g", r.g},           {"df", r.df},
                         {"p_value", r.p_value}, {"reject", r.reject},
                         {"conclusive", r.conclusive}, {"dropped_rows", r.dropped_rows},
                         {"dropped_cols", r.dropped_cols}};
    }

    // averaged autocorrelation of the percent-change series (or state
    // indices when configured)
    const int max_lag = config.acf_max_lag;
    std::vector<double> acc(std::size_t(max_lag), 0.0);
    double total_n = 0.0;
    int acf_series = 0;
    for (const auto& d : days) {
      std::vector<double> series;
      if (config.acf_on_states) {
        series.reserve(d.states.size());
        for (StateId s : d.states) series.push_back(double(index_of(s) + 1));
      }
      const std::vector<double>& x = config.acf_on_states ? series : d.changes;
      if (x.size() <= std::size_t(max_lag) + 1) continue;
      const AcfResult r = acf(x, max_lag);
      if (!r.valid) continue;
      for (int l = 0; l < max_lag; ++l) acc[std::size_t(l)] += r.values[std::size_t(l)];
      total_n += double(r.n);
      ++acf_series;
    }
    json acf_json;
    acf_json["series_used"] = acf_series;
    acf_json["on_states"] = config.acf_on_states;
    json lags(json::value_t::array), values(json::value_t::array);
    for (int l = 1; l <= max_lag; ++l) lags.push_back(l);
    for (int l = 0; l < max_lag; ++l)
      values.push_back(acf_series ? acc[std::size_t(l)] / acf_series : 0.0);
    acf_json["lags"] = lags;
    acf_json["mean_values"] = values;
    const double mean_n = acf_series ? total_n / acf_series : 0.0;
    acf_json["mean_n"] = mean_n;
    acf_json["threshold_recip_sqrt_n"] = mean_n > 0 ? 1.0 / std::sqrt(mean_n) : 0.0;
    acf_json["threshold_conventional"] = mean_n > 0 ? 1.96 / std::sqrt(mean_n) : 0.0;
    entry["acf"] = acf_json;

    report.push_back(std::move(entry));
  }
  return json{{"alpha", 0.05}, {"cells", report}};
}

std::string gtest_report_text(const json& report) {
  std::ostringstream os;
  os << "independence report (per-day G-tests, averaged)\n";
  os << "tier interval side  days  mean_G      mean_df  reject_rate\n";
  for (const auto& entry : report.at("cells")) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-4s %-8s %-4s  %4d  %-10.2f  %-7.2f  %.3f\n",
                  entry.at("tier").get<std::string>().c_str(),
                  entry.at("interval").get<std::string>().c_str(),
                  entry.at("side").get<std::string>().c_str(),
                  entry.at("days_tested").get<int>(), entry.at("mean_g").get<double>(),
                  entry.at("mean_df").get<double>(), entry.at("reject_rate").get<double>());
    os << line;
  }
  return os.str();
}

void write_ingest(IngestOutcome& outcome, const RunConfig& config, ArtifactWriter& writer) {
  json report_json;
  report_json["files"] = outcome.report.files;
  report_json["rows_read"] = outcome.report.parse.rows_read;
  report_json["rows_parsed"] = outcome.report.parse.rows_parsed;
  report_json["rows_rejected"] = outcome.report.parse.rows_rejected;
  report_json["rejected_by_reason"] = outcome.report.parse.rejected_by_reason;
  report_json["kept_ask"] = outcome.report.group.kept_ask;
  report_json["kept_bid"] = outcome.report.group.kept_bid;
  report_json["non_add_rows"] = outcome.report.group.skipped_other_type;
  report_json["unknown_ticker_rows"] = outcome.report.group.skipped_unknown_ticker;
  report_json["off_day_rows"] = outcome.report.group.skipped_off_day;
  report_json["out_of_session_rows"] = outcome.report.group.skipped_out_of_session;
  report_json["preopen_seeds"] = outcome.report.group.preopen_seeds;
  json occupancy(json::value_t::object);
  for (int i = 0; i < kNumStates; ++i)
    occupancy[state_name(state_at(i))] = outcome.report.state_occupancy[i];
  report_json["state_occupancy"] = occupancy;
  json diags(json::value_t::array);
  for (const auto& d : outcome.report.sample_diagnostics) {
    const std::string file =
        d.file_index < outcome.report.files.size() ? outcome.report.files[d.file_index] : "?";
    diags.push_back({{"file", file}, {"line", d.line}, {"reason", d.reason}});
  }
  report_json["sample_diagnostics"] = diags;
  report_json["suppressed_diagnostics"] = outcome.report.suppressed_diagnostics;

  writer.write("ingest/report.json", report_json.dump(2) + "\n");
  writer.write("ingest/report.txt", outcome.report.to_text());

  for (const auto& [cell, days] : outcome.cells)
    writer.write("ingest/counts/" + cell_dir(config, cell) + ".json",
                 counts_cell_json(days).dump() + "\n");

  if (config.dump_sequences) {
    for (const auto& [cell, days] : outcome.cells)
      for (const auto& d : days)
        writer.write("ingest/sequences/" + cell_dir(config, cell) + "/" + d.ticker + "_" +
                         d.day.to_string() + ".txt",
                     sequence_letters(d.states) + "\n");
  }

  const json gtest = gtest_report_json(outcome.cells, config);
  writer.write("gtest/report.json", gtest.dump(2) + "\n");
  writer.write("gtest/report.txt", gtest_report_text(gtest));

  // changes/states are not needed downstream; trim the heavy vectors
  for (auto& [cell, days] : outcome.cells)
    for (auto& d : days) {
      d.changes = {};
      d.states = {};
    }
}

CellMap load_counts(const RunConfig& config) {
  CellMap cells;
  for (const CellKey& cell : enumerate_cells(config)) {
    const fs::path path =
        fs::path(config.output_dir) / ("ingest/counts/" + cell_dir(config, cell) + ".json");
    const json obj = read_json_or_throw(path, "ingest");
    auto& days = cells[cell];
    for (const auto& [key, rows] : obj.items()) {
      const auto sep = key.find('|');
      if (sep == std::string::npos) throw DataError("corrupt counts key: " + key);
      DayData d;
      d.ticker = key.substr(0, sep);
      d.day = Date::parse(key.substr(sep + 1));
      for (int i = 0; i < kNumStates; ++i)
        for (int j = 0; j < kNumStates; ++j) {
          const std::uint64_t v = rows.at(i).at(j).get<std::uint64_t>();
          if (v) d.counts.add(state_at(i), state_at(j), v);
        }
      days.push_back(std::move(d));
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------
// estimate stage
// ---------------------------------------------------------------------------
TpmMap compute_tpms(const CellMap& cells, const RunConfig& config) {
  TpmMap tpms;
  for (const CellKey& cell : enumerate_cells(config)) {
    const auto it = cells.find(cell);
    static const std::vector<DayData> kEmpty;
    const auto& days = it != cells.end() ? it->second : kEmpty;

    Tpm tpm;
    std::uint64_t total = 0;
    if (config.aggregation == Aggregation::Pooled) {
      TransitionCounts pooled;
      for (const auto& d : days) pooled.merge(d.counts);
      tpm = estimate_tpm(pooled, config.smoothing_alpha);
      total = pooled.total;
    } else {
      std::vector<Tpm> day_tpms;
      for (const auto& d : days) {
        if (d.counts.total == 0) continue;
        day_tpms.push_back(estimate_tpm(d.counts, config.smoothing_alpha));
        total += d.counts.total;
      }
      tpm = day_tpms.empty() ? estimate_tpm(TransitionCounts{}, config.smoothing_alpha)
                             : average_tpms(day_tpms);
    }
    tpm.provenance = {tier_name(cell.tier), interval_label(config, cell.interval),
                      side_name(cell.side), aggregation_name(config.aggregation)};
    tpms.emplace(cell, std::make_pair(std::move(tpm), total));
  }
  return tpms;
}

void write_tpms(const TpmMap& tpms, const RunConfig& config, ArtifactWriter& writer) {
  const bool svg = std::find(config.report_formats.begin(), config.report_formats.end(),
                             "svg") != config.report_formats.end();
  std::vector<std::string> state_labels;
  for (int i = 0; i < kNumStates; ++i) state_labels.push_back(state_name(state_at(i)));

  for (const auto& [cell, entry] : tpms) {
    const auto& [tpm, total] = entry;
    const std::string base = "tpm/" + cell_dir(config, cell);
    writer.write(base + ".tpm.csv", tpm_csv(tpm.p, 6));
    writer.write(base + ".meta.json", tpm_meta_json(tpm, total).dump(2) + "\n");
    if (svg) {
      std::vector<std::vector<double>> values(kNumStates, std::vector<double>(kNumStates));
      for (int i = 0; i < kNumStates; ++i)
        for (int j = 0; j < kNumStates; ++j) values[i][j] = tpm.p[i][j];
      writer.write(base + ".svg",
                   svg_heatmap(values, state_labels, state_labels,
                               "TPM " + cell_name(config, cell), 2));
    }
  }
}

TpmMap load_tpms(const RunConfig& config) {
  TpmMap tpms;
  for (const CellKey& cell : enumerate_cells(config)) {
    const fs::path path =
        fs::path(config.output_dir) / ("tpm/" + cell_dir(config, cell) + ".meta.json");
    const json meta = read_json_or_throw(path, "estimate");
    tpms.emplace(cell, std::make_pair(tpm_from_meta_json(meta),
                                      meta.at("total_transitions").get<std::uint64_t>()));
  }
  return tpms;
}

// ---------------------------------------------------------------------------
// metrics stage
// ---------------------------------------------------------------------------
MetricsMap compute_metrics(const TpmMap& tpms, const RunConfig& config) {
  std::vector<const std::pair<const CellKey, std::pair<Tpm, std::uint64_t>>*> items;
  for (const auto& kv : tpms) items.push_back(&kv);
  std::vector<ChainMetrics> results(items.size());

  parallel_indexed(items.size(), config.workers, [&](std::size_t i) {
    try {
      results[i] = chain_metrics(items[i]->second.first, config.entropy_log_base);
    } catch (const NumericError& e) {
      throw NumericError("cell " + cell_name(config, items[i]->first) + ": " + e.what());
    }
  });

  MetricsMap metrics;
  for (std::size_t i = 0; i < items.size(); ++i) metrics.emplace(items[i]->first, results[i]);
  return metrics;
}

void write_metrics(const MetricsMap& metrics, const RunConfig& config, ArtifactWriter& writer) {
  const auto sides = config.selected_sides();
  const int n_intervals = int(config.universe.intervals.size());
  const auto tiers = config.universe.tiers_present();

  // wide per-side metrics table
  std::ostringstream table;
  table << "tier,interval";
  for (const char* metric : {"spectral_gap", "relaxation_time", "relaxation_rate_log",
                             "entropy_rate", "mixing_rate"})
    for (Side side : sides) table << "," << metric << "_" << side_name(side);
  table << "\n";
  for (Tier tier : tiers)
    for (int k = 0; k < n_intervals; ++k) {
      table << tier_name(tier) << "," << interval_label(config, k);
      auto emit = [&](auto getter) {
        for (Side side : sides) {
          const auto it = metrics.find({tier, k, side});
          table << ",";
          if (it != metrics.end()) {
            const double v = getter(it->second);
            table << (std::isinf(v) ? "inf" : format_fixed(v, 6));
          }
        }
      };
      emit([](const ChainMetrics& m) { return m.spectral_gap; });
      emit([](const ChainMetrics& m) { return m.relaxation_time; });
      emit([](const ChainMetrics& m) { return m.relaxation_rate_log; });
      emit([](const ChainMetrics& m) { return m.entropy_rate; });
      emit([](const ChainMetrics& m) { return m.mixing_rate; });
      table << "\n";
    }
  writer.write("metrics/metrics.csv", table.str());

  // mean recurrence times, one column pair per state
  std::ostringstream mrt;
  mrt << "tier,interval";
  for (int s = 0; s < kNumStates; ++s)
    for (Side side : sides) mrt << "," << state_name(state_at(s)) << "_" << side_name(side);
  mrt << "\n";
  for (Tier tier : tiers)
    for (int k = 0; k < n_intervals; ++k) {
      mrt << tier_name(tier) << "," << interval_label(config, k);
      for (int s = 0; s < kNumStates; ++s)
        for (Side side : sides) {
          const auto it = metrics.find({tier, k, side});
          mrt << ",";
          if (it != metrics.end()) {
            const double v = it->second.mrt[s];
            mrt << (std::isinf(v) ? "inf" : format_fixed(v, 4));
          }
        }
      mrt << "\n";
    }
  writer.write("metrics/mrt.csv", mrt.str());

  // full-precision records
  json records(json::value_t::array);
  for (const auto& [cell, m] : metrics) {
    json pi(json::value_t::array), mrt_json(json::value_t::array);
    for (int s = 0; s < kNumStates; ++s) {
      pi.push_back(m.pi[s]);
      mrt_json.push_back(std::isinf(m.mrt[s]) ? json() : json(m.mrt[s]));
    }
    // the spectral bound on total variation, with the relaxation time filled
    // in; the constant C is left symbolic
    const std::string tv_bound =
        std::isinf(m.relaxation_time)
            ? "||p^(n) - pi||_TV <= C (no spectral contraction: gap = 0)"
            : "||p^(n) - pi||_TV <= C * exp(-n / " + format_fixed(m.relaxation_time, 6) + ")";
    records.push_back({{"tier", tier_name(cell.tier)},
                       {"interval", interval_label(config, cell.interval)},
                       {"side", side_name(cell.side)},
                       {"spectral_gap", m.spectral_gap},
                       {"lambda2_mod", m.lambda2_mod},
                       {"relaxation_time", std::isinf(m.relaxation_time)
                                               ? json()
                                               : json(m.relaxation_time)},
                       {"relaxation_rate_log", std::isinf(m.relaxation_rate_log)
                                                   ? json()
                                                   : json(m.relaxation_rate_log)},
                       {"mixing_rate", m.mixing_rate},
                       {"entropy_rate", m.entropy_rate},
                       {"entropy_log_base",
                        m.entropy_log_base == kNatBase ? json("e") : json(m.entropy_log_base)},
                       {"stationary_residual", m.stationary_residual},
                       {"tv_mixing_bound", tv_bound},
                       {"pi", pi},
                       {"mrt", mrt_json}});
  }
  writer.write("metrics/metrics.json", records.dump(2) + "\n");

  for (const auto& [cell, m] : metrics) {
    std::ostringstream pi_csv;
    pi_csv << "state,pi\n";
    for (int s = 0; s < kNumStates; ++s)
      pi_csv << state_name(state_at(s)) << "," << format_full(m.pi[s]) << "\n";
    writer.write("stationary/" + cell_dir(config, cell) + ".pi.csv", pi_csv.str());
  }
}

std::map<CellKey, Vector9> load_stationary(const RunConfig& config) {
  std::map<CellKey, Vector9> out;
  for (const CellKey& cell : enumerate_cells(config)) {
    const fs::path path =
        fs::path(config.output_dir) / ("stationary/" + cell_dir(config, cell) + ".pi.csv");
    std::istringstream in(read_file_or_throw(path, "metrics"));
    std::string line;
    std::getline(in, line);  // header
    Vector9 pi{};
    for (int s = 0; s < kNumStates; ++s) {
      if (!std::getline(in, line)) throw DataError("corrupt stationary file: " + path.string());
      const auto comma = line.find(',');
      pi[s] = std::stod(line.substr(comma + 1));
    }
    out.emplace(cell, pi);
  }
  return out;
}

// ---------------------------------------------------------------------------
// embedding + clustering stages (per side)
// ---------------------------------------------------------------------------
struct EmbedKey {
  Tier tier;
  int interval;
};

std::vector<EmbedKey> embed_keys(const RunConfig& config) {
  std::vector<EmbedKey> keys;
  for (Tier tier : config.universe.tiers_present())
    for (int k = 0; k < int(config.universe.intervals.size()); ++k) keys.push_back({tier, k});
  return keys;
}

std::vector<Point> tpm_vectors(const TpmMap& tpms, const RunConfig& config, Side side) {
  std::vector<Point> vectors;
  for (const EmbedKey& key : embed_keys(config)) {
    const auto it = tpms.find({key.tier, key.interval, side});
    if (it == tpms.end())
      throw DataError("embed: missing TPM for cell " +
                      cell_name(config, {key.tier, key.interval, side}));
    const auto flat = vectorize(it->second.first);
    vectors.emplace_back(flat.begin(), flat.end());
  }
  return vectors;
}

struct EmbedOutcome {
  PcaResult pca;
  std::vector<std::array<double, 2>> coords;
};

EmbedOutcome compute_embedding(const TpmMap& tpms, const RunConfig& config, Side side,
                               std::vector<std::string>* warnings) {
  const auto vectors = tpm_vectors(tpms, config, side);
  EmbedOutcome out;
  out.pca = pca_fit(vectors, config.pca_components);
  if (out.pca.model.truncated && warnings)
    warnings->push_back(std::string("pca[") + side_name(side) + "]: requested " +
                        std::to_string(config.pca_components) + " components, data rank is " +
                        std::to_string(out.pca.model.rank));
  TsneParams params = config.tsne;
  params.seed = fnv1a64(std::string_view(side_name(side)), config.tsne.seed);  // decouple the two sides
  out.coords = tsne(out.pca.scores, params);
  return out;
}

void write_embedding(const EmbedOutcome& embed, const RunConfig& config, Side side,
                     ArtifactWriter& writer) {
  const std::string base = std::string("embed/") + side_name(side);
  const auto keys = embed_keys(config);

  json pca_json;
  pca_json["components_requested"] = config.pca_components;
  pca_json["components_used"] = embed.pca.model.components.size();
  pca_json["rank"] = embed.pca.model.rank;
  pca_json["truncated"] = embed.pca.model.truncated;
  pca_json["explained_variance"] = embed.pca.model.explained_variance;
  pca_json["explained_ratio"] = embed.pca.model.explained_ratio;
  double cumulative = 0.0;
  for (double r : embed.pca.model.explained_ratio) cumulative += r;
  pca_json["explained_ratio_total"] = cumulative;
  writer.write(base + "/pca.json", pca_json.dump(2) + "\n");

  std::ostringstream scores;
  scores << "tier,interval";
  for (std::size_t c = 0; c < embed.pca.model.components.size(); ++c) scores << ",s" << c;
  scores << "\n";
  for (std::size_t i = 0; i < keys.size(); ++i) {
    scores << tier_name(keys[i].tier) << "," << interval_label(config, keys[i].interval);
    for (double v : embed.pca.scores[i]) scores << "," << format_full(v);
    scores << "\n";
  }
  writer.write(base + "/scores.csv", scores.str());

  std::ostringstream coords;
  coords << "tier,interval,x,y\n";
  for (std::size_t i = 0; i < keys.size(); ++i)
    coords << tier_name(keys[i].tier) << "," << interval_label(config, keys[i].interval) << ","
           << format_full(embed.coords[i][0]) << "," << format_full(embed.coords[i][1]) << "\n";
  writer.write(base + "/tsne.csv", coords.str());
}

struct ClusterInputs {
  std::vector<Point> space_points;               // clustering space
  std::vector<std::array<double, 2>> vis_coords;  // embedding table coordinates
};

struct ClusterOutcome {
  Dendrogram dendrogram;
  std::vector<int> hier_labels;
  std::vector<int> dbscan_labels;
  double eps_used = 0.0;
};

ClusterOutcome compute_clusters(const ClusterInputs& inputs, const RunConfig& config) {
  ClusterOutcome out;
  out.dendrogram = ward_cluster(inputs.space_points);
  out.hier_labels =
      cut_clusters(out.dendrogram, std::min(config.ward_cut_k, int(inputs.space_points.size())));
  out.eps_used = config.dbscan.eps
                     ? *config.dbscan.eps
                     : dbscan_eps_elbow(inputs.space_points, config.dbscan.min_pts);
  out.dbscan_labels = dbscan(inputs.space_points, out.eps_used, config.dbscan.min_pts);
  return out;
}

void write_clusters(const ClusterOutcome& clusters, const ClusterInputs& inputs,
                    const RunConfig& config, Side side, ArtifactWriter& writer) {
  const std::string base = std::string("embed/") + side_name(side);
  const auto keys = embed_keys(config);

  std::vector<std::string> leaf_names;
  for (const auto& key : keys)
    leaf_names.push_back(std::string(tier_name(key.tier)) + ":" +
                         interval_label(config, key.interval));

  writer.write(base + "/dendrogram.json",
               dendrogram_json(clusters.dendrogram, leaf_names).dump(2) + "\n");
  writer.write(base + "/dendrogram.newick",
               dendrogram_newick(clusters.dendrogram, leaf_names) + "\n");

  json cluster_json;
  cluster_json["space"] = cluster_space_name(config.cluster_space);
  cluster_json["ward_cut_k"] = config.ward_cut_k;
  cluster_json["dbscan_min_pts"] = config.dbscan.min_pts;
  cluster_json["dbscan_eps"] = clusters.eps_used;
  cluster_json["dbscan_eps_source"] = config.dbscan.eps ? "config" : "k_distance_elbow";
  json labels(json::value_t::array);
  for (std::size_t i = 0; i < keys.size(); ++i)
    labels.push_back({{"tier", tier_name(keys[i].tier)},
                      {"interval", interval_label(config, keys[i].interval)},
                      {"hier", clusters.hier_labels[i]},
                      {"dbscan", clusters.dbscan_labels[i]}});
  cluster_json["labels"] = labels;
  writer.write(base + "/cluster.json", cluster_json.dump(2) + "\n");

  std::ostringstream table;
  table << "tier,interval,x,y,hier_label,dbscan_label\n";
  for (std::size_t i = 0; i < keys.size(); ++i)
    table << tier_name(keys[i].tier) << "," << interval_label(config, keys[i].interval) << ","
          << format_full(inputs.vis_coords[i][0]) << "," << format_full(inputs.vis_coords[i][1])
          << "," << clusters.hier_labels[i] << "," << clusters.dbscan_labels[i] << "\n";
  writer.write(base + "/embedding.csv", table.str());
}

std::vector<std::array<double, 2>> load_tsne_coords(const RunConfig& config, Side side) {
  const fs::path path =
      fs::path(config.output_dir) / ("embed/" + std::string(side_name(side)) + "/tsne.csv");
  std::istringstream in(read_file_or_throw(path, "embed"));
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::array<double, 2>> coords;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string tier, interval, x, y;
    std::getline(row, tier, ',');
    std::getline(row, interval, ',');
    std::getline(row, x, ',');
    std::getline(row, y, ',');
    coords.push_back({std::stod(x), std::stod(y)});
  }
  return coords;
}

std::vector<Point> load_scores(const RunConfig& config, Side side) {
  const fs::path path =
      fs::path(config.output_dir) / ("embed/" + std::string(side_name(side)) + "/scores.csv");
  std::istringstream in(read_file_or_throw(path, "embed"));
  std::string line;
  std::getline(in, line);  // header
  std::vector<Point> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');  // tier
    std::getline(row, cell, ',');  // interval
    Point p;
    while (std::getline(row, cell, ',')) p.push_back(std::stod(cell));
    points.push_back(std::move(p));
  }
  return points;
}

ClusterInputs cluster_inputs_from_memory(const EmbedOutcome& embed, const TpmMap& tpms,
                                         const RunConfig& config, Side side) {
  ClusterInputs inputs;
  inputs.vis_coords = embed.coords;
  switch (config.cluster_space) {
    case ClusterSpace::Pca: inputs.space_points = embed.pca.scores; break;
    case ClusterSpace::Tsne:
      for (const auto& c : embed.coords) inputs.space_points.push_back({c[0], c[1]});
      break;
    case ClusterSpace::Raw: inputs.space_points = tpm_vectors(tpms, config, side); break;
  }
  return inputs;
}

// ---------------------------------------------------------------------------
// divergence stage
// ---------------------------------------------------------------------------
void write_jsd(const std::map<CellKey, Vector9>& stationary_by_cell, const RunConfig& config,
               ArtifactWriter& writer) {
  const bool svg = std::find(config.report_formats.begin(), config.report_formats.end(),
                             "svg") != config.report_formats.end();
  const int n_intervals = int(config.universe.intervals.size());
  std::vector<std::string> labels;
  for (int k = 0; k < n_intervals; ++k) labels.push_back(interval_label(config, k));

  for (Side side : config.selected_sides())
    for (Tier tier : config.universe.tiers_present()) {
      std::vector<std::vector<double>> dists;
      for (int k = 0; k < n_intervals; ++k) {
        const auto it = stationary_by_cell.find({tier, k, side});
        if (it == stationary_by_cell.end())
          throw DataError("jsd: missing stationary distribution for cell " +
                          cell_name(config, {tier, k, side}));
        dists.emplace_back(it->second.begin(), it->second.end());
      }
      const auto matrix = jsd_matrix(dists);
      const std::string base =
          "jsd/" + std::string(side_name(side)) + "/" + tier_name(tier) + "/jsd";
      writer.write(base + ".csv", square_matrix_csv(matrix, labels, 4));
      if (svg)
        writer.write(base + ".svg",
                     svg_heatmap(matrix, labels, labels,
                                 std::string("JSD ") + tier_name(tier) + " " + side_name(side),
                                 4));
    }
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------
void write_manifest(const RunManifest& manifest, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ofstream out(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.to_json().dump(2) << "\n";
}

class StageTimer {
 public:
  explicit StageTimer(RunManifest& manifest) : manifest_(manifest) {}
  template <typename Fn>
  void run(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const DataError& e) {
      throw DataError("stage " + name + ": " + e.what());
    } catch (const NumericError& e) {
      throw NumericError("stage " + name + ": " + e.what());
    } catch (const std::exception& e) {
      throw DataError("stage " + name + ": " + e.what());
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    manifest_.stage_seconds.emplace_back(name, elapsed.count());
  }

 private:
  RunManifest& manifest_;
};

}  // namespace

json RunManifest::to_json() const {
  json inputs(json::value_t::array);
  for (const auto& [path, digest] : input_digests)
    inputs.push_back({{"path", path}, {"digest", digest}});
  json files(json::value_t::array);
  for (const auto& a : artifacts)
    files.push_back(
        {{"path", a.path}, {"bytes", a.bytes}, {"digest", a.digest}, {"status", a.status}});
  json cell_json(json::value_t::array);
  for (const auto& c : cells)
    cell_json.push_back({{"cell", c.cell}, {"artifacts", c.artifacts}, {"status", c.status}});
  json stages(json::value_t::array);
  for (const auto& [name, seconds] : stage_seconds)
    stages.push_back({{"stage", name}, {"seconds", seconds}});
  return json{{"config_hash", config_hash},
              {"inputs", inputs},
              {"artifacts", files},
              {"cells", cell_json},
              {"stage_seconds", stages},
              {"warnings", warnings},
              {"complete", complete},
              {"all_reproduced", all_reproduced}};
}

RunManifest run_pipeline(const RunConfig& config) {
  RunManifest manifest;
  manifest.config_hash = fnv_hex(fnv1a64(config.canonical_dump()));
  ArtifactWriter writer(config.output_dir);
  StageTimer timer(manifest);

  try {
    IngestOutcome ingest;
    timer.run("ingest", [&] {
      for (const auto& path : config.inputs)
        manifest.input_digests.emplace_back(path, fnv_hex(fnv1a64_file(path)));
      ingest = compute_ingest(config);
      write_ingest(ingest, config, writer);
    });

    TpmMap tpms;
    timer.run("estimate", [&] {
      tpms = compute_tpms(ingest.cells, config);
      write_tpms(tpms, config, writer);
    });

    MetricsMap metrics;
    timer.run("metrics", [&] {
      metrics = compute_metrics(tpms, config);
      write_metrics(metrics, config, writer);
    });

    timer.run("embed+cluster", [&] {
      for (Side side : config.selected_sides()) {
        const EmbedOutcome embed = compute_embedding(tpms, config, side, &manifest.warnings);
        write_embedding(embed, config, side, writer);
        const ClusterInputs inputs = cluster_inputs_from_memory(embed, tpms, config, side);
        const ClusterOutcome clusters = compute_clusters(inputs, config);
        write_clusters(clusters, inputs, config, side, writer);
      }
    });

    timer.run("jsd", [&] {
      std::map<CellKey, Vector9> stationary_by_cell;
      for (const auto& [cell, m] : metrics) stationary_by_cell.emplace(cell, m.pi);
      write_jsd(stationary_by_cell, config, writer);
    });
  } catch (...) {
    if (!writer.records().empty()) {
      manifest.artifacts = writer.records();
      manifest.complete = false;
      manifest.warnings.push_back("run aborted; artifact tree is incomplete");
      write_manifest(manifest, writer.root());
    }
    throw;
  }

  manifest.artifacts = writer.records();
  manifest.complete = true;
  manifest.all_reproduced =
      !manifest.artifacts.empty() &&
      std::all_of(manifest.artifacts.begin(), manifest.artifacts.end(),
                  [](const ArtifactRecord& a) { return a.status == "reproduced"; });

  // per-cell completeness over the (tier x interval x side) cross-product
  for (const CellKey& cell : enumerate_cells(config)) {
    CellStatus status;
    status.cell = cell_name(config, cell);
    const std::string prefix = cell_dir(config, cell);
    bool has_tpm = false, has_pi = false;
    for (const auto& a : manifest.artifacts) {
      if (a.path.find(prefix) == std::string::npos) continue;
      ++status.artifacts;
      if (a.path == "tpm/" + prefix + ".meta.json") has_tpm = true;
      if (a.path == "stationary/" + prefix + ".pi.csv") has_pi = true;
    }
    status.status = has_tpm && has_pi ? "complete" : "incomplete";
    manifest.cells.push_back(std::move(status));
  }

  write_manifest(manifest, writer.root());
  return manifest;
}

void stage_ingest(const RunConfig& config) {
  ArtifactWriter writer(config.output_dir);
  IngestOutcome outcome = compute_ingest(config);
  write_ingest(outcome, config, writer);
}

void stage_estimate(const RunConfig& config) {
  ArtifactWriter writer(config.output_dir);
  write_tpms(compute_tpms(load_counts(config), config), config, writer);
}

void stage_metrics(const RunConfig& config) {
  ArtifactWriter writer(config.output_dir);
  write_metrics(compute_metrics(load_tpms(config), config), config, writer);
}

void stage_embed(const RunConfig& config) {
  ArtifactWriter writer(config.output_dir);
  const TpmMap tpms = load_tpms(config);
  std::vector<std::string> warnings;
  for (Side side : config.selected_sides())
    write_embedding(compute_embedding(tpms, config, side, &warnings), config, side, writer);
}

void stage_cluster(const RunConfig& config) {
  ArtifactWriter writer(config.output_dir);
  for (Side side : config.selected_sides()) {
    ClusterInputs inputs;
    inputs.vis_coords = load_tsne_coords(config, side);
    switch (config.cluster_space) {
      case ClusterSpace::Pca: inputs.space_points = load_scores(config, side); break;
      case ClusterSpace::Tsne:
        for (const auto& c : inputs.vis_coords) inputs.space_points.push_back({c[0], c[1]});
        break;
      case ClusterSpace::Raw:
        inputs.space_points = tpm_vectors(load_tpms(config), config, side);
        break;
    }
    write_clusters(compute_clusters(inputs, config), inputs, config, side, writer);
  }
}

void stage_jsd(const RunConfig& config) {
  ArtifactWriter writer(config.output_dir);
  write_jsd(load_stationary(config), config, writer);
}

std::string pipeline_report_text(const RunConfig& config) {
  const fs::path root = config.output_dir;
  const std::vector<std::string> probes = {"manifest.json", "ingest/report.txt",
                                           "gtest/report.txt", "metrics/metrics.csv"};
  bool any = false;
  for (const auto& rel : probes)
    if (fs::exists(root / rel)) any = true;
  if (!any) {
    std::string message = "no pipeline artifacts found under " + root.string() +
                          "; expected at least one of:";
    for (const auto& rel : probes) message += "\n  " + (root / rel).string();
    throw DataError(message);
  }

  std::ostringstream os;
  os << "pipeline report for " << root.string() << "\n\n";
  if (fs::exists(root / "manifest.json")) {
    const json manifest = read_json_or_throw(root / "manifest.json", "run");
    os << "manifest: " << manifest.at("artifacts").size() << " artifacts, complete="
       << (manifest.at("complete").get<bool>() ? "true" : "false") << ", config_hash="
       << manifest.at("config_hash").get<std::string>() << "\n";
    for (const auto& [stage, seconds] : manifest.at("stage_seconds").items()) {
      (void)stage;
      os << "  stage " << seconds.at("stage").get<std::string>() << ": "
         << format_fixed(seconds.at("seconds").get<double>(), 3) << " s\n";
    }
    for (const auto& w : manifest.at("warnings"))
      os << "  warning: " << w.get<std::string>() << "\n";
    os << "\n";
  } else {
    os << "manifest: missing (stages were run individually)\n\n";
  }
  for (const auto& rel : {"ingest/report.txt", "gtest/report.txt"}) {
    if (!fs::exists(root / rel)) {
      os << rel << ": missing\n\n";
      continue;
    }
    std::ifstream in(root / rel);
    os << in.rdbuf() << "\n";
  }
  if (fs::exists(root / "metrics/metrics.csv")) {
    os << "metrics/metrics.csv:\n";
    std::ifstream in(root / "metrics/metrics.csv");
    os << in.rdbuf() << "\n";
  }
  for (Side side : config.selected_sides()) {
    const fs::path cluster_path = root / ("embed/" + std::string(side_name(side))) / "cluster.json";
    if (!fs::exists(cluster_path)) continue;
    const json cluster = read_json_or_throw(cluster_path, "cluster");
    os << "clusters (" << side_name(side) << ", space=" << cluster.at("space").get<std::string>()
       << ", eps=" << format_fixed(cluster.at("dbscan_eps").get<double>(), 4) << "):\n";
    for (const auto& label : cluster.at("labels"))
      os << "  " << label.at("tier").get<std::string>() << ":"
         << label.at("interval").get<std::string>() << " hier=" << label.at("hier").get<int>()
         << " dbscan=" << label.at("dbscan").get<int>() << "\n";
    os << "\n";
  }
  return os.str();
}

}  // namespace lobmc
