#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lobmc/config.hpp"

namespace lobmc {

struct CellKey {
  Tier tier = Tier::HMC;
  int interval = 0;
  Side side = Side::Ask;

  auto operator<=>(const CellKey&) const = default;
};

struct ArtifactRecord {
  std::string path;  // relative to the output directory
  std::uint64_t bytes = 0;
  std::string digest;  // fnv1a64 hex
  std::string status;  // "written" or "reproduced"
};

struct CellStatus {
  std::string cell;  // "<tier>/<interval>/<side>"
  int artifacts = 0;
  std::string status;  // "complete" or "incomplete"
};

struct RunManifest {
  std::string config_hash;
  std::vector<std::pair<std::string, std::string>> input_digests;  // path, digest
  std::vector<ArtifactRecord> artifacts;
  std::vector<CellStatus> cells;  // one entry per (tier, interval, side)
  std::vector<std::pair<std::string, double>> stage_seconds;
  std::vector<std::string> warnings;
  bool complete = false;
  bool all_reproduced = false;  // true when every artifact matched byte-for-byte

  nlohmann::json to_json() const;
};

// Full ingest -> discretize -> G-test -> estimate -> metrics / embed+cluster /
// stationary+JSD pass with all artifacts written under config.output_dir.
// Throws DataError / NumericError with the failing stage and cell in the
// message; a partial manifest is written when any artifact already exists.
RunManifest run_pipeline(const RunConfig& config);

// Single stages operating against the artifact tree on disk; each loads what
// the previous stage wrote and fails with the expected path when missing.
void stage_ingest(const RunConfig& config);
void stage_estimate(const RunConfig& config);
void stage_metrics(const RunConfig& config);
void stage_embed(const RunConfig& config);
void stage_cluster(const RunConfig& config);
void stage_jsd(const RunConfig& config);

// Human-readable summary of an artifact tree; throws DataError naming the
// missing inputs when none of the expected artifacts exist.
std::string pipeline_report_text(const RunConfig& config);

}  // namespace lobmc
