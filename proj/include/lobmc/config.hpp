#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lobmc/geometry.hpp"
#include "lobmc/metrics.hpp"
#include "lobmc/tickstore.hpp"

namespace lobmc {

enum class Aggregation : std::uint8_t { Pooled, Averaged };
const char* aggregation_name(Aggregation a);

enum class ClusterSpace : std::uint8_t { Pca, Tsne, Raw };
const char* cluster_space_name(ClusterSpace c);

enum class SideSelection : std::uint8_t { Ask, Bid, Both };

struct DbscanConfig {
  int min_pts = 3;
  std::optional<double> eps;  // absent -> k-distance elbow (k = min_pts)
};

struct RunConfig {
  std::vector<std::string> inputs;
  SchemaConfig schema;
  UniverseConfig universe = UniverseConfig::study_defaults();
  SideSelection sides = SideSelection::Both;
  Aggregation aggregation = Aggregation::Pooled;
  double smoothing_alpha = 0.0;
  double entropy_log_base = kNatBase;
  int pca_components = 8;
  TsneParams tsne;
  DbscanConfig dbscan;
  ClusterSpace cluster_space = ClusterSpace::Pca;
  int ward_cut_k = 3;
  bool gtest_pooled = false;
  int acf_max_lag = 10;
  bool acf_on_states = false;
  bool dump_sequences = false;
  std::string output_dir = "out";
  std::vector<std::string> report_formats = {"csv", "json", "svg"};
  int workers = 1;

  std::vector<Side> selected_sides() const;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_json_file(const std::string& path);
  nlohmann::json to_json() const;
  std::string canonical_dump() const;  // stable serialization used for hashing
};

// 64-bit FNV-1a; used for config hashes and input digests (identification,
// not cryptography).
std::uint64_t fnv1a64_bytes(const void* data, std::size_t size,
                            std::uint64_t seed = 14695981039346656037ULL);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 14695981039346656037ULL);
std::string fnv_hex(std::uint64_t value);
std::uint64_t fnv1a64_file(const std::string& path);  // streaming, throws DataError

}  // namespace lobmc
