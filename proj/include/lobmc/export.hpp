#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lobmc/dtmc.hpp"
#include "lobmc/geometry.hpp"
#include "lobmc/metrics.hpp"

namespace lobmc {

// Numeric formatting helpers. Fixed-decimal output keeps artifact diffs
// meaningful; %.17g round-trips doubles exactly.
std::string format_fixed(double value, int decimals);
std::string format_full(double value);  // "inf" for infinities

// 9x9 matrix as delimiter-separated text with S1..S9 header row/column.
std::string tpm_csv(const Matrix9& p, int decimals = 6);
Matrix9 parse_tpm_csv(const std::string& text);  // throws DataError

// Labeled square matrix (JSD tables and friends).
std::string square_matrix_csv(const std::vector<std::vector<double>>& values,
                              const std::vector<std::string>& labels, int decimals);

// Sidecar with full-precision probabilities and estimation metadata.
nlohmann::json tpm_meta_json(const Tpm& tpm, std::uint64_t total_transitions);
Tpm tpm_from_meta_json(const nlohmann::json& j);

// Self-contained SVG heatmap: sequential color ramp, per-cell value labels.
std::string svg_heatmap(const std::vector<std::vector<double>>& values,
                        const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& title,
                        int decimals);

// Dendrogram renderings: merge list JSON and Newick text with branch lengths
// derived from merge heights.
nlohmann::json dendrogram_json(const Dendrogram& dendro, const std::vector<std::string>& leaf_names);
std::string dendrogram_newick(const Dendrogram& dendro, const std::vector<std::string>& leaf_names);

}  // namespace lobmc
