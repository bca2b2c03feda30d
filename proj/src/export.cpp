#include "lobmc/export.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace lobmc {

using nlohmann::json;

std::string format_fixed(double value, int decimals) {
  if (value == 0.0) value = 0.0;  // normalize negative zero
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

std::string format_full(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string tpm_csv(const Matrix9& p, int decimals) {
  std::ostringstream os;
  for (int j = 0; j < kNumStates; ++j) os << "," << state_name(state_at(j));
  os << "\n";
  for (int i = 0; i < kNumStates; ++i) {
    os << state_name(state_at(i));
    for (int j = 0; j < kNumStates; ++j) os << "," << format_fixed(p[i][j], decimals);
    os << "\n";
  }
  return os.str();
}

Matrix9 parse_tpm_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("tpm csv: missing header");
  Matrix9 p{};
  for (int i = 0; i < kNumStates; ++i) {
    if (!std::getline(in, line)) throw DataError("tpm csv: truncated matrix");
    std::istringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ',')) throw DataError("tpm csv: missing row label");
    for (int j = 0; j < kNumStates; ++j) {
      if (!std::getline(row, cell, ',')) throw DataError("tpm csv: short row");
      p[i][j] = std::stod(cell);
    }
  }
  return p;
}

std::string square_matrix_csv(const std::vector<std::vector<double>>& values,
                              const std::vector<std::string>& labels, int decimals) {
  std::ostringstream os;
  for (const auto& label : labels) os << "," << label;
  os << "\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    os << labels.at(i);
    for (std::size_t j = 0; j < values[i].size(); ++j)
      os << "," << format_fixed(values[i][j], decimals);
    os << "\n";
  }
  return os.str();
}

json tpm_meta_json(const Tpm& tpm, std::uint64_t total_transitions) {
  json rows(json::value_t::array);
  for (int i = 0; i < kNumStates; ++i) {
    json row(json::value_t::array);
    for (int j = 0; j < kNumStates; ++j) row.push_back(tpm.p[i][j]);
    rows.push_back(std::move(row));
  }
  json support(json::value_t::array);
  json degenerate(json::value_t::array);
  for (int i = 0; i < kNumStates; ++i) {
    support.push_back(tpm.row_support[i]);
    if (!tpm.row_support[i]) degenerate.push_back(state_name(state_at(i)));
  }
  return json{{"tier", tpm.provenance.tier},
              {"interval", tpm.provenance.interval},
              {"side", tpm.provenance.side},
              {"aggregation", tpm.provenance.aggregation},
              {"total_transitions", total_transitions},
              {"row_support", support},
              {"degenerate_rows", degenerate},
              {"p_full", rows}};
}

Tpm tpm_from_meta_json(const json& j) {
  Tpm tpm;
  const auto& rows = j.at("p_full");
  for (int i = 0; i < kNumStates; ++i)
    for (int jj = 0; jj < kNumStates; ++jj) tpm.p[i][jj] = rows.at(i).at(jj).get<double>();
  const auto& support = j.at("row_support");
  for (int i = 0; i < kNumStates; ++i) tpm.row_support[i] = support.at(i).get<bool>();
  tpm.provenance.tier = j.value("tier", "");
  tpm.provenance.interval = j.value("interval", "");
  tpm.provenance.side = j.value("side", "");
  tpm.provenance.aggregation = j.value("aggregation", "");
  return tpm;
}

namespace {

// white -> deep blue ramp
std::string ramp_color(double t) {
  if (!(t >= 0.0)) t = 0.0;
  if (t > 1.0) t = 1.0;
  const int r = int(std::lround(255.0 - 205.0 * t));
  const int g = int(std::lround(255.0 - 175.0 * t));
  const int b = int(std::lround(255.0 - 75.0 * t));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string svg_heatmap(const std::vector<std::vector<double>>& values,
                        const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& title,
                        int decimals) {
  const int rows = int(values.size());
  const int cols = rows > 0 ? int(values.front().size()) : 0;
  const int cell = 46, left = 56, top = 42, pad = 10;
  const int width = left + cols * cell + pad;
  const int height = top + rows * cell + pad;

  double vmax = 0.0;
  for (const auto& row : values)
    for (double v : row) vmax = std::max(vmax, std::fabs(v));
  if (vmax <= 0.0) vmax = 1.0;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"monospace\" font-size=\"10\">\n";
  os << "<text x=\"" << left << "\" y=\"16\" font-size=\"12\">" << title << "</text>\n";
  for (int j = 0; j < cols; ++j)
    os << "<text x=\"" << left + j * cell + cell / 2 << "\" y=\"" << top - 6
       << "\" text-anchor=\"middle\">" << col_labels.at(j) << "</text>\n";
  for (int i = 0; i < rows; ++i) {
    os << "<text x=\"" << left - 6 << "\" y=\"" << top + i * cell + cell / 2 + 4
       << "\" text-anchor=\"end\">" << row_labels.at(i) << "</text>\n";
    for (int j = 0; j < cols; ++j) {
      const double v = values[i][j];
      os << "<rect x=\"" << left + j * cell << "\" y=\"" << top + i * cell << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"" << ramp_color(v / vmax)
         << "\" stroke=\"#888\"/>\n";
      os << "<text x=\"" << left + j * cell + cell / 2 << "\" y=\"" << top + i * cell + cell / 2 + 4
         << "\" text-anchor=\"middle\" fill=\"" << (v / vmax > 0.55 ? "#ffffff" : "#000000")
         << "\">" << format_fixed(v, decimals) << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

json dendrogram_json(const Dendrogram& dendro, const std::vector<std::string>& leaf_names) {
  json merges(json::value_t::array);
  for (const auto& m : dendro.merges)
    merges.push_back({{"a", m.a}, {"b", m.b}, {"height", m.height}, {"size", m.size}});
  json leaves(json::value_t::array);
  for (const auto& name : leaf_names) leaves.push_back(name);
  return json{{"n_leaves", dendro.n_leaves}, {"leaves", leaves}, {"merges", merges}};
}

std::string dendrogram_newick(const Dendrogram& dendro, const std::vector<std::string>& leaf_names) {
  const int n = dendro.n_leaves;
  std::vector<std::string> repr(n + dendro.merges.size());
  std::vector<double> height(n + dendro.merges.size(), 0.0);
  for (int i = 0; i < n; ++i) repr[i] = leaf_names.at(i);
  for (std::size_t m = 0; m < dendro.merges.size(); ++m) {
    const auto& mg = dendro.merges[m];
    const int id = n + int(m);
    height[id] = mg.height;
    std::ostringstream os;
    os << "(" << repr[mg.a] << ":" << format_fixed(mg.height - height[mg.a], 6) << ","
       << repr[mg.b] << ":" << format_fixed(mg.height - height[mg.b], 6) << ")";
    repr[id] = os.str();
  }
  return repr.back() + ";";
}

}  // namespace lobmc
