#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lobmc/chain.hpp"
#include "lobmc/divergence.hpp"
#include "lobmc/dtmc.hpp"
#include "lobmc/geometry.hpp"
#include "lobmc/independence.hpp"
#include "lobmc/metrics.hpp"
#include "lobmc/simulate_fixture.hpp"
#include "lobmc/tickstore.hpp"

namespace py = pybind11;
using namespace lobmc;

namespace {

using PyMatrix = std::vector<std::vector<double>>;

Matrix9 matrix_from_py(const PyMatrix& rows) {
  if (rows.size() != kNumStates) throw std::invalid_argument("matrix must be 9x9");
  Matrix9 p{};
  for (int i = 0; i < kNumStates; ++i) {
    if (rows[i].size() != kNumStates) throw std::invalid_argument("matrix must be 9x9");
    for (int j = 0; j < kNumStates; ++j) p[i][j] = rows[i][j];
  }
  return p;
}

PyMatrix matrix_to_py(const Matrix9& p) {
  PyMatrix rows(kNumStates, std::vector<double>(kNumStates));
  for (int i = 0; i < kNumStates; ++i)
    for (int j = 0; j < kNumStates; ++j) rows[i][j] = p[i][j];
  return rows;
}

Vector9 vector_from_py(const std::vector<double>& v) {
  if (v.size() != kNumStates) throw std::invalid_argument("vector must have 9 entries");
  Vector9 out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

// Support flags do not cross the language boundary; exact unit self-loop rows
// are taken to be the unobserved-row convention rather than real dynamics.
Tpm tpm_from_py_inferring_support(const PyMatrix& rows) {
  Tpm tpm = Tpm::from_matrix(matrix_from_py(rows));
  for (int i = 0; i < kNumStates; ++i) {
    bool self_loop = tpm.p[i][i] == 1.0;
    for (int j = 0; j < kNumStates && self_loop; ++j)
      if (j != i && tpm.p[i][j] != 0.0) self_loop = false;
    tpm.row_support[i] = !self_loop;
  }
  return tpm;
}

TransitionCounts counts_from_py(const std::vector<std::vector<std::uint64_t>>& rows) {
  if (rows.size() != kNumStates) throw std::invalid_argument("counts must be 9x9");
  TransitionCounts counts;
  for (int i = 0; i < kNumStates; ++i) {
    if (rows[i].size() != kNumStates) throw std::invalid_argument("counts must be 9x9");
    for (int j = 0; j < kNumStates; ++j)
      if (rows[i][j]) counts.add(state_at(i), state_at(j), rows[i][j]);
  }
  return counts;
}

std::vector<int> states_to_py(const std::vector<StateId>& states) {
  std::vector<int> out;
  out.reserve(states.size());
  for (StateId s : states) out.push_back(index_of(s) + 1);  // 1-based S1..S9
  return out;
}

std::vector<StateId> states_from_py(const std::vector<int>& states) {
  std::vector<StateId> out;
  out.reserve(states.size());
  for (int s : states) out.push_back(state_at(s - 1));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Markov chain analytics for limit order price changes";

  // chain construction
  m.def("pct_change", &pct_change, py::arg("prev_price"), py::arg("curr_price"));
  m.def(
      "classify",
      [](double change) { return index_of(classify(change)) + 1; },
      py::arg("change_pct"), "state index 1..9 for a percent change");
  m.def(
      "classify_letter",
      [](double change) { return std::string(1, state_letter(classify(change))); },
      py::arg("change_pct"));
  m.def(
      "build_sequence",
      [](const std::vector<double>& prices) { return states_to_py(build_sequence(prices)); },
      py::arg("prices"));
  m.def(
      "count_transitions",
      [](const std::vector<int>& states) {
        const auto counts = count_transitions(states_from_py(states));
        std::vector<std::vector<std::uint64_t>> rows(kNumStates,
                                                     std::vector<std::uint64_t>(kNumStates));
        for (int i = 0; i < kNumStates; ++i)
          for (int j = 0; j < kNumStates; ++j) rows[i][j] = counts.n[i][j];
        return rows;
      },
      py::arg("states"));
  m.def(
      "state_histogram",
      [](const std::vector<int>& states) {
        const auto hist = state_histogram(states_from_py(states));
        return std::vector<std::uint64_t>(hist.begin(), hist.end());
      },
      py::arg("states"));

  // independence
  m.def("chi2_sf", &chi2_sf, py::arg("x"), py::arg("df"));
  m.def(
      "g_test",
      [](const std::vector<std::vector<std::uint64_t>>& observed) {
        const GTestResult r = g_test(observed);
        py::dict out;
        out["g"] = r.g;
        out["df"] = r.df;
        out["p_value"] = r.p_value;
        out["dropped_rows"] = r.dropped_rows;
        out["dropped_cols"] = r.dropped_cols;
        out["reject"] = r.reject;
        out["conclusive"] = r.conclusive;
        return out;
      },
      py::arg("observed"));
  m.def(
      "acf",
      [](const std::vector<double>& series, int max_lag) {
        const AcfResult r = acf(series, max_lag);
        py::dict out;
        out["lags"] = r.lags;
        out["values"] = r.values;
        out["threshold"] = r.threshold;
        out["threshold_conventional"] = r.threshold_conventional;
        out["n"] = r.n;
        out["valid"] = r.valid;
        return out;
      },
      py::arg("series"), py::arg("max_lag"));

  // estimation and long-run behavior
  m.def(
      "estimate_tpm",
      [](const std::vector<std::vector<std::uint64_t>>& counts, double alpha) {
        return matrix_to_py(estimate_tpm(counts_from_py(counts), alpha).p);
      },
      py::arg("counts"), py::arg("smoothing_alpha") = 0.0);
  m.def(
      "stationary",
      [](const PyMatrix& p) {
        const auto dist = stationary(tpm_from_py_inferring_support(p));
        return std::vector<double>(dist.pi.begin(), dist.pi.end());
      },
      py::arg("tpm"),
      "stationary distribution; unit self-loop rows are treated as the\n"
      "unobserved-row convention and excluded from the closed-class check");
  m.def(
      "simulate",
      [](const PyMatrix& p, const std::vector<double>& initial, std::size_t n_steps,
         std::uint64_t seed) {
        return states_to_py(
            simulate(Tpm::from_matrix(matrix_from_py(p)), vector_from_py(initial), n_steps, seed));
      },
      py::arg("tpm"), py::arg("initial_dist"), py::arg("n_steps"), py::arg("seed"));

  // per-matrix metrics
  m.def(
      "eigen_moduli",
      [](const PyMatrix& p) {
        const auto moduli = eigen_moduli(Tpm::from_matrix(matrix_from_py(p)));
        return std::vector<double>(moduli.begin(), moduli.end());
      },
      py::arg("tpm"));
  m.def(
      "chain_metrics",
      [](const PyMatrix& p, double log_base) {
        const ChainMetrics cm = chain_metrics(tpm_from_py_inferring_support(p), log_base);
        py::dict out;
        out["spectral_gap"] = cm.spectral_gap;
        out["lambda2_mod"] = cm.lambda2_mod;
        out["relaxation_time"] = cm.relaxation_time;
        out["relaxation_rate_log"] = cm.relaxation_rate_log;
        out["mixing_rate"] = cm.mixing_rate;
        out["entropy_rate"] = cm.entropy_rate;
        out["pi"] = std::vector<double>(cm.pi.begin(), cm.pi.end());
        out["mrt"] = std::vector<double>(cm.mrt.begin(), cm.mrt.end());
        out["stationary_residual"] = cm.stationary_residual;
        return out;
      },
      py::arg("tpm"), py::arg("log_base") = kNatBase);
  m.def(
      "mean_recurrence",
      [](const std::vector<double>& pi) {
        const auto mrt = mean_recurrence(vector_from_py(pi));
        return std::vector<double>(mrt.begin(), mrt.end());
      },
      py::arg("pi"));

  // divergences
  m.def("kld", &kld, py::arg("u"), py::arg("v"), py::arg("base") = 2.0);
  m.def("jsd", &jsd, py::arg("p"), py::arg("q"));
  m.def("jsd_matrix", &jsd_matrix, py::arg("distributions"));

  // geometry
  m.def(
      "vectorize",
      [](const PyMatrix& p) {
        const auto v = vectorize(Tpm::from_matrix(matrix_from_py(p)));
        return std::vector<double>(v.begin(), v.end());
      },
      py::arg("tpm"));
  m.def(
      "pca_fit",
      [](const std::vector<Point>& rows, int k) {
        const PcaResult r = pca_fit(rows, k);
        py::dict out;
        out["mean"] = r.model.mean;
        out["components"] = r.model.components;
        out["explained_variance"] = r.model.explained_variance;
        out["explained_ratio"] = r.model.explained_ratio;
        out["rank"] = r.model.rank;
        out["truncated"] = r.model.truncated;
        out["scores"] = r.scores;
        return out;
      },
      py::arg("rows"), py::arg("k"));
  m.def(
      "tsne",
      [](const std::vector<Point>& rows, double perplexity, int iterations, double learning_rate,
         std::uint64_t seed) {
        TsneParams params;
        params.perplexity = perplexity;
        params.iterations = iterations;
        params.learning_rate = learning_rate;
        params.seed = seed;
        std::vector<std::vector<double>> out;
        for (const auto& p : tsne(rows, params)) out.push_back({p[0], p[1]});
        return out;
      },
      py::arg("rows"), py::arg("perplexity") = 5.0, py::arg("iterations") = 1000,
      py::arg("learning_rate") = 10.0, py::arg("seed") = 1);
  m.def(
      "ward_cluster",
      [](const std::vector<Point>& rows) {
        const Dendrogram d = ward_cluster(rows);
        std::vector<py::tuple> merges;
        for (const auto& mg : d.merges) merges.push_back(py::make_tuple(mg.a, mg.b, mg.height, mg.size));
        return merges;
      },
      py::arg("rows"));
  m.def(
      "cut_clusters",
      [](const std::vector<Point>& rows, int k) { return cut_clusters(ward_cluster(rows), k); },
      py::arg("rows"), py::arg("k"));
  m.def("dbscan", &dbscan, py::arg("rows"), py::arg("eps"), py::arg("min_pts"));

  // tick plumbing helpers
  m.def(
      "assign_interval",
      [](const std::string& timestamp) {
        const auto table = default_intervals();
        const auto idx = assign_interval(parse_time_of_day_ms(timestamp), table);
        return idx ? py::object(py::str(table[std::size_t(*idx)].label)) : py::object(py::none());
      },
      py::arg("timestamp"), "interval label for a HH:MM:SS.mmm timestamp, or None");
  m.def(
      "plant_tpm",
      [](double p55, double extreme_scale) { return matrix_to_py(plant_tpm(p55, extreme_scale).p); },
      py::arg("p55"), py::arg("extreme_scale") = 1.0);

  m.attr("N_STATES") = kNumStates;
  m.attr("__version__") = "0.1.0";
}
