#include "lobmc/dtmc.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace lobmc {

Tpm Tpm::identity() {
  Tpm t;
  for (int i = 0; i < kNumStates; ++i) t.p[i][i] = 1.0;
  t.row_support.fill(false);
  return t;
}

Tpm Tpm::uniform() {
  Tpm t;
  for (auto& row : t.p) row.fill(1.0 / kNumStates);
  t.row_support.fill(true);
  return t;
}

Tpm Tpm::from_matrix(const Matrix9& p) {
  Tpm t;
  t.p = p;
  t.row_support.fill(true);
  validate_tpm(t);
  return t;
}

void validate_tpm(const Tpm& tpm, double tol) {
  for (int i = 0; i < kNumStates; ++i) {
    double sum = 0.0;
    for (int j = 0; j < kNumStates; ++j) {
      const double v = tpm.p[i][j];
      if (!(v >= 0.0 && v <= 1.0 + tol)) {
        std::ostringstream os;
        os << "tpm row " << i + 1 << " entry " << j + 1 << " out of [0,1]: " << v;
        throw NumericError(os.str());
      }
      sum += v;
    }
    if (std::fabs(sum - 1.0) > tol) {
      std::ostringstream os;
      os << "tpm row " << i + 1 << " sums to " << sum;
      throw NumericError(os.str());
    }
  }
}

Tpm estimate_tpm(const TransitionCounts& counts, double smoothing_alpha) {
  if (smoothing_alpha < 0.0) throw std::invalid_argument("smoothing alpha must be >= 0");
  Tpm tpm;
  for (int i = 0; i < kNumStates; ++i) {
    const std::uint64_t raw_total = counts.row_total(i);
    tpm.row_support[i] = raw_total > 0;
    const double denom = double(raw_total) + smoothing_alpha * kNumStates;
    if (denom <= 0.0) {
      tpm.p[i][i] = 1.0;  // self-loop convention for unobserved rows
      continue;
    }
    for (int j = 0; j < kNumStates; ++j)
      tpm.p[i][j] = (double(counts.n[i][j]) + smoothing_alpha) / denom;
  }
  return tpm;
}

TransitionCounts pool_counts(std::span<const TransitionCounts> parts) {
  TransitionCounts pooled;
  for (const auto& part : parts) pooled.merge(part);
  return pooled;
}

Tpm average_tpms(std::span<const Tpm> tpms) {
  if (tpms.empty()) throw std::invalid_argument("average_tpms: empty input");
  Tpm mean;
  mean.row_support.fill(false);
  for (const auto& t : tpms) {
    for (int i = 0; i < kNumStates; ++i) {
      mean.row_support[i] = mean.row_support[i] || t.row_support[i];
      for (int j = 0; j < kNumStates; ++j) mean.p[i][j] += t.p[i][j];
    }
  }
  const double inv = 1.0 / double(tpms.size());
  for (auto& row : mean.p)
    for (auto& v : row) v *= inv;
  return mean;
}

namespace {

// Iterative Tarjan SCC on the 9-node transition digraph.
struct SccFinder {
  const Matrix9& p;
  std::array<int, kNumStates> idx{}, low{}, comp{};
  std::array<bool, kNumStates> on_stack{};
  std::vector<int> stack;
  int counter = 0;
  int n_comps = 0;

  explicit SccFinder(const Matrix9& m) : p(m) {
    idx.fill(-1);
    comp.fill(-1);
  }

  void run(int root) {
    struct Frame {
      int v;
      int next_child;
    };
    std::vector<Frame> frames{{root, 0}};
    idx[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;

    while (!frames.empty()) {
      auto& [v, child] = frames.back();
      bool descended = false;
      while (child < kNumStates) {
        const int w = child++;
        if (p[v][w] <= 0.0) continue;
        if (idx[w] == -1) {
          idx[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], idx[w]);
      }
      if (descended) continue;
      if (low[v] == idx[v]) {
        while (true) {
          const int w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = n_comps;
          if (w == v) break;
        }
        ++n_comps;
      }
      const int finished = v;
      frames.pop_back();
      if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[finished]);
    }
  }
};

}  // namespace

ChainStructure chain_structure(const Tpm& tpm) {
  SccFinder scc(tpm.p);
  for (int v = 0; v < kNumStates; ++v)
    if (scc.idx[v] == -1) scc.run(v);

  ChainStructure cs;
  cs.classes.assign(scc.n_comps, {});
  for (int v = 0; v < kNumStates; ++v) cs.classes[scc.comp[v]].push_back(v);
  for (auto& cls : cs.classes) std::sort(cls.begin(), cls.end());
  // canonical order: by smallest member
  std::sort(cs.classes.begin(), cs.classes.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });

  for (int c = 0; c < int(cs.classes.size()); ++c) {
    bool closed = true;
    for (int v : cs.classes[c]) {
      for (int w = 0; w < kNumStates && closed; ++w) {
        if (tpm.p[v][w] <= 0.0) continue;
        const bool inside =
            std::binary_search(cs.classes[c].begin(), cs.classes[c].end(), w);
        if (!inside) closed = false;
      }
      if (!closed) break;
    }
    if (closed) cs.closed_classes.push_back(c);
  }
  cs.is_irreducible = cs.classes.size() == 1;
  return cs;
}

namespace {

std::string class_list(const ChainStructure& cs, const std::vector<int>& ids) {
  std::ostringstream os;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    os << (k ? ", {" : "{");
    const auto& cls = cs.classes[ids[k]];
    for (std::size_t m = 0; m < cls.size(); ++m)
      os << (m ? "," : "") << state_name(state_at(cls[m]));
    os << "}";
  }
  return os.str();
}

}  // namespace

StationaryDist stationary(const Tpm& tpm) {
  validate_tpm(tpm, 1e-9);
  const ChainStructure cs = chain_structure(tpm);

  // Unsupported self-loop singletons are artifacts of the zero-count
  // convention, not observed dynamics; they do not count as closed classes.
  std::vector<int> genuine;
  for (int c : cs.closed_classes) {
    const auto& cls = cs.classes[c];
    if (cls.size() == 1 && !tpm.row_support[cls.front()]) continue;
    genuine.push_back(c);
  }
  if (genuine.empty())
    throw NumericError("stationary: no supported closed communicating class");
  if (genuine.size() > 1)
    throw NumericError("stationary: multiple closed communicating classes: " +
                       class_list(cs, genuine));

  const auto& cls = cs.classes[genuine.front()];
  const int m = int(cls.size());

  // pi' (P - I) = 0 with one equation replaced by normalization, solved on the
  // closed class. 9x9 at most, so a direct dense solve gives machine-precision
  // residuals.
  Eigen::MatrixXd a(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c)
      a(r, c) = tpm.p[cls[c]][cls[r]] - (r == c ? 1.0 : 0.0);  // (P^T - I)
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  a.row(0).setOnes();
  b(0) = 1.0;

  Eigen::VectorXd x = a.fullPivLu().solve(b);

  StationaryDist dist;
  dist.pi.fill(0.0);
  double sum = 0.0;
  for (int k = 0; k < m; ++k) {
    const double v = x(k) < 0.0 && x(k) > -1e-13 ? 0.0 : x(k);
    if (v < 0.0) throw NumericError("stationary: negative probability in solution");
    dist.pi[cls[k]] = v;
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw NumericError("stationary: solution does not normalize");
  for (int k = 0; k < m; ++k) dist.pi[cls[k]] /= sum;

  double residual = 0.0;
  for (int j = 0; j < kNumStates; ++j) {
    double acc = 0.0;
    for (int i = 0; i < kNumStates; ++i) acc += dist.pi[i] * tpm.p[i][j];
    residual = std::max(residual, std::fabs(acc - dist.pi[j]));
  }
  dist.residual = residual;
  return dist;
}

namespace {

inline double uniform01(std::mt19937_64& gen) {
  return double(gen() >> 11) * 0x1.0p-53;  // [0, 1), identical on all platforms
}

inline int sample_index(const Vector9& weights, double u) {
  double acc = 0.0;
  for (int j = 0; j < kNumStates; ++j) {
    acc += weights[j];
    if (u < acc) return j;
  }
  return kNumStates - 1;  // guard against cumulative rounding
}

}  // namespace

std::vector<StateId> simulate(const Tpm& tpm, const Vector9& initial_dist,
                              std::size_t n_steps, std::uint64_t seed) {
  validate_tpm(tpm, 1e-9);
  double init_sum = 0.0;
  for (double v : initial_dist) {
    if (v < 0.0) throw std::invalid_argument("simulate: negative initial probability");
    init_sum += v;
  }
  if (std::fabs(init_sum - 1.0) > 1e-9)
    throw std::invalid_argument("simulate: initial distribution must sum to 1");

  std::vector<StateId> states;
  if (n_steps == 0) return states;
  states.reserve(n_steps);

  std::mt19937_64 gen(seed);
  int current = sample_index(initial_dist, uniform01(gen));
  states.push_back(state_at(current));
  for (std::size_t k = 1; k < n_steps; ++k) {
    current = sample_index(tpm.p[current], uniform01(gen));
    states.push_back(state_at(current));
  }
  return states;
}

}  // namespace lobmc
