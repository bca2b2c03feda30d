#include "lobmc/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <queue>
#include <random>
#include <stdexcept>

namespace lobmc {

std::array<double, kNumStates * kNumStates> vectorize(const Tpm& tpm) {
  std::array<double, kNumStates * kNumStates> v{};
  for (int i = 0; i < kNumStates; ++i)
    for (int j = 0; j < kNumStates; ++j) v[kNumStates * i + j] = tpm.p[i][j];
  return v;
}

Tpm devectorize(const std::array<double, kNumStates * kNumStates>& v) {
  Matrix9 p{};
  for (int i = 0; i < kNumStates; ++i)
    for (int j = 0; j < kNumStates; ++j) p[i][j] = v[kNumStates * i + j];
  return Tpm::from_matrix(p);
}

namespace {

Eigen::MatrixXd to_matrix(const std::vector<Point>& rows) {
  if (rows.size() < 2) throw std::invalid_argument("need at least two points");
  const std::size_t dim = rows.front().size();
  if (dim == 0) throw std::invalid_argument("points have zero dimension");
  Eigen::MatrixXd m(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) throw std::invalid_argument("points have mixed dimensions");
    for (std::size_t j = 0; j < dim; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                       2.0 * (x * x.transpose());
  return d2.cwiseMax(0.0);
}

}  // namespace

PcaResult pca_fit(const std::vector<Point>& rows, int k) {
  if (k < 1) throw std::invalid_argument("pca_fit: k must be >= 1");
  Eigen::MatrixXd x = to_matrix(rows);
  const int n = int(x.rows());
  const int dim = int(x.cols());

  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / double(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("pca_fit: eigensolver failed");

  // ascending from Eigen; reorder descending
  const int total = dim;
  std::vector<double> eigenvalues(total);
  for (int i = 0; i < total; ++i)
    eigenvalues[i] = std::max(0.0, solver.eigenvalues()(total - 1 - i));
  const double total_var = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);

  const double rank_tol = total_var > 0.0 ? eigenvalues.front() * 1e-12 : 0.0;
  int rank = 0;
  for (double ev : eigenvalues)
    if (ev > rank_tol && ev > 0.0) ++rank;

  const int k_max = std::min(n - 1, dim);
  int k_eff = std::min(k, k_max);
  PcaResult result;
  if (k > rank) {
    k_eff = std::min(k_eff, std::max(rank, 0));
    result.model.truncated = true;
  }
  result.model.rank = rank;

  result.model.mean.assign(mean.data(), mean.data() + dim);
  result.model.components.resize(k_eff);
  result.model.explained_variance.resize(k_eff);
  result.model.explained_ratio.resize(k_eff);

  Eigen::MatrixXd comp(k_eff, dim);
  for (int c = 0; c < k_eff; ++c) {
    Eigen::VectorXd vec = solver.eigenvectors().col(total - 1 - c);
    // deterministic sign: largest-magnitude entry made positive
    int arg = 0;
    for (int j = 1; j < dim; ++j)
      if (std::fabs(vec(j)) > std::fabs(vec(arg))) arg = j;
    if (vec(arg) < 0.0) vec = -vec;
    comp.row(c) = vec.transpose();
    result.model.components[c].assign(vec.data(), vec.data() + dim);
    result.model.explained_variance[c] = eigenvalues[c];
    result.model.explained_ratio[c] = total_var > 0.0 ? eigenvalues[c] / total_var : 0.0;
  }

  Eigen::MatrixXd scores = centered * comp.transpose();
  result.scores.assign(std::size_t(n), Point(std::size_t(k_eff)));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < k_eff; ++c) result.scores[std::size_t(i)][std::size_t(c)] = scores(i, c);
  return result;
}

std::vector<Point> pca_reconstruct(const PcaModel& model, const std::vector<Point>& scores) {
  const std::size_t dim = model.mean.size();
  const std::size_t k = model.components.size();
  std::vector<Point> rows(scores.size(), Point(dim, 0.0));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != k) throw std::invalid_argument("pca_reconstruct: score size mismatch");
    for (std::size_t j = 0; j < dim; ++j) {
      double v = model.mean[j];
      for (std::size_t c = 0; c < k; ++c) v += scores[i][c] * model.components[c][j];
      rows[i][j] = v;
    }
  }
  return rows;
}

namespace {

inline double gauss(std::mt19937_64& gen) {
  // Box-Muller on explicit 53-bit uniforms; avoids implementation-defined
  // std::normal_distribution so embeddings reproduce bit-exactly everywhere.
  double u1 = 0.0;
  do {
    u1 = double(gen() >> 11) * 0x1.0p-53;
  } while (u1 <= 0.0);
  const double u2 = double(gen() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Conditional affinities for one point, bandwidth tuned by bisection so the
// entropy matches ln(perplexity).
void tune_row(const Eigen::MatrixXd& d2, int i, double target_entropy,
              Eigen::VectorXd& p_row) {
  const int n = int(d2.rows());
  double beta = 1.0, beta_min = -1.0, beta_max = -1.0;

  for (int iter = 0; iter < 100; ++iter) {
    double sum = 0.0, weighted = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) {
        p_row(j) = 0.0;
        continue;
      }
      const double w = std::exp(-beta * d2(i, j));
      p_row(j) = w;
      sum += w;
      weighted += w * d2(i, j);
    }
    if (sum <= 0.0) sum = std::numeric_limits<double>::min();
    const double entropy = std::log(sum) + beta * weighted / sum;
    p_row /= sum;

    const double diff = entropy - target_entropy;
    if (std::fabs(diff) < 1e-10) break;
    if (diff > 0.0) {
      beta_min = beta;
      beta = beta_max < 0.0 ? beta * 2.0 : 0.5 * (beta + beta_max);
    } else {
      beta_max = beta;
      beta = beta_min < 0.0 ? beta * 0.5 : 0.5 * (beta + beta_min);
    }
  }
}

}  // namespace

std::vector<std::array<double, 2>> tsne(const std::vector<Point>& rows,
                                        const TsneParams& params) {
  const int n = int(rows.size());
  if (n < 4) throw std::invalid_argument("tsne: need at least 4 points");
  if (!(params.perplexity > 0.0) || params.perplexity >= (n - 1) / 3.0)
    throw std::invalid_argument("tsne: perplexity must be positive and < (n-1)/3");
  if (params.iterations < 1) throw std::invalid_argument("tsne: iterations must be >= 1");

  const Eigen::MatrixXd x = to_matrix(rows);
  const Eigen::MatrixXd d2 = squared_distances(x);

  Eigen::MatrixXd p(n, n);
  Eigen::VectorXd p_row(n);
  const double target_entropy = std::log(params.perplexity);
  for (int i = 0; i < n; ++i) {
    tune_row(d2, i, target_entropy, p_row);
    p.row(i) = p_row.transpose();
  }
  Eigen::MatrixXd pj = (p + p.transpose()) / (2.0 * n);
  pj = pj.cwiseMax(1e-12);
  pj.diagonal().setZero();

  std::mt19937_64 gen(params.seed);
  Eigen::MatrixXd y(n, 2);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c) y(i, c) = 1e-2 * gauss(gen);

  Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd grad(n, 2), w(n, n);

  for (int iter = 0; iter < params.iterations; ++iter) {
    const double exaggeration =
        iter < params.exaggeration_iters ? params.early_exaggeration : 1.0;

    double w_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      w(i, i) = 0.0;
      for (int j = i + 1; j < n; ++j) {
        const double dx = y(i, 0) - y(j, 0);
        const double dy = y(i, 1) - y(j, 1);
        const double wij = 1.0 / (1.0 + dx * dx + dy * dy);
        w(i, j) = wij;
        w(j, i) = wij;
        w_sum += 2.0 * wij;
      }
    }
    if (w_sum <= 0.0) w_sum = std::numeric_limits<double>::min();

    grad.setZero();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double q = std::max(w(i, j) / w_sum, 1e-12);
        const double mult = 4.0 * (exaggeration * pj(i, j) - q) * w(i, j);
        grad(i, 0) += mult * (y(i, 0) - y(j, 0));
        grad(i, 1) += mult * (y(i, 1) - y(j, 1));
      }

    const double momentum = iter < 250 ? 0.5 : 0.8;
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c) {
        const bool same_sign = (grad(i, c) > 0.0) == (inc(i, c) > 0.0);
        gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, 0.01) : gains(i, c) + 0.2;
        inc(i, c) = momentum * inc(i, c) - params.learning_rate * gains(i, c) * grad(i, c);
        y(i, c) += inc(i, c);
      }
    y.rowwise() -= y.colwise().mean();
  }

  std::vector<std::array<double, 2>> out(n);
  for (int i = 0; i < n; ++i) out[i] = {y(i, 0), y(i, 1)};
  return out;
}

Dendrogram ward_cluster(const std::vector<Point>& rows) {
  const int n = int(rows.size());
  if (n < 2) throw std::invalid_argument("ward_cluster: need at least two points");
  const Eigen::MatrixXd x = to_matrix(rows);
  Eigen::MatrixXd d = squared_distances(x);

  std::vector<int> id(n), size(n, 1);
  std::iota(id.begin(), id.end(), 0);
  std::vector<bool> active(n, true);

  Dendrogram dendro;
  dendro.n_leaves = n;
  dendro.merges.reserve(n - 1);

  for (int step = 0; step < n - 1; ++step) {
    int best_i = -1, best_j = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        const double dij = d(i, j);
        if (dij < best) {
          best = dij;
          best_i = i;
          best_j = j;
        } else if (dij == best && best_i >= 0) {
          const auto lhs = std::minmax(id[i], id[j]);
          const auto rhs = std::minmax(id[best_i], id[best_j]);
          if (lhs < rhs) {
            best_i = i;
            best_j = j;
          }
        }
      }
    }

    const int a = best_i, b = best_j;
    const auto [lo, hi] = std::minmax(id[a], id[b]);
    dendro.merges.push_back({lo, hi, best, size[a] + size[b]});

    // Lance-Williams Ward update into slot a
    for (int k = 0; k < n; ++k) {
      if (!active[k] || k == a || k == b) continue;
      const double na = size[a], nb = size[b], nk = size[k];
      const double updated =
          ((na + nk) * d(std::min(a, k), std::max(a, k)) +
           (nb + nk) * d(std::min(b, k), std::max(b, k)) - nk * best) /
          (na + nb + nk);
      d(std::min(a, k), std::max(a, k)) = updated;
    }
    size[a] += size[b];
    active[b] = false;
    id[a] = n + step;
  }
  return dendro;
}

std::vector<int> cut_clusters(const Dendrogram& dendro, int k) {
  const int n = dendro.n_leaves;
  if (k < 1 || k > n) throw std::invalid_argument("cut_clusters: k out of range");

  std::vector<int> parent(n + dendro.merges.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };

  const int merges_applied = n - k;
  for (int m = 0; m < merges_applied; ++m) {
    const auto& mg = dendro.merges[m];
    const int root = n + m;
    parent[find(mg.a)] = root;
    parent[find(mg.b)] = root;
  }

  std::vector<int> labels(n, -1);
  std::vector<int> root_label;
  std::vector<int> roots;
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    auto it = std::find(roots.begin(), roots.end(), r);
    if (it == roots.end()) {
      roots.push_back(r);
      labels[i] = int(roots.size()) - 1;
    } else {
      labels[i] = int(it - roots.begin());
    }
  }
  return labels;
}

std::vector<int> dbscan(const std::vector<Point>& rows, double eps, int min_pts) {
  if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be > 0");
  if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
  const int n = int(rows.size());
  if (n == 0) return {};
  if (n == 1) return {min_pts <= 1 ? 0 : -1};
  const Eigen::MatrixXd x = to_matrix(rows);
  const Eigen::MatrixXd d2 = squared_distances(x);
  const double eps2 = eps * eps;

  // neighborhood includes the point itself
  auto neighbors = [&](int i) {
    std::vector<int> out;
    for (int j = 0; j < n; ++j)
      if (d2(i, j) <= eps2) out.push_back(j);
    return out;
  };

  constexpr int kUnvisited = -2, kNoise = -1;
  std::vector<int> label(n, kUnvisited);
  int next_cluster = 0;

  for (int i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    auto seed_neighbors = neighbors(i);
    if (int(seed_neighbors.size()) < min_pts) {
      label[i] = kNoise;
      continue;
    }
    const int cluster = next_cluster++;
    label[i] = cluster;
    std::queue<int> frontier;
    for (int j : seed_neighbors)
      if (j != i) frontier.push(j);
    while (!frontier.empty()) {
      const int q = frontier.front();
      frontier.pop();
      if (label[q] == kNoise) label[q] = cluster;  // border point
      if (label[q] != kUnvisited) continue;
      label[q] = cluster;
      auto q_neighbors = neighbors(q);
      if (int(q_neighbors.size()) >= min_pts)
        for (int j : q_neighbors)
          if (label[j] == kUnvisited || label[j] == kNoise) frontier.push(j);
    }
  }
  return label;
}

double dbscan_eps_elbow(const std::vector<Point>& rows, int k) {
  const int n = int(rows.size());
  if (n < 2) return 1.0;
  if (k < 1) throw std::invalid_argument("dbscan_eps_elbow: k must be >= 1");
  const Eigen::MatrixXd x = to_matrix(rows);
  const Eigen::MatrixXd d2 = squared_distances(x);

  // distance to the (k-1)-th nearest other point: the smallest radius that
  // would make the point a core point for min_pts = k
  std::vector<double> kdist(n);
  std::vector<double> drow(n - 1);
  for (int i = 0; i < n; ++i) {
    int m = 0;
    for (int j = 0; j < n; ++j)
      if (j != i) drow[m++] = std::sqrt(d2(i, j));
    std::sort(drow.begin(), drow.end());
    kdist[i] = drow[std::min(std::max(k - 1, 1) - 1, n - 2)];
  }
  std::sort(kdist.begin(), kdist.end());

  // A pronounced jump in the sorted curve separates the dense scale from
  // outliers; without one, take the full dense scale so every point is core.
  double max_gap = 0.0;
  int gap_at = n - 1;
  for (int i = 0; i + 1 < n; ++i) {
    const double gap = kdist[i + 1] - kdist[i];
    if (gap > max_gap) {
      max_gap = gap;
      gap_at = i;
    }
  }
  const double mean_gap = (kdist.back() - kdist.front()) / double(n - 1);
  double eps = (max_gap > 8.0 * mean_gap && mean_gap > 0.0) ? kdist[gap_at] : kdist.back();
  return eps > 0.0 ? eps : 1e-12;
}

}  // namespace lobmc
