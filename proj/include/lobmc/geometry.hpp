#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lobmc/dtmc.hpp"

namespace lobmc {

using Point = std::vector<double>;

// Row-major flatten: v[9*(i-1) + (j-1)] = p_ij.
std::array<double, kNumStates * kNumStates> vectorize(const Tpm& tpm);
Tpm devectorize(const std::array<double, kNumStates * kNumStates>& v);

struct PcaModel {
  Point mean;
  std::vector<Point> components;  // orthonormal rows
  std::vector<double> explained_variance;
  std::vector<double> explained_ratio;
  int rank = 0;
  bool truncated = false;  // true when k exceeded the data rank
};

struct PcaResult {
  PcaModel model;
  std::vector<Point> scores;  // n x k projections of the centered data
};

// Eigendecomposition of the sample covariance (divisor n-1); components are
// the top-k eigenvectors, deterministically sign-fixed. k is truncated to the
// data rank when it exceeds it. Requires n >= 2 points of equal dimension.
PcaResult pca_fit(const std::vector<Point>& rows, int k);

// Back-projection mean + scores * components (identity on centered data when
// all rank components are kept).
std::vector<Point> pca_reconstruct(const PcaModel& model, const std::vector<Point>& scores);

struct TsneParams {
  double perplexity = 5.0;
  int iterations = 1000;
  double learning_rate = 10.0;
  double early_exaggeration = 4.0;
  int exaggeration_iters = 100;
  std::uint64_t seed = 1;
};

// Exact (non-approximate) t-SNE: bisection-tuned Gaussian bandwidths matching
// the perplexity, symmetrized affinities, Student-t low-dimensional kernel,
// momentum gradient descent. Deterministic for a fixed seed. Requires n >= 4
// and perplexity < (n-1)/3.
std::vector<std::array<double, 2>> tsne(const std::vector<Point>& rows, const TsneParams& params);

struct Dendrogram {
  struct Merge {
    int a = 0;          // cluster ids; leaves are 0..n-1, merge m creates n+m
    int b = 0;
    double height = 0;  // Ward linkage value (squared-distance scale)
    int size = 0;       // members in the new cluster
  };
  int n_leaves = 0;
  std::vector<Merge> merges;  // n-1 entries, non-decreasing heights
};

// Agglomerative Ward linkage via the Lance-Williams recurrence on squared
// Euclidean distances; ties broken by smallest (a, b) pair.
Dendrogram ward_cluster(const std::vector<Point>& rows);

// Labels 0..k-1 from cutting the dendrogram at k clusters, numbered by first
// leaf occurrence.
std::vector<int> cut_clusters(const Dendrogram& dendro, int k);

// Density clustering; -1 labels noise. Deterministic given the point order.
std::vector<int> dbscan(const std::vector<Point>& rows, double eps, int min_pts);

// k-distance elbow heuristic for the DBSCAN radius (k = min_pts): the sorted
// k-th neighbor distance furthest from the chord between its extremes.
double dbscan_eps_elbow(const std::vector<Point>& rows, int k);

}  // namespace lobmc
