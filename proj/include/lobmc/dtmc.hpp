#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lobmc/chain.hpp"
#include "lobmc/types.hpp"

namespace lobmc {

struct Provenance {
  std::string tier;
  std::string interval;
  std::string side;
  std::string aggregation;
};

// Row-stochastic 9x9 transition matrix. Rows with no observed transitions are
// the self-loop convention rows and carry row_support = false.
struct Tpm {
  Matrix9 p{};
  std::array<bool, kNumStates> row_support{};
  Provenance provenance{};

  static Tpm identity();
  static Tpm uniform();
  static Tpm from_matrix(const Matrix9& p);  // validates, marks all rows supported
};

// Throws NumericError unless every row sums to 1 within tol and entries lie
// in [0, 1].
void validate_tpm(const Tpm& tpm, double tol = 1e-12);

// MLE row normalization of counts. With smoothing_alpha > 0 the constant is
// added to every cell before normalizing, which makes every row strictly
// positive; row_support still reflects the raw counts.
Tpm estimate_tpm(const TransitionCounts& counts, double smoothing_alpha = 0.0);

// Element-wise integer sum; associative and commutative.
TransitionCounts pool_counts(std::span<const TransitionCounts> parts);

// Unweighted element-wise mean of probability matrices (sensitivity mode; it
// is NOT equivalent to pooled estimation). Rows supported if supported in any
// operand.
Tpm average_tpms(std::span<const Tpm> tpms);

struct ChainStructure {
  std::vector<std::vector<int>> classes;  // communicating classes, states sorted
  std::vector<int> closed_classes;        // indices into classes with no exit edge
  bool is_irreducible = false;            // exactly one class
};

// Strongly connected components of the digraph with edge i->j iff p_ij > 0.
ChainStructure chain_structure(const Tpm& tpm);

struct StationaryDist {
  Vector9 pi{};
  double residual = 0.0;  // max_j |sum_i pi_i p_ij - pi_j|
};

// Balance-equation solve restricted to the unique closed communicating class,
// zeros elsewhere. Closed classes that are single unsupported self-loop rows
// are artifacts of the zero-count convention and are ignored. Throws
// NumericError when no or several genuine closed classes exist.
StationaryDist stationary(const Tpm& tpm);

// Seeded chain sampling: states[0] ~ initial_dist, states[k+1] ~ row of
// states[k]. Reproducible across platforms for a fixed seed.
std::vector<StateId> simulate(const Tpm& tpm, const Vector9& initial_dist,
                              std::size_t n_steps, std::uint64_t seed);

}  // namespace lobmc
