#pragma once

#include <array>
#include <numbers>

#include "lobmc/dtmc.hpp"

namespace lobmc {

inline constexpr double kNatBase = std::numbers::e;

// Moduli of the nine eigenvalues, descending. The leading modulus is 1 within
// 1e-10 for any valid row-stochastic matrix.
std::array<double, kNumStates> eigen_moduli(const Tpm& tpm);

// gamma = 1 - |lambda2|.
double spectral_gap(const Tpm& tpm);

struct Relaxation {
  double time = 0.0;      // 1/gamma; +inf when gamma == 0
  double rate_log = 0.0;  // -ln|lambda2|; +inf when |lambda2| == 0
};
Relaxation relaxation(const Tpm& tpm);

// |lambda2| = 1 - gamma. The total-variation bound it controls is
// ||p^(n) - pi||_TV <= C exp(-n / tau_rel); C is not pinned down here.
double mixing_rate(const Tpm& tpm);

// H = -sum_i pi_i sum_j p_ij log p_ij with 0 log 0 = 0; log base configurable,
// nats by default.
double entropy_rate(const Tpm& tpm, const Vector9& pi, double log_base = kNatBase);

// Entropy of a distribution (upper bound for the entropy rate of any chain
// with that stationary distribution).
double distribution_entropy(const Vector9& pi, double log_base = kNatBase);

// mu_i = 1 / pi_i; +inf where pi_i == 0.
Vector9 mean_recurrence(const Vector9& pi);

struct ChainMetrics {
  double spectral_gap = 0.0;
  double lambda2_mod = 0.0;
  double relaxation_time = 0.0;
  double relaxation_rate_log = 0.0;
  double mixing_rate = 0.0;
  double entropy_rate = 0.0;
  double entropy_log_base = kNatBase;
  Vector9 pi{};
  double stationary_residual = 0.0;
  Vector9 mrt{};
};

// Full per-matrix summary; solves the stationary distribution internally.
ChainMetrics chain_metrics(const Tpm& tpm, double log_base = kNatBase);

}  // namespace lobmc
