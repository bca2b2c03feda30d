#include "lobmc/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace lobmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// below this, a second eigenvalue modulus is numerical zero (rank-one chains)
constexpr double kModulusZeroTol = 1e-12;

Eigen::Matrix<double, 9, 9> to_eigen(const Tpm& tpm) {
  Eigen::Matrix<double, 9, 9> m;
  for (int i = 0; i < kNumStates; ++i)
    for (int j = 0; j < kNumStates; ++j) m(i, j) = tpm.p[i][j];
  return m;
}

}  // namespace

std::array<double, kNumStates> eigen_moduli(const Tpm& tpm) {
  validate_tpm(tpm, 1e-9);
  const auto m = to_eigen(tpm);

  Eigen::EigenSolver<Eigen::Matrix<double, 9, 9>> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "eigen_moduli: QR iteration did not converge on matrix:\n" << m;
    throw NumericError(os.str());
  }

  std::array<double, kNumStates> moduli{};
  for (int k = 0; k < kNumStates; ++k) moduli[k] = std::abs(solver.eigenvalues()(k));
  std::sort(moduli.begin(), moduli.end(), std::greater<double>());

  // trace consistency guard: sum of eigenvalues must equal trace(P)
  const double trace_err = std::fabs(solver.eigenvalues().sum().real() - m.trace()) +
                           std::fabs(solver.eigenvalues().sum().imag());
  if (trace_err > 1e-8) throw NumericError("eigen_moduli: spectrum inconsistent with trace");

  if (std::fabs(moduli[0] - 1.0) > 1e-10)
    throw NumericError("eigen_moduli: leading modulus deviates from 1");
  return moduli;
}

double spectral_gap(const Tpm& tpm) { return 1.0 - eigen_moduli(tpm)[1]; }

Relaxation relaxation(const Tpm& tpm) {
  const auto moduli = eigen_moduli(tpm);
  const double lambda2 = moduli[1];
  const double gap = 1.0 - lambda2;
  Relaxation rel;
  rel.time = gap > 0.0 ? 1.0 / gap : kInf;
  rel.rate_log = lambda2 > kModulusZeroTol ? 0.0 - std::log(lambda2) : kInf;
  return rel;
}

double mixing_rate(const Tpm& tpm) { return eigen_moduli(tpm)[1]; }

double entropy_rate(const Tpm& tpm, const Vector9& pi, double log_base) {
  if (!(log_base > 0.0) || log_base == 1.0)
    throw std::invalid_argument("entropy_rate: invalid log base");
  double h = 0.0;
  for (int i = 0; i < kNumStates; ++i) {
    if (pi[i] <= 0.0) continue;
    double row_h = 0.0;
    for (int j = 0; j < kNumStates; ++j) {
      const double p = tpm.p[i][j];
      if (p > 0.0) row_h -= p * std::log(p);
    }
    h += pi[i] * row_h;
  }
  return h / std::log(log_base);
}

double distribution_entropy(const Vector9& pi, double log_base) {
  if (!(log_base > 0.0) || log_base == 1.0)
    throw std::invalid_argument("distribution_entropy: invalid log base");
  double h = 0.0;
  for (double v : pi)
    if (v > 0.0) h -= v * std::log(v);
  return h / std::log(log_base);
}

Vector9 mean_recurrence(const Vector9& pi) {
  Vector9 mrt{};
  for (int i = 0; i < kNumStates; ++i) mrt[i] = pi[i] > 0.0 ? 1.0 / pi[i] : kInf;
  return mrt;
}

ChainMetrics chain_metrics(const Tpm& tpm, double log_base) {
  ChainMetrics cm;
  const auto moduli = eigen_moduli(tpm);
  cm.lambda2_mod = moduli[1];
  cm.mixing_rate = moduli[1];
  cm.spectral_gap = 1.0 - moduli[1];
  cm.relaxation_time = cm.spectral_gap > 0.0 ? 1.0 / cm.spectral_gap : kInf;
  cm.relaxation_rate_log =
      cm.lambda2_mod > kModulusZeroTol ? 0.0 - std::log(cm.lambda2_mod) : kInf;

  const StationaryDist dist = stationary(tpm);
  cm.pi = dist.pi;
  cm.stationary_residual = dist.residual;
  cm.entropy_rate = entropy_rate(tpm, dist.pi, log_base);
  cm.entropy_log_base = log_base;
  cm.mrt = mean_recurrence(dist.pi);
  return cm;
}

}  // namespace lobmc
