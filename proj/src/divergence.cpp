#include "lobmc/divergence.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lobmc {

void check_distribution(const std::vector<double>& dist) {
  if (dist.empty()) throw std::invalid_argument("distribution is empty");
  double sum = 0.0;
  for (double v : dist) {
    if (!(v >= 0.0)) throw std::invalid_argument("distribution has a negative entry");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("distribution does not sum to 1");
}

double kld(const std::vector<double>& u, const std::vector<double>& v, double base) {
  check_distribution(u);
  check_distribution(v);
  if (u.size() != v.size()) throw std::invalid_argument("kld: size mismatch");
  if (!(base > 0.0) || base == 1.0) throw std::invalid_argument("kld: invalid log base");

  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] == 0.0) continue;
    if (v[i] == 0.0) return std::numeric_limits<double>::infinity();
    acc += u[i] * std::log(u[i] / v[i]);
  }
  acc /= std::log(base);
  return acc < 0.0 ? 0.0 : acc;  // clamp rounding noise; KLD >= 0
}

namespace {

// Evaluation order is canonicalized so jsd(p, q) and jsd(q, p) run the exact
// same floating-point operations.
double jsd_ordered(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) m[i] = 0.5 * (a[i] + b[i]);

  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0) acc += 0.5 * a[i] * std::log2(a[i] / m[i]);
    if (b[i] > 0.0) acc += 0.5 * b[i] * std::log2(b[i] / m[i]);
  }
  if (acc < 0.0) acc = 0.0;
  if (acc > 1.0) acc = std::min(acc, 1.0 + 1e-15);
  return acc;
}

}  // namespace

double jsd(const std::vector<double>& p, const std::vector<double>& q) {
  check_distribution(p);
  check_distribution(q);
  if (p.size() != q.size()) throw std::invalid_argument("jsd: size mismatch");
  return p <= q ? jsd_ordered(p, q) : jsd_ordered(q, p);
}

std::vector<std::vector<double>> jsd_matrix(const std::vector<std::vector<double>>& dists) {
  if (dists.size() < 2) throw std::domain_error("jsd_matrix: need at least two distributions");
  const std::size_t n = dists.size();
  std::vector<std::vector<double>> values(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const double d = jsd(dists[a], dists[b]);
      values[a][b] = d;
      values[b][a] = d;
    }
  return values;
}

}  // namespace lobmc
