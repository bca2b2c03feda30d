#pragma once

#include <vector>

#include "lobmc/types.hpp"

namespace lobmc {

// Validates a discrete distribution: non-negative entries summing to 1 within
// 1e-12. Throws std::invalid_argument otherwise.
void check_distribution(const std::vector<double>& dist);

// sum_i u_i log(u_i / v_i) with 0 log(0/.) = 0. Returns +infinity (a tagged
// value, not an exception) when some u_i > 0 has v_i = 0. Base 2 by default.
double kld(const std::vector<double>& u, const std::vector<double>& v, double base = 2.0);

// 0.5 kld(p, m) + 0.5 kld(q, m) with m = (p + q)/2, base 2; always finite,
// exactly symmetric, in [0, 1], zero iff p == q.
double jsd(const std::vector<double>& p, const std::vector<double>& q);

// Pairwise JSD over a list of distributions (one per interval); symmetric
// with a zero diagonal. Requires at least two distributions.
std::vector<std::vector<double>> jsd_matrix(const std::vector<std::vector<double>>& dists);

}  // namespace lobmc
