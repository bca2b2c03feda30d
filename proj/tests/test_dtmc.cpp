#include <doctest.h>

#include <cmath>
#include <random>

#include "lobmc/dtmc.hpp"
#include "lobmc/metrics.hpp"
#include "test_util.hpp"

using namespace lobmc;

TEST_CASE("estimate_tpm") {
  SUBCASE("two-count row, all else degenerate") {
    TransitionCounts counts;
    counts.add(StateId::S5, StateId::S5, 1);
    counts.add(StateId::S5, StateId::S4, 1);
    const Tpm tpm = estimate_tpm(counts);
    CHECK(tpm.p[4][4] == doctest::Approx(0.5));
    CHECK(tpm.p[4][3] == doctest::Approx(0.5));
    CHECK(tpm.row_support[4]);
    for (int i = 0; i < kNumStates; ++i) {
      if (i == 4) continue;
      CHECK_FALSE(tpm.row_support[i]);
      CHECK(tpm.p[i][i] == 1.0);
    }
    validate_tpm(tpm);
  }
  SUBCASE("all-zero counts give the degenerate identity") {
    const Tpm tpm = estimate_tpm(TransitionCounts{});
    for (int i = 0; i < kNumStates; ++i) {
      CHECK(tpm.p[i][i] == 1.0);
      CHECK_FALSE(tpm.row_support[i]);
    }
  }
  SUBCASE("row stochastic for random counts") {
    std::mt19937_64 gen(41);
    for (int trial = 0; trial < 200; ++trial) {
      TransitionCounts counts;
      for (int i = 0; i < kNumStates; ++i)
        for (int j = 0; j < kNumStates; ++j) {
          const auto v = std::uint64_t(testutil::uniform01(gen) * 20);
          if (v) counts.add(state_at(i), state_at(j), v);
        }
      validate_tpm(estimate_tpm(counts));
    }
  }
  SUBCASE("smoothing fills rows but keeps support flags raw") {
    TransitionCounts counts;
    counts.add(StateId::S4, StateId::S5, 3);
    const Tpm tpm = estimate_tpm(counts, 0.5);
    validate_tpm(tpm);
    for (int j = 0; j < kNumStates; ++j) CHECK(tpm.p[0][j] > 0.0);
    CHECK_FALSE(tpm.row_support[0]);
    CHECK(tpm.row_support[3]);
    const ChainStructure cs = chain_structure(tpm);
    CHECK(cs.is_irreducible);
  }
}

TEST_CASE("pool_counts") {
  TransitionCounts a;
  a.add(StateId::S4, StateId::S5, 1);
  SUBCASE("pooling one is the identity") {
    const auto pooled = pool_counts(std::vector<TransitionCounts>{a});
    CHECK(pooled == a);
  }
  SUBCASE("element-wise sum") {
    TransitionCounts b;
    b.add(StateId::S4, StateId::S5, 2);
    const auto pooled = pool_counts(std::vector<TransitionCounts>{a, b});
    CHECK(pooled.n[3][4] == 3);
    CHECK(pooled.total == 3);
  }
  SUBCASE("pooling commutes with estimation; averaging does not") {
    std::mt19937_64 gen(43);
    std::vector<TransitionCounts> parts(7);
    TransitionCounts summed;
    for (auto& part : parts) {
      for (int i = 0; i < kNumStates; ++i)
        for (int j = 0; j < kNumStates; ++j) {
          const auto v = 1 + std::uint64_t(testutil::uniform01(gen) * 25);
          part.add(state_at(i), state_at(j), v);
          summed.add(state_at(i), state_at(j), v);
        }
    }
    const Tpm from_pool = estimate_tpm(pool_counts(parts));
    const Tpm from_sum = estimate_tpm(summed);
    for (int i = 0; i < kNumStates; ++i)
      for (int j = 0; j < kNumStates; ++j)
        CHECK(from_pool.p[i][j] == doctest::Approx(from_sum.p[i][j]).epsilon(1e-15));

    // negative control: the unweighted mean of per-part estimates differs
    std::vector<Tpm> per_part;
    for (const auto& part : parts) per_part.push_back(estimate_tpm(part));
    const Tpm averaged = average_tpms(per_part);
    double max_diff = 0.0;
    for (int i = 0; i < kNumStates; ++i)
      for (int j = 0; j < kNumStates; ++j)
        max_diff = std::max(max_diff, std::fabs(averaged.p[i][j] - from_pool.p[i][j]));
    CHECK(max_diff > 1e-4);
  }
}

TEST_CASE("chain_structure") {
  SUBCASE("strictly positive matrix is irreducible") {
    std::mt19937_64 gen(47);
    const ChainStructure cs = chain_structure(testutil::random_tpm(gen));
    CHECK(cs.is_irreducible);
    CHECK(cs.classes.size() == 1);
    CHECK(cs.closed_classes.size() == 1);
  }
  SUBCASE("identity splits into nine closed singletons") {
    const ChainStructure cs = chain_structure(Tpm::identity());
    CHECK(cs.classes.size() == 9);
    CHECK(cs.closed_classes.size() == 9);
    CHECK_FALSE(cs.is_irreducible);
  }
  SUBCASE("transient outer cycle feeding a closed center block") {
    Matrix9 p{};
    // outer states S1,S2,S3,S7,S8,S9 cycle with a leak into S5
    const int outer[] = {0, 1, 2, 6, 7, 8};
    for (int k = 0; k < 6; ++k) {
      p[outer[k]][outer[(k + 1) % 6]] = 0.9;
      p[outer[k]][4] = 0.1;
    }
    for (int i : {3, 4, 5})
      for (int j : {3, 4, 5}) p[i][j] = 1.0 / 3.0;
    const Tpm tpm = Tpm::from_matrix(p);
    const ChainStructure cs = chain_structure(tpm);
    CHECK(cs.classes.size() == 2);
    REQUIRE(cs.closed_classes.size() == 1);
    CHECK(cs.classes[std::size_t(cs.closed_classes[0])] == std::vector<int>{3, 4, 5});
  }
}

TEST_CASE("stationary") {
  SUBCASE("symmetric two-state block") {
    TransitionCounts counts;
    counts.add(StateId::S4, StateId::S4, 5);
    counts.add(StateId::S4, StateId::S5, 5);
    counts.add(StateId::S5, StateId::S4, 5);
    counts.add(StateId::S5, StateId::S5, 5);
    const StationaryDist dist = stationary(estimate_tpm(counts));
    CHECK(dist.pi[3] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(dist.pi[4] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(dist.residual <= 1e-12);
  }
  SUBCASE("asymmetric two-state block solves the balance equation") {
    TransitionCounts counts;
    counts.add(StateId::S4, StateId::S4, 9);
    counts.add(StateId::S4, StateId::S5, 1);
    counts.add(StateId::S5, StateId::S4, 5);
    counts.add(StateId::S5, StateId::S5, 5);
    const StationaryDist dist = stationary(estimate_tpm(counts));
    CHECK(dist.pi[3] == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(dist.pi[4] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(dist.residual <= 1e-12);
  }
  SUBCASE("fixed point and normalization on random matrices") {
    std::mt19937_64 gen(53);
    for (int trial = 0; trial < 100; ++trial) {
      const Tpm tpm = testutil::random_tpm(gen);
      const StationaryDist dist = stationary(tpm);
      CHECK(dist.residual <= 1e-12);
      double sum = 0.0;
      for (double v : dist.pi) sum += v;
      CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
  }
  SUBCASE("mean recurrence is definitionally consistent") {
    std::mt19937_64 gen(59);
    const Tpm tpm = testutil::random_tpm(gen);
    const StationaryDist dist = stationary(tpm);
    const Vector9 mrt = mean_recurrence(dist.pi);
    for (int s = 0; s < kNumStates; ++s)
      CHECK(std::fabs(mrt[s] * dist.pi[s] - 1.0) <= 1e-12);
  }
  SUBCASE("multiple closed classes raise with class names") {
    Matrix9 p{};
    for (int i : {0, 1})
      for (int j : {0, 1}) p[i][j] = 0.5;
    for (int i : {2, 3})
      for (int j : {2, 3}) p[i][j] = 0.5;
    for (int i = 4; i < 9; ++i) p[i][i] = 1.0;
    Tpm tpm;
    tpm.p = p;
    tpm.row_support = {true, true, true, true, false, false, false, false, false};
    CHECK_THROWS_WITH_AS(stationary(tpm), doctest::Contains("multiple closed"), NumericError);
  }
  SUBCASE("no supported class raises") {
    CHECK_THROWS_AS(stationary(Tpm::identity()), NumericError);
  }
  SUBCASE("unsupported absorbing rows are ignored, supported ones are not") {
    // S4 <-> S5 closed block plus an unsupported S9 self-loop: solvable
    TransitionCounts counts;
    counts.add(StateId::S4, StateId::S5, 2);
    counts.add(StateId::S5, StateId::S4, 2);
    const Tpm tpm = estimate_tpm(counts);
    const StationaryDist dist = stationary(tpm);
    CHECK(dist.pi[8] == 0.0);
    CHECK(dist.pi[3] == doctest::Approx(0.5));

    // a *supported* absorbing singleton next to another closed class is ambiguous
    TransitionCounts bad;
    bad.add(StateId::S4, StateId::S5, 2);
    bad.add(StateId::S5, StateId::S4, 2);
    bad.add(StateId::S9, StateId::S9, 3);
    CHECK_THROWS_AS(stationary(estimate_tpm(bad)), NumericError);
  }
}

TEST_CASE("simulate") {
  SUBCASE("zero steps") {
    Vector9 init{};
    init[4] = 1.0;
    CHECK(simulate(Tpm::uniform(), init, 0, 1).empty());
  }
  SUBCASE("deterministic cycle") {
    Matrix9 p{};
    for (int i = 0; i < kNumStates; ++i) p[i][(i + 1) % kNumStates] = 1.0;
    Vector9 init{};
    init[0] = 1.0;
    const auto states = simulate(Tpm::from_matrix(p), init, 20, 99);
    for (int k = 0; k < 20; ++k) CHECK(index_of(states[std::size_t(k)]) == k % 9);
  }
  SUBCASE("same seed, same path; different seed, different path") {
    std::mt19937_64 gen(61);
    const Tpm tpm = testutil::random_tpm(gen);
    Vector9 init{};
    init.fill(1.0 / 9.0);
    const auto a = simulate(tpm, init, 2000, 7);
    const auto b = simulate(tpm, init, 2000, 7);
    const auto c = simulate(tpm, init, 2000, 8);
    CHECK(a == b);
    CHECK(a != c);
  }
  SUBCASE("round-trip recovery at n = 1e5") {
    std::mt19937_64 gen(67);
    const Tpm planted = testutil::random_tpm(gen);
    Vector9 init{};
    init.fill(1.0 / 9.0);
    const auto states = simulate(planted, init, 100000, 12345);
    const Tpm estimated = estimate_tpm(count_transitions(states));
    double max_err = 0.0;
    for (int i = 0; i < kNumStates; ++i)
      for (int j = 0; j < kNumStates; ++j)
        max_err = std::max(max_err, std::fabs(estimated.p[i][j] - planted.p[i][j]));
    CHECK(max_err < 0.02);
  }
  SUBCASE("input validation") {
    Vector9 bad{};
    bad[0] = 0.5;
    CHECK_THROWS_AS(simulate(Tpm::uniform(), bad, 5, 1), std::invalid_argument);
  }
}
