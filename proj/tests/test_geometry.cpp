#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lobmc/geometry.hpp"
#include "test_util.hpp"

using namespace lobmc;

namespace {

double box_muller(std::mt19937_64& gen) {
  double u1;
  do {
    u1 = testutil::uniform01(gen);
  } while (u1 <= 0.0);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * testutil::uniform01(gen));
}

std::vector<Point> gaussian_blob(std::mt19937_64& gen, const Point& center, double sigma, int n) {
  std::vector<Point> points;
  for (int k = 0; k < n; ++k) {
    Point p(center.size());
    for (std::size_t d = 0; d < center.size(); ++d) p[d] = center[d] + sigma * box_muller(gen);
    points.push_back(std::move(p));
  }
  return points;
}

}  // namespace

TEST_CASE("vectorize") {
  const auto v_id = vectorize(Tpm::identity());
  for (int k = 0; k < 81; ++k) CHECK(v_id[std::size_t(k)] == (k % 10 == 0 ? 1.0 : 0.0));

  const auto v_uni = vectorize(Tpm::uniform());
  for (double x : v_uni) CHECK(x == doctest::Approx(1.0 / 9.0));

  std::mt19937_64 gen(107);
  const Tpm tpm = testutil::random_tpm(gen);
  const Tpm back = devectorize(vectorize(tpm));
  for (int i = 0; i < kNumStates; ++i)
    for (int j = 0; j < kNumStates; ++j) CHECK(back.p[i][j] == tpm.p[i][j]);
}

TEST_CASE("pca") {
  SUBCASE("points on a line explain everything with one component") {
    std::vector<Point> rows;
    Point direction(81, 0.0);
    direction[3] = 1.0;
    direction[77] = -2.0;
    for (int k = 0; k < 12; ++k) {
      Point p(81, 0.5);
      for (std::size_t d = 0; d < 81; ++d) p[d] += double(k) * direction[d];
      rows.push_back(std::move(p));
    }
    const PcaResult r = pca_fit(rows, 8);
    CHECK(r.model.truncated);
    REQUIRE(r.model.explained_ratio.size() == 1);
    CHECK(r.model.explained_ratio[0] == doctest::Approx(1.0).epsilon(1e-9));
  }

  std::mt19937_64 gen(109);
  std::vector<Point> cloud;
  for (int k = 0; k < 40; ++k) {
    Point p(12);
    for (auto& v : p) v = box_muller(gen);
    cloud.push_back(std::move(p));
  }

  SUBCASE("orthonormal components") {
    const PcaResult r = pca_fit(cloud, 12);
    for (std::size_t a = 0; a < r.model.components.size(); ++a)
      for (std::size_t b = 0; b <= a; ++b) {
        double dot = 0.0;
        for (std::size_t d = 0; d < 12; ++d)
          dot += r.model.components[a][d] * r.model.components[b][d];
        CHECK(std::fabs(dot - (a == b ? 1.0 : 0.0)) <= 1e-9);
      }
  }
  SUBCASE("full-rank reconstruction is the identity") {
    const PcaResult r = pca_fit(cloud, 12);
    const auto rebuilt = pca_reconstruct(r.model, r.scores);
    for (std::size_t i = 0; i < cloud.size(); ++i)
      for (std::size_t d = 0; d < 12; ++d)
        CHECK(std::fabs(rebuilt[i][d] - cloud[i][d]) <= 1e-9);
  }
  SUBCASE("k = n-1 captures all variance") {
    std::vector<Point> few(cloud.begin(), cloud.begin() + 5);
    const PcaResult r = pca_fit(few, 4);
    double total = 0.0;
    for (double ratio : r.model.explained_ratio) total += ratio;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("explained ratios of isotropic data stay within sampling bounds") {
    // with n >> d the spectrum flattens toward 1/d (the n = 500, d = 81
    // regime is still dominated by Marchenko-Pastur spread, so the bounds
    // there are the MP edges, not +-20%)
    std::mt19937_64 g2(113);
    std::vector<Point> big;
    for (int k = 0; k < 20000; ++k) {
      Point p(10);
      for (auto& v : p) v = box_muller(g2);
      big.push_back(std::move(p));
    }
    const PcaResult r = pca_fit(big, 10);
    for (double ratio : r.model.explained_ratio) {
      CHECK(ratio > 0.8 / 10.0);
      CHECK(ratio < 1.2 / 10.0);
    }

    std::vector<Point> mp;  // n = 500, d = 81 as a reference point
    for (int k = 0; k < 500; ++k) {
      Point p(81);
      for (auto& v : p) v = box_muller(g2);
      mp.push_back(std::move(p));
    }
    const PcaResult r_mp = pca_fit(mp, 81);
    const double gamma = 81.0 / 500.0;
    const double hi = (1.0 + std::sqrt(gamma)) * (1.0 + std::sqrt(gamma));
    const double lo = (1.0 - std::sqrt(gamma)) * (1.0 - std::sqrt(gamma));
    CHECK(r_mp.model.explained_ratio.front() < 1.15 * hi / 81.0);
    CHECK(r_mp.model.explained_ratio.back() > 0.85 * lo / 81.0);
  }
  CHECK_THROWS_AS(pca_fit({Point{1.0}}, 1), std::invalid_argument);
  CHECK_THROWS_AS(pca_fit(cloud, 0), std::invalid_argument);
}

TEST_CASE("tsne") {
  TsneParams params;
  params.perplexity = 2.0;
  params.iterations = 600;
  params.seed = 5;

  SUBCASE("two far groups stay linearly separable") {
    std::mt19937_64 gen(127);
    auto points = gaussian_blob(gen, Point(8, 0.0), 0.05, 4);
    const auto far = gaussian_blob(gen, Point(8, 30.0), 0.05, 4);
    points.insert(points.end(), far.begin(), far.end());
    const auto embedded = tsne(points, params);

    double intra_max = 0.0, inter_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = i + 1; j < 8; ++j) {
        const double dx = embedded[i][0] - embedded[j][0];
        const double dy = embedded[i][1] - embedded[j][1];
        const double d = std::sqrt(dx * dx + dy * dy);
        if ((i < 4) == (j < 4))
          intra_max = std::max(intra_max, d);
        else
          inter_min = std::min(inter_min, d);
      }
    CHECK(inter_min > intra_max);
  }
  SUBCASE("identical points collapse without NaNs") {
    const std::vector<Point> same(8, Point(5, 1.25));
    const auto embedded = tsne(same, params);
    for (const auto& p : embedded) {
      CHECK(std::isfinite(p[0]));
      CHECK(std::isfinite(p[1]));
      CHECK(std::fabs(p[0]) < 1.0);
      CHECK(std::fabs(p[1]) < 1.0);
    }
  }
  SUBCASE("fixed seed reproduces bit-identical coordinates") {
    std::mt19937_64 gen(131);
    const auto points = gaussian_blob(gen, Point(6, 0.0), 1.0, 10);
    const auto a = tsne(points, params);
    const auto b = tsne(points, params);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i][0] == b[i][0]);
      CHECK(a[i][1] == b[i][1]);
    }
  }
  SUBCASE("preconditions") {
    const std::vector<Point> tiny(3, Point(2, 0.0));
    CHECK_THROWS_AS(tsne(tiny, params), std::invalid_argument);
    TsneParams bad = params;
    bad.perplexity = 10.0;  // >= (n-1)/3 for n = 10
    std::mt19937_64 gen(137);
    CHECK_THROWS_AS(tsne(gaussian_blob(gen, Point(2, 0.0), 1.0, 10), bad),
                    std::invalid_argument);
  }
}

TEST_CASE("ward clustering") {
  SUBCASE("nearest pair merges first") {
    const std::vector<Point> line = {{0.0}, {1.0}, {10.0}};
    const Dendrogram d = ward_cluster(line);
    REQUIRE(d.merges.size() == 2);
    CHECK(d.merges[0].a == 0);
    CHECK(d.merges[0].b == 1);
    CHECK(d.merges[0].height == doctest::Approx(1.0));  // squared distance
  }
  SUBCASE("pair merge height is the squared distance") {
    const std::vector<Point> pair = {{0.0, 0.0}, {3.0, 4.0}};
    const Dendrogram d = ward_cluster(pair);
    REQUIRE(d.merges.size() == 1);
    CHECK(d.merges[0].height == doctest::Approx(25.0));
    CHECK(d.merges[0].size == 2);
  }
  SUBCASE("three blobs recovered exactly at k = 3") {
    std::mt19937_64 gen(139);
    std::vector<Point> points;
    std::vector<int> truth;
    const Point centers[3] = {{0.0, 0.0}, {40.0, 0.0}, {0.0, 40.0}};
    for (int c = 0; c < 3; ++c) {
      const auto blob = gaussian_blob(gen, centers[c], 0.5, 6);
      points.insert(points.end(), blob.begin(), blob.end());
      for (int k = 0; k < 6; ++k) truth.push_back(c);
    }
    const auto labels = cut_clusters(ward_cluster(points), 3);
    CHECK(testutil::adjusted_rand_index(labels, truth) == doctest::Approx(1.0));
  }
  SUBCASE("linkage heights are monotone") {
    std::mt19937_64 gen(149);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Point> points;
      const int n = 5 + int(testutil::uniform01(gen) * 20);
      for (int k = 0; k < n; ++k)
        points.push_back({testutil::uniform01(gen) * 10, testutil::uniform01(gen) * 10,
                          testutil::uniform01(gen) * 10});
      const Dendrogram d = ward_cluster(points);
      REQUIRE(int(d.merges.size()) == n - 1);
      for (std::size_t m = 1; m < d.merges.size(); ++m)
        CHECK(d.merges[m].height >= d.merges[m - 1].height - 1e-9);
    }
  }
}

TEST_CASE("dbscan") {
  std::mt19937_64 gen(151);
  auto points = gaussian_blob(gen, {0.0, 0.0}, 0.3, 8);
  const auto second = gaussian_blob(gen, {10.0, 0.0}, 0.3, 8);
  points.insert(points.end(), second.begin(), second.end());
  points.push_back({100.0, 100.0});  // isolated

  SUBCASE("two blobs plus noise") {
    const auto labels = dbscan(points, 2.0, 3);
    CHECK(labels[16] == -1);
    CHECK(labels[0] >= 0);
    CHECK(labels[8] >= 0);
    CHECK(labels[0] != labels[8]);
    for (int k = 1; k < 8; ++k) CHECK(labels[std::size_t(k)] == labels[0]);
    for (int k = 9; k < 16; ++k) CHECK(labels[std::size_t(k)] == labels[8]);
  }
  SUBCASE("huge eps merges everything") {
    const auto labels = dbscan(points, 1e6, 3);
    for (int l : labels) CHECK(l == 0);
  }
  SUBCASE("min_pts = 1 leaves no noise") {
    const auto labels = dbscan(points, 0.05, 1);
    for (int l : labels) CHECK(l >= 0);
  }
  SUBCASE("order permutation only renames labels") {
    const auto labels = dbscan(points, 2.0, 3);
    std::vector<std::size_t> perm(points.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<Point> shuffled;
    for (std::size_t idx : perm) shuffled.push_back(points[idx]);
    const auto relabeled = dbscan(shuffled, 2.0, 3);
    std::vector<int> mapped(points.size());
    for (std::size_t k = 0; k < perm.size(); ++k) mapped[perm[k]] = relabeled[k];
    // noise stays noise and co-membership is preserved
    for (std::size_t i = 0; i < points.size(); ++i)
      CHECK((labels[i] == -1) == (mapped[i] == -1));
    CHECK(testutil::adjusted_rand_index(labels, mapped) == doctest::Approx(1.0));
  }
  SUBCASE("elbow default separates dense scale from outliers") {
    const double eps = dbscan_eps_elbow(points, 3);
    const auto labels = dbscan(points, eps, 3);
    CHECK(labels[16] == -1);
    CHECK(labels[0] != labels[8]);
    CHECK(labels[0] >= 0);
  }
  CHECK_THROWS_AS(dbscan(points, 0.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(dbscan(points, 1.0, 0), std::invalid_argument);
}
