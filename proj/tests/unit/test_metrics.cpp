#include <doctest.h>

#include <vector>

#include "cludi/metrics.hpp"
#include "cludi/rng.hpp"
#include "oracles.hpp"

using namespace cludi;
using doctest::Approx;

TEST_CASE("frozen small cases") {
  const std::vector<int> truth{0, 0, 1, 1};
  const std::vector<int> cross{0, 1, 0, 1};
  CHECK(accuracy_hungarian(cross, truth) == Approx(0.5));
  CHECK(nmi(cross, truth) == Approx(0.0));
  const std::vector<int> swapped{1, 1, 0, 0};
  CHECK(accuracy_hungarian(swapped, truth) == Approx(1.0));
  CHECK(nmi(swapped, truth) == Approx(1.0));
  CHECK(ari(swapped, truth) == Approx(1.0));
}

TEST_CASE("degenerate partitions") {
  const std::vector<int> one(5, 0);
  const std::vector<int> split{0, 1, 0, 1, 2};
  CHECK(nmi(one, one) == Approx(1.0));
  CHECK(nmi(one, split) == Approx(0.0));
  CHECK(nmi(split, one) == Approx(0.0));
  CHECK(ari(one, one) == Approx(1.0));
  CHECK(accuracy_hungarian(one, split) == Approx(0.4));
}

TEST_CASE("random labelings against exhaustive oracles") {
  RandomStream rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const int N = static_cast<int>(rng.integer(2, 8));
    const int kp = static_cast<int>(rng.integer(1, 4));
    const int kt = static_cast<int>(rng.integer(1, 4));
    std::vector<int> p(N), t(N);
    for (int i = 0; i < N; ++i) {
      p[i] = static_cast<int>(rng.integer(0, kp - 1));
      t[i] = static_cast<int>(rng.integer(0, kt - 1));
    }
    CHECK(accuracy_hungarian(p, t) == Approx(oracle::brute_force_accuracy(p, t)).epsilon(1e-12));
    CHECK(ari(p, t) == Approx(oracle::pair_counting_ari(p, t)).epsilon(1e-10));
    const double v = nmi(p, t);
    CHECK(v >= -1e-12);
    CHECK(v <= 1.0 + 1e-12);
    CHECK(nmi(p, t, NmiNorm::geometric) >= v - 1e-12);
  }
}

TEST_CASE("assignment solver on a rectangular cost") {
  Eigen::MatrixXd cost(2, 3);
  cost << 4, 1, 3, 2, 0, 5;
  const auto a = solve_assignment(cost);
  REQUIRE(a.size() == 2);
  CHECK(cost(0, a[0]) + cost(1, a[1]) == Approx(3.0));
}

TEST_CASE("cluster counting and contingency") {
  const std::vector<int> p{0, 2, 2, 5};
  CHECK(count_clusters(p) == 3);
  const std::vector<int> a{0, 1, 1}, b{1, 1, 0};
  const auto c = contingency(a, b);
  CHECK(c(1, 1) == 1.0);
  CHECK(c(1, 0) == 1.0);
  CHECK(c.sum() == 3.0);
}
