#include <cmath>
#include <random>

#include "ctce/assignment.hpp"
#include "doctest.h"

using namespace ctce;

TEST_CASE("trivial assignment cases") {
  // diagonal optimum
  std::vector<double> cost = {0, 5, 5, 5, 0, 5, 5, 5, 0};
  auto a = min_cost_assignment(cost, 3, 3);
  for (int i = 0; i < 3; ++i) CHECK(a[i] == i);
  CHECK(assignment_cost(cost, 3, 3, a) == 0.0);

  auto empty = min_cost_assignment({}, 0, 0);
  CHECK(empty.empty());
}

TEST_CASE("rectangular matrices leave the excess side unassigned") {
  std::vector<double> cost = {1, 2, 3, 4, 5, 6};  // 3 rows x 2 cols
  auto a = min_cost_assignment(cost, 3, 2);
  int assigned = 0;
  for (int c : a) assigned += (c >= 0);
  CHECK(assigned == 2);
  CHECK(assignment_cost(cost, 3, 2, a) ==
        doctest::Approx(brute_force_assignment_cost(cost, 3, 2)));
}

TEST_CASE("random instances match brute force") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> d(0.0, 10.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 7);
    const int m = 1 + static_cast<int>(rng() % 7);
    std::vector<double> cost(static_cast<size_t>(n) * m);
    for (auto& c : cost) c = d(rng);
    auto a = min_cost_assignment(cost, n, m);

    // one-to-one and full on the smaller side
    std::vector<int> used(m, 0);
    int assigned = 0;
    for (int c : a)
      if (c >= 0) {
        CHECK(used[c] == 0);
        used[c] = 1;
        ++assigned;
      }
    CHECK(assigned == std::min(n, m));
    CHECK(std::fabs(assignment_cost(cost, n, m, a) -
                    brute_force_assignment_cost(cost, n, m)) < 1e-9);
  }
}
