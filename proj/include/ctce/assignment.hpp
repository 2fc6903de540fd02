#pragma once

#include <vector>

namespace ctce {

// Minimum-cost one-to-one assignment (Hungarian algorithm with potentials).
// cost is row-major n x m. Assigns all of the smaller side; returns, per row,
// the assigned column or -1. Runs in O(n^2 m).
std::vector<int> min_cost_assignment(const std::vector<double>& cost, int n, int m);

double assignment_cost(const std::vector<double>& cost, int n, int m,
                       const std::vector<int>& row_to_col);

// Exhaustive-enumeration optimum, usable for min(n, m) <= ~8. Test oracle.
double brute_force_assignment_cost(const std::vector<double>& cost, int n, int m);

}  // namespace ctce
