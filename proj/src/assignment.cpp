#include "ctce/assignment.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace ctce {

namespace {

// Potentials form for n <= m; 1-based internal indexing.
std::vector<int> solve_rows_le_cols(const std::vector<double>& cost, int n, int m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[static_cast<size_t>(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

std::vector<int> min_cost_assignment(const std::vector<double>& cost, int n, int m) {
  if (n < 0 || m < 0 || cost.size() != static_cast<size_t>(n) * m)
    throw std::invalid_argument("min_cost_assignment: bad matrix size");
  if (n == 0 || m == 0) return std::vector<int>(n, -1);
  if (n <= m) return solve_rows_le_cols(cost, n, m);
  // transpose and invert the mapping
  std::vector<double> t(cost.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) t[static_cast<size_t>(j) * n + i] = cost[static_cast<size_t>(i) * m + j];
  const std::vector<int> col_to_row = solve_rows_le_cols(t, m, n);
  std::vector<int> row_to_col(n, -1);
  for (int j = 0; j < m; ++j)
    if (col_to_row[j] >= 0) row_to_col[col_to_row[j]] = j;
  return row_to_col;
}

double assignment_cost(const std::vector<double>& cost, int n, int m,
                       const std::vector<int>& row_to_col) {
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    if (row_to_col[i] >= 0) total += cost[static_cast<size_t>(i) * m + row_to_col[i]];
  return total;
}

namespace {

void enumerate(const std::vector<double>& cost, int n, int m, int row, double acc,
               std::vector<char>& used_col, int assigned, int need, double& best) {
  if (assigned == need) {
    best = std::min(best, acc);
    return;
  }
  if (row == n) return;
  const int remaining_rows = n - row;
  if (assigned + remaining_rows < need) return;
  for (int j = 0; j < m; ++j) {
    if (used_col[j]) continue;
    used_col[j] = true;
    enumerate(cost, n, m, row + 1, acc + cost[static_cast<size_t>(row) * m + j], used_col,
              assigned + 1, need, best);
    used_col[j] = false;
  }
  // leaving this row unassigned is only legal when enough rows remain
  if (assigned + remaining_rows - 1 >= need)
    enumerate(cost, n, m, row + 1, acc, used_col, assigned, need, best);
}

}  // namespace

double brute_force_assignment_cost(const std::vector<double>& cost, int n, int m) {
  const int need = std::min(n, m);
  double best = std::numeric_limits<double>::infinity();
  std::vector<char> used(m, false);
  enumerate(cost, n, m, 0, 0.0, used, 0, need, best);
  return need == 0 ? 0.0 : best;
}

}  // namespace ctce
