#include "sif/assignment.hpp"

#include <limits>
#include <stdexcept>

namespace sif {
namespace {

// Shortest augmenting path with row/column potentials. Requires n <= m.
// Indices are 1-based internally; column 0 is the virtual source.
std::vector<long> hungarian_rows_le_cols(std::span<const double> cost, std::size_t n,
                                         std::size_t m) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> match_col(m + 1, 0), way(m + 1, 0);

  for (std::size_t i = 1; i <= n; ++i) {
    match_col[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match_col[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        // strict comparison keeps the lowest column on ties
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<long> row_to_col(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (match_col[j] != 0) row_to_col[match_col[j] - 1] = static_cast<long>(j - 1);
  }
  return row_to_col;
}

}  // namespace

std::vector<long> solve_min_cost_assignment(std::span<const double> cost, std::size_t rows,
                                            std::size_t cols) {
  if (cost.size() != rows * cols) {
    throw std::invalid_argument("cost matrix size does not match shape");
  }
  if (rows == 0 || cols == 0) return std::vector<long>(rows, -1);
  if (rows <= cols) return hungarian_rows_le_cols(cost, rows, cols);

  std::vector<double> transposed(cost.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) transposed[c * rows + r] = cost[r * cols + c];
  }
  const auto col_to_row = hungarian_rows_le_cols(transposed, cols, rows);
  std::vector<long> row_to_col(rows, -1);
  for (std::size_t c = 0; c < cols; ++c) {
    row_to_col[static_cast<std::size_t>(col_to_row[c])] = static_cast<long>(c);
  }
  return row_to_col;
}

}  // namespace sif
