#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sif {

/// Minimum-cost rectangular assignment (Kuhn-Munkres with potentials).
///
/// `cost` is row-major with shape rows x cols. Returns, for every row, the
/// column assigned to it, or -1 when rows > cols and the row is left
/// unassigned. Exactly min(rows, cols) rows receive a column.
std::vector<long> solve_min_cost_assignment(std::span<const double> cost, std::size_t rows,
                                            std::size_t cols);

}  // namespace sif
