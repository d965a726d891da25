#pragma once

// Optimal and ranked (Murty) linear assignment on rectangular cost matrices.
//
// Rows are assigned to distinct columns; +infinity marks a forbidden pair.

#include "plmb/possibility.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace plmb {

/// Rows are tracks, columns are measurements followed by per-track miss
/// columns (and, for the joint update, per-track absence columns).
/// Entries are negative log-possibilities; +inf forbids a pair.
using AssociationCostMatrix = Matrix;

struct Assignment {
  std::vector<int> row_to_col;  ///< column chosen by each row
  double cost = 0.0;
};

/// Minimum-cost assignment of every row to a distinct column.
/// Returns nullopt when no finite-cost assignment exists.
/// Throws ArgumentError if there are more rows than columns or a cost is NaN / -inf.
[[nodiscard]] std::optional<Assignment> solve_assignment(const AssociationCostMatrix& cost);

/// The k cheapest distinct assignments in non-decreasing cost order (fewer if
/// fewer exist). Ties are resolved deterministically. Throws ArgumentError if k < 1.
[[nodiscard]] std::vector<Assignment> ranked_assignments(const AssociationCostMatrix& cost, std::size_t k);

}  // namespace plmb
