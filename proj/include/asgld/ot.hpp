#pragma once

#include <vector>

#include "asgld/types.hpp"

namespace asgld::ot {

// Exact minimum-cost perfect matching on a dense square cost matrix
// (shortest augmenting paths with dual potentials, O(n^3)).
// Returns the matched column for each row.
std::vector<int> solve_assignment(const Matrix& cost);

double assignment_cost(const Matrix& cost, const std::vector<int>& row_to_col);

// Optimal transport objective between discrete measures: cost is n x m,
// supplies and demands are nonnegative and sum to the same total mass.
// Solved as a transportation problem by successive shortest paths.
double transport_cost(const Matrix& cost, const Vector& supply,
                      const Vector& demand);

}  // namespace asgld::ot
