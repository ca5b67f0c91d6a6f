// Minimal dense LU solver. The chains here top out around a hundred
// states, so a partial-pivot LU is all we need.
#pragma once

#include <vector>

namespace sml::linalg {

// Solves A x = b in place (A row-major n*n, overwritten). Returns false
// when a pivot collapses below the singularity threshold.
bool solve_inplace(std::vector<double>& a, std::vector<double>& b, int n);

}  // namespace sml::linalg
