#pragma once

#include <cstddef>
#include <vector>

#include "loctime/grid.hpp"

namespace loctime {

/// Thomas elimination. No pivoting: callers only pass diagonally dominant
/// systems (backward-Euler / Crank-Nicolson steps, lambda-shifted
/// generators), where the recurrence cannot break down.
inline std::vector<double> solve_tridiagonal(const std::vector<double>& lower,
                                             std::vector<double> diag,
                                             const std::vector<double>& upper,
                                             std::vector<double> rhs) {
  const std::size_t n = diag.size();
  if (n == 0 || lower.size() != n - 1 || upper.size() != n - 1 ||
      rhs.size() != n)
    throw ValidationError("solve_tridiagonal: band sizes do not match");
  for (std::size_t i = 1; i < n; ++i) {
    if (diag[i - 1] == 0.0)
      throw NumericalError("solve_tridiagonal: zero pivot at row " +
                           std::to_string(i - 1));
    const double m = lower[i - 1] / diag[i - 1];
    diag[i] -= m * upper[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  if (diag[n - 1] == 0.0)
    throw NumericalError("solve_tridiagonal: zero pivot at last row");
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;)
    rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
  return rhs;
}

}  // namespace loctime
