#pragma once

// Dense two-phase simplex for the small linear programs that show up in
// contact reasoning (feasibility losses, positive-span certificates, twist
// decompositions). Problems have tens of variables at most, so a plain
// tableau with Bland's rule is simpler and more predictable than pulling in
// an external solver.

#include <vector>

namespace copush::lp {

enum class Status { kOptimal, kInfeasible, kUnbounded };

struct Result {
  Status status = Status::kInfeasible;
  double objective = 0.0;
  std::vector<double> x;
};

/// Minimize c'x subject to A_ub x <= b_ub, A_eq x = b_eq, x >= 0.
/// Either constraint block may be empty. Matrices are row-major:
/// A_ub[i] is one row of length |c|.
Result solve(const std::vector<double>& c,
             const std::vector<std::vector<double>>& a_ub,
             const std::vector<double>& b_ub,
             const std::vector<std::vector<double>>& a_eq,
             const std::vector<double>& b_eq);

}  // namespace copush::lp
