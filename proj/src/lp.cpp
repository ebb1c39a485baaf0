#include "copush/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace copush::lp {

namespace {

constexpr double kEps = 1e-9;

// Tableau layout: rows = constraints (all equalities after adding slacks),
// columns = structural vars | slack vars | artificial vars | rhs.
struct Tableau {
  std::vector<std::vector<double>> t;  // m rows
  std::vector<int> basis;              // basic column per row
  int cols = 0;

  double& at(int r, int c) { return t[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]; }
  double at(int r, int c) const { return t[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]; }
};

void pivot(Tableau& tab, std::vector<double>& obj, double& obj_rhs, int pr,
           int pc) {
  const int m = static_cast<int>(tab.t.size());
  const int n = tab.cols;
  double pv = tab.at(pr, pc);
  for (int c = 0; c <= n; ++c) tab.at(pr, c) /= pv;
  for (int r = 0; r < m; ++r) {
    if (r == pr) continue;
    double f = tab.at(r, pc);
    if (std::abs(f) < 1e-14) continue;
    for (int c = 0; c <= n; ++c) tab.at(r, c) -= f * tab.at(pr, c);
  }
  double f = obj[static_cast<std::size_t>(pc)];
  if (std::abs(f) > 1e-14) {
    for (int c = 0; c < n; ++c)
      obj[static_cast<std::size_t>(c)] -= f * tab.at(pr, c);
    obj_rhs -= f * tab.at(pr, n);
  }
  tab.basis[static_cast<std::size_t>(pr)] = pc;
}

// Simplex loop with Bland's rule (smallest eligible column / row index),
// which guarantees termination on these tiny degenerate problems.
Status run_simplex(Tableau& tab, std::vector<double>& obj, double& obj_rhs,
                   int usable_cols) {
  const int m = static_cast<int>(tab.t.size());
  for (int iter = 0; iter < 20000; ++iter) {
    int pc = -1;
    for (int c = 0; c < usable_cols; ++c) {
      if (obj[static_cast<std::size_t>(c)] < -kEps) {
        pc = c;
        break;
      }
    }
    if (pc < 0) return Status::kOptimal;
    int pr = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < m; ++r) {
      double a = tab.at(r, pc);
      if (a > kEps) {
        double ratio = tab.at(r, tab.cols) / a;
        if (ratio < best - kEps ||
            (ratio < best + kEps &&
             (pr < 0 || tab.basis[static_cast<std::size_t>(r)] <
                            tab.basis[static_cast<std::size_t>(pr)]))) {
          best = ratio;
          pr = r;
        }
      }
    }
    if (pr < 0) return Status::kUnbounded;
    pivot(tab, obj, obj_rhs, pr, pc);
  }
  throw std::runtime_error("simplex failed to converge");
}

}  // namespace

Result solve(const std::vector<double>& c,
             const std::vector<std::vector<double>>& a_ub,
             const std::vector<double>& b_ub,
             const std::vector<std::vector<double>>& a_eq,
             const std::vector<double>& b_eq) {
  const int n = static_cast<int>(c.size());
  const int m_ub = static_cast<int>(a_ub.size());
  const int m_eq = static_cast<int>(a_eq.size());
  const int m = m_ub + m_eq;

  // Columns: n structural + m_ub slacks + m artificials + rhs.
  const int slack0 = n;
  const int art0 = n + m_ub;
  const int ncols = n + m_ub + m;

  Tableau tab;
  tab.cols = ncols;
  tab.t.assign(static_cast<std::size_t>(m),
               std::vector<double>(static_cast<std::size_t>(ncols + 1), 0.0));
  tab.basis.assign(static_cast<std::size_t>(m), -1);

  for (int r = 0; r < m_ub; ++r) {
    double rhs = b_ub[static_cast<std::size_t>(r)];
    double sgn = rhs < 0.0 ? -1.0 : 1.0;  // keep rhs nonnegative
    for (int j = 0; j < n; ++j)
      tab.at(r, j) = sgn * a_ub[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
    tab.at(r, slack0 + r) = sgn;  // slack keeps <= direction
    tab.at(r, ncols) = sgn * rhs;
  }
  for (int r = 0; r < m_eq; ++r) {
    double rhs = b_eq[static_cast<std::size_t>(r)];
    double sgn = rhs < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j)
      tab.at(m_ub + r, j) =
          sgn * a_eq[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
    tab.at(m_ub + r, ncols) = sgn * rhs;
  }

  // Start from an artificial basis everywhere; phase 1 drives it out. For
  // <= rows with positive slack sign the slack could serve directly, but a
  // uniform artificial start keeps the bookkeeping simple.
  for (int r = 0; r < m; ++r) {
    tab.at(r, art0 + r) = 1.0;
    tab.basis[static_cast<std::size_t>(r)] = art0 + r;
  }

  // Phase 1: minimize sum of artificials.
  std::vector<double> obj1(static_cast<std::size_t>(ncols), 0.0);
  double obj1_rhs = 0.0;
  for (int r = 0; r < m; ++r) obj1[static_cast<std::size_t>(art0 + r)] = 1.0;
  // Express the objective in terms of non-basic columns.
  for (int r = 0; r < m; ++r) {
    for (int cidx = 0; cidx < ncols; ++cidx)
      obj1[static_cast<std::size_t>(cidx)] -= tab.at(r, cidx);
    obj1_rhs -= tab.at(r, ncols);
  }
  Status s1 = run_simplex(tab, obj1, obj1_rhs, ncols);
  if (s1 == Status::kUnbounded) return {Status::kInfeasible, 0.0, {}};
  if (-obj1_rhs > 1e-7) return {Status::kInfeasible, 0.0, {}};

  // Pivot any artificials still basic (at zero level) out of the basis.
  for (int r = 0; r < m; ++r) {
    if (tab.basis[static_cast<std::size_t>(r)] >= art0) {
      int pc = -1;
      for (int cidx = 0; cidx < art0; ++cidx) {
        if (std::abs(tab.at(r, cidx)) > 1e-7) {
          pc = cidx;
          break;
        }
      }
      if (pc >= 0) {
        double dummy = 0.0;
        std::vector<double> zero(static_cast<std::size_t>(ncols), 0.0);
        pivot(tab, zero, dummy, r, pc);
      }
      // A row with no eligible pivot is redundant; its artificial stays
      // basic at zero, which is harmless for phase 2.
    }
  }

  // Phase 2: original objective, artificial columns frozen out.
  std::vector<double> obj2(static_cast<std::size_t>(ncols), 0.0);
  double obj2_rhs = 0.0;
  for (int j = 0; j < n; ++j) obj2[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j)];
  for (int r = 0; r < m; ++r) {
    int b = tab.basis[static_cast<std::size_t>(r)];
    double f = (b < ncols) ? obj2[static_cast<std::size_t>(b)] : 0.0;
    if (std::abs(f) > 1e-14) {
      for (int cidx = 0; cidx < ncols; ++cidx)
        obj2[static_cast<std::size_t>(cidx)] -= f * tab.at(r, cidx);
      obj2_rhs -= f * tab.at(r, ncols);
    }
  }
  Status s2 = run_simplex(tab, obj2, obj2_rhs, art0);
  if (s2 == Status::kUnbounded) return {Status::kUnbounded, 0.0, {}};

  Result res;
  res.status = Status::kOptimal;
  res.x.assign(static_cast<std::size_t>(n), 0.0);
  for (int r = 0; r < m; ++r) {
    int b = tab.basis[static_cast<std::size_t>(r)];
    if (b >= 0 && b < n) res.x[static_cast<std::size_t>(b)] = tab.at(r, ncols);
  }
  double obj_val = 0.0;
  for (int j = 0; j < n; ++j) obj_val += c[static_cast<std::size_t>(j)] * res.x[static_cast<std::size_t>(j)];
  res.objective = obj_val;
  return res;
}

}  // namespace copush::lp
