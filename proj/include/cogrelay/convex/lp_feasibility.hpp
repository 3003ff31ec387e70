// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "cogrelay/common.hpp"

namespace cogrelay::convex {

/// { x >= 0 : A x <= b }, dense rows.
struct LinearFeasibilityProblem {
  std::size_t num_vars = 0;
  std::vector<std::vector<double>> rows;  // each of length num_vars
  std::vector<double> rhs;
  double tolerance = 1e-9;  // applied to rows scaled to unit max-norm

  std::size_t add_row(std::vector<double> a, double b) {
    if (a.size() != num_vars) throw InvalidInput("lp row has wrong length");
    rows.push_back(std::move(a));
    rhs.push_back(b);
    return rows.size() - 1;
  }
};

struct LpResult {
  bool feasible = false;
  std::vector<double> witness;  // valid when feasible
  std::size_t pivots = 0;
};

namespace detail {

/// Phase-1 simplex on the standard-form tableau with Bland's rule.
class Phase1Tableau {
 public:
  Phase1Tableau(const LinearFeasibilityProblem& p, const std::vector<double>& scale) {
    m_ = p.rows.size();
    n_ = p.num_vars;
    std::size_t n_art = 0;
    for (std::size_t r = 0; r < m_; ++r)
      if (p.rhs[r] / scale[r] < 0.0) ++n_art;
    cols_ = n_ + m_ + n_art;
    t_.assign((m_ + 1) * (cols_ + 1), 0.0);
    basis_.assign(m_, 0);
    std::size_t art = n_ + m_;
    for (std::size_t r = 0; r < m_; ++r) {
      const double b = p.rhs[r] / scale[r];
      const double sign = b < 0.0 ? -1.0 : 1.0;
      for (std::size_t c = 0; c < n_; ++c) at(r, c) = sign * p.rows[r][c] / scale[r];
      at(r, n_ + r) = sign;
      rhs(r) = sign * b;
      if (b < 0.0) {
        at(r, art) = 1.0;
        basis_[r] = art++;
      } else {
        basis_[r] = n_ + r;
      }
    }
    // Phase-1 cost row: minimize the sum of artificials, expressed in nonbasic columns.
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < n_ + m_) continue;
      for (std::size_t c = 0; c <= cols_; ++c)
        if (c < n_ + m_ || c == cols_) t_[m_ * (cols_ + 1) + c] -= t_[r * (cols_ + 1) + c];
    }
  }

  /// Returns the phase-1 optimum (sum of artificials, >= 0 up to rounding).
  double run(std::size_t max_pivots, std::size_t& pivots) {
    constexpr double kEps = 1e-12;
    for (pivots = 0; pivots < max_pivots; ++pivots) {
      std::size_t enter = cols_;
      for (std::size_t c = 0; c < cols_; ++c)
        if (cost(c) < -kEps) {
          enter = c;
          break;
        }
      if (enter == cols_) return -cost_rhs();
      std::size_t leave = m_;
      double best = 0.0;
      for (std::size_t r = 0; r < m_; ++r) {
        const double a = at(r, enter);
        if (a <= kEps) continue;
        const double ratio = rhs(r) / a;
        if (leave == m_ || ratio < best - 1e-15 ||
            (std::abs(ratio - best) <= 1e-15 && basis_[r] < basis_[leave])) {
          leave = r;
          best = ratio;
        }
      }
      if (leave == m_) throw NumericalError("lp_feasible: unbounded phase-1 direction");
      pivot(leave, enter);
    }
    throw NumericalError("lp_feasible: pivot limit reached");
  }

  std::vector<double> primal() const {
    std::vector<double> x(n_, 0.0);
    for (std::size_t r = 0; r < m_; ++r)
      if (basis_[r] < n_) x[basis_[r]] = std::max(0.0, t_[r * (cols_ + 1) + cols_]);
    return x;
  }

 private:
  double& at(std::size_t r, std::size_t c) { return t_[r * (cols_ + 1) + c]; }
  double& rhs(std::size_t r) { return t_[r * (cols_ + 1) + cols_]; }
  double cost(std::size_t c) const { return t_[m_ * (cols_ + 1) + c]; }
  double cost_rhs() const { return t_[m_ * (cols_ + 1) + cols_]; }

  void pivot(std::size_t pr, std::size_t pc) {
    const std::size_t w = cols_ + 1;
    double* prow = &t_[pr * w];
    const double inv = 1.0 / prow[pc];
    for (std::size_t c = 0; c < w; ++c) prow[c] *= inv;
    prow[pc] = 1.0;
    for (std::size_t r = 0; r <= m_; ++r) {
      if (r == pr) continue;
      double* row = &t_[r * w];
      const double f = row[pc];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < w; ++c) row[c] -= f * prow[c];
      row[pc] = 0.0;
    }
    basis_[pr] = pc;
  }

  std::size_t m_ = 0, n_ = 0, cols_ = 0;
  std::vector<double> t_;
  std::vector<std::size_t> basis_;
};

}  // namespace detail

/// Decide whether some x >= 0 satisfies every row within the scaled tolerance.
/// Rows are scaled to unit max-norm; the witness is re-checked against the tolerated system.
inline LpResult lp_feasible(const LinearFeasibilityProblem& p) {
  if (p.num_vars == 0) throw InvalidInput("lp_feasible: no variables");
  if (p.rows.size() != p.rhs.size()) throw InvalidInput("lp_feasible: rows/rhs size mismatch");
  const std::size_t m = p.rows.size();
  std::vector<double> scale(m, 1.0);
  LinearFeasibilityProblem reduced;
  reduced.num_vars = p.num_vars;
  std::vector<double> red_scale;
  for (std::size_t r = 0; r < m; ++r) {
    if (p.rows[r].size() != p.num_vars) throw InvalidInput("lp_feasible: row length mismatch");
    double s = 0.0;
    for (double a : p.rows[r]) {
      if (!std::isfinite(a)) throw InvalidInput("lp_feasible: non-finite coefficient");
      s = std::max(s, std::abs(a));
    }
    if (!std::isfinite(p.rhs[r])) throw InvalidInput("lp_feasible: non-finite right-hand side");
    scale[r] = s;
    if (s == 0.0) {
      if (p.rhs[r] < -p.tolerance) return {false, {}, 0};
      continue;
    }
    reduced.rows.push_back(p.rows[r]);
    reduced.rhs.push_back(p.rhs[r]);
    red_scale.push_back(s);
  }
  LpResult out;
  if (reduced.rows.empty()) {
    out.feasible = true;
    out.witness.assign(p.num_vars, 0.0);
    return out;
  }
  detail::Phase1Tableau tab(reduced, red_scale);
  const std::size_t max_pivots = 50 * (reduced.rows.size() + p.num_vars) + 1000;
  const double infeas = tab.run(max_pivots, out.pivots);
  if (infeas > p.tolerance * static_cast<double>(reduced.rows.size())) return out;
  out.witness = tab.primal();
  // A near-zero phase-1 optimum must come with a witness that passes the tolerated check.
  double worst = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    if (scale[r] == 0.0) continue;
    double lhs = 0.0;
    for (std::size_t c = 0; c < p.num_vars; ++c) lhs += p.rows[r][c] * out.witness[c];
    worst = std::max(worst, (lhs - p.rhs[r]) / scale[r]);
  }
  if (worst > p.tolerance) {
    if (infeas > 1e-12) return out;  // infeasible beyond rounding
    throw NumericalError("lp_feasible: witness fails the tolerated system");
  }
  out.feasible = true;
  return out;
}

}  // namespace cogrelay::convex
