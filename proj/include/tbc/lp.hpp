#pragma once

// Dense bounded-variable primal simplex, two-phase with explicit artificials.
//
// Every row is turned into an equality by a logical column (a slack with
// bounds [0, inf) for <= rows, [0, 0] for = rows). The start basis is all
// logicals; rows whose logical would start outside its bounds get an
// artificial column instead, and phase 1 minimizes the artificial sum.
// Pricing is Dantzig with lowest-index tie-break, switching to Bland's rule
// after a degeneracy stall to guarantee termination. Reduced costs are
// maintained incrementally and refreshed from scratch at phase boundaries.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "tbc/common.hpp"

namespace tbc {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::Optimal;
  std::vector<double> x;  // structural variable values
  double objective = 0.0;
  long iterations = 0;
};

// min c^T x, rows A x (<=|=) b, lb <= x <= ub (ub may be +inf).
struct LpProblem {
  struct Row {
    std::vector<std::pair<int, double>> terms;
    bool equality = false;
    double rhs = 0.0;
  };
  int n = 0;
  std::vector<double> c, lb, ub;
  std::vector<Row> rows;
};

class SimplexSolver {
 public:
  explicit SimplexSolver(const LpProblem& p) : p_(p) { build(); }

  LpResult solve() {
    LpResult res;
    if (need_phase1_) {
      const int st = run(/*phase1=*/true);
      if (st != 0) {
        res.status = st == 2 ? LpStatus::IterationLimit : LpStatus::Unbounded;
        res.iterations = iterations_;
        return res;
      }
      if (phase1_objective() > kFeasTol * std::max(1.0, art_scale_)) {
        res.status = LpStatus::Infeasible;
        res.iterations = iterations_;
        return res;
      }
      // Artificials are pinned at zero for phase 2. They can never re-enter
      // the basis, and their reduced costs are never used again, so all
      // column maintenance stops at active_cols_ from here on. A degenerate
      // artificial may still be basic at zero; it leaves by row, which reads
      // only the entering column.
      for (int j : artificials_) {
        ub_[j] = 0.0;
        if (status_[j] == kNonbasicUpper) status_[j] = kNonbasicLower;
      }
      active_cols_ = ncols_ - static_cast<int>(artificials_.size());
    }
    phase1_ = false;
    refresh_reduced_costs();
    const int st = run(/*phase1=*/false);
    res.iterations = iterations_;
    if (st == 1) {
      res.status = LpStatus::Unbounded;
      return res;
    }
    if (st == 2) {
      res.status = LpStatus::IterationLimit;
      return res;
    }
    res.status = LpStatus::Optimal;
    res.x.assign(p_.n, 0.0);
    for (int j = 0; j < p_.n; ++j) res.x[j] = value_of(j);
    res.objective = 0.0;
    for (int j = 0; j < p_.n; ++j) res.objective += p_.c[j] * res.x[j];
    return res;
  }

 private:
  static constexpr double kFeasTol = 1e-9;
  static constexpr double kOptTol = 1e-9;
  static constexpr double kPivotTol = 1e-9;
  static constexpr double kTieTol = 1e-12;
  static constexpr std::int8_t kBasic = 0;
  static constexpr std::int8_t kNonbasicLower = 1;
  static constexpr std::int8_t kNonbasicUpper = 2;

  const LpProblem& p_;
  int m_ = 0;            // rows
  int ncols_ = 0;        // structurals + logicals + artificials
  int active_cols_ = 0;  // columns still maintained (all, until phase 2)
  bool need_phase1_ = false;
  bool phase1_ = true;
  double art_scale_ = 1.0;

  std::vector<double> tableau_;  // m x ncols, B^-1 * A
  std::vector<double> xb_;       // basic variable values, per row
  std::vector<int> basis_;       // column basic in each row
  std::vector<int> row_of_;      // row a column is basic in, -1 if nonbasic
  std::vector<std::int8_t> status_;
  std::vector<double> lb_, ub_, cost_, phase1_cost_;
  std::vector<double> dj_;  // reduced costs of the active phase
  std::vector<int> artificials_;
  long iterations_ = 0;
  long max_iterations_ = 0;
  bool bland_ = false;
  long degenerate_streak_ = 0;

  double& tab(int r, int c) { return tableau_[static_cast<std::size_t>(r) * ncols_ + c]; }
  const double& tab(int r, int c) const {
    return tableau_[static_cast<std::size_t>(r) * ncols_ + c];
  }

  double value_of(int j) const {
    if (status_[j] == kNonbasicLower) return lb_[j];
    if (status_[j] == kNonbasicUpper) return ub_[j];
    return xb_[row_of_[j]];
  }

  double phase1_objective() const {
    double s = 0.0;
    for (int r = 0; r < m_; ++r) s += phase1_cost_[basis_[r]] * xb_[r];
    return s;
  }

  void build() {
    m_ = static_cast<int>(p_.rows.size());
    const int n_struct = p_.n;
    const int n_logical = m_;
    std::vector<double> x0(n_struct);
    for (int j = 0; j < n_struct; ++j) x0[j] = p_.lb[j];

    std::vector<double> residual(m_);
    for (int r = 0; r < m_; ++r) {
      double lhs = 0.0;
      for (const auto& [j, a] : p_.rows[r].terms) lhs += a * x0[j];
      residual[r] = p_.rows[r].rhs - lhs;
    }

    std::vector<int> art_col(m_, -1);
    int n_art = 0;
    for (int r = 0; r < m_; ++r) {
      const bool eq = p_.rows[r].equality;
      const double res = residual[r];
      const bool logical_ok = eq ? std::abs(res) <= kFeasTol : res >= -kFeasTol;
      if (!logical_ok) art_col[r] = n_art++;
    }
    need_phase1_ = n_art > 0;
    ncols_ = n_struct + n_logical + n_art;
    active_cols_ = ncols_;

    tableau_.assign(static_cast<std::size_t>(m_) * ncols_, 0.0);
    lb_.assign(ncols_, 0.0);
    ub_.assign(ncols_, 0.0);
    cost_.assign(ncols_, 0.0);
    phase1_cost_.assign(ncols_, 0.0);
    status_.assign(ncols_, kNonbasicLower);
    basis_.assign(m_, -1);
    row_of_.assign(ncols_, -1);
    xb_.assign(m_, 0.0);

    for (int j = 0; j < n_struct; ++j) {
      lb_[j] = p_.lb[j];
      ub_[j] = p_.ub[j];
      cost_[j] = p_.c[j];
    }
    for (int r = 0; r < m_; ++r) {
      for (const auto& [j, a] : p_.rows[r].terms) tab(r, j) += a;
      const int logical = n_struct + r;
      tab(r, logical) = 1.0;
      lb_[logical] = 0.0;
      ub_[logical] =
          p_.rows[r].equality ? 0.0 : std::numeric_limits<double>::infinity();
      const double res = residual[r];
      if (art_col[r] < 0) {
        set_basic(logical, r, res);
      } else {
        // Rows with negative residual are negated so the starting basis of
        // unit artificial columns is the identity.
        if (res < 0.0)
          for (int j = 0; j < ncols_; ++j) tab(r, j) = -tab(r, j);
        const int acol = n_struct + n_logical + art_col[r];
        tab(r, acol) = 1.0;
        lb_[acol] = 0.0;
        ub_[acol] = std::numeric_limits<double>::infinity();
        phase1_cost_[acol] = 1.0;
        set_basic(acol, r, std::abs(res));
        artificials_.push_back(acol);
        art_scale_ = std::max(art_scale_, std::abs(res));
      }
    }
    phase1_ = need_phase1_;
    max_iterations_ = 200L * (m_ + ncols_) + 20000L;
    refresh_reduced_costs();
  }

  void set_basic(int col, int row, double value) {
    basis_[row] = col;
    row_of_[col] = row;
    status_[col] = kBasic;
    xb_[row] = value;
  }

  const std::vector<double>& active_cost() const { return phase1_ ? phase1_cost_ : cost_; }

  void refresh_reduced_costs() {
    const auto& c = active_cost();
    dj_.assign(ncols_, 0.0);
    std::vector<double> cb(m_);
    for (int r = 0; r < m_; ++r) cb[r] = c[basis_[r]];
    for (int j = 0; j < active_cols_; ++j) {
      if (status_[j] == kBasic) continue;
      double d = c[j];
      for (int r = 0; r < m_; ++r) {
        const double a = tab(r, j);
        if (a != 0.0) d -= cb[r] * a;
      }
      dj_[j] = d;
    }
    bland_ = false;
    degenerate_streak_ = 0;
  }

  // Returns 0 = phase optimal, 1 = unbounded, 2 = iteration limit.
  int run(bool phase1) {
    phase1_ = phase1;
    while (true) {
      if (++iterations_ > max_iterations_) return 2;

      // Pricing. Fixed columns (lb == ub) never enter.
      int enter = -1;
      double best = -kOptTol;
      for (int j = 0; j < active_cols_; ++j) {
        if (status_[j] == kBasic || lb_[j] == ub_[j]) continue;
        const double improve = status_[j] == kNonbasicLower ? dj_[j] : -dj_[j];
        if (improve < -kOptTol) {
          if (bland_) {
            enter = j;
            break;
          }
          if (improve < best) {
            best = improve;
            enter = j;
          }
        }
      }
      if (enter < 0) return 0;

      const int sigma = status_[enter] == kNonbasicLower ? 1 : -1;

      // Ratio test: step t >= 0 moves enter off its bound by sigma * t and
      // each basic r by -sigma * tab(r, enter) * t.
      double t_max = ub_[enter] - lb_[enter];
      int leave_row = -1;  // stays -1 for a plain bound flip
      bool leave_at_upper = false;
      double leave_pivot = 0.0;
      for (int r = 0; r < m_; ++r) {
        const double a = tab(r, enter);
        if (std::abs(a) <= kPivotTol) continue;
        const double delta = sigma * a;
        const int bj = basis_[r];
        double limit;
        bool hits_upper;
        if (delta > 0.0) {
          limit = (xb_[r] - lb_[bj]) / delta;
          hits_upper = false;
        } else {
          if (ub_[bj] == std::numeric_limits<double>::infinity()) continue;
          limit = (ub_[bj] - xb_[r]) / (-delta);
          hits_upper = true;
        }
        if (limit < 0.0) limit = 0.0;
        bool take = false;
        if (limit < t_max - kTieTol) {
          take = true;
        } else if (leave_row >= 0 && limit <= t_max + kTieTol) {
          take = bland_ ? bj < basis_[leave_row] : std::abs(a) > std::abs(leave_pivot);
        }
        if (take) {
          t_max = std::min(t_max, limit);
          leave_row = r;
          leave_at_upper = hits_upper;
          leave_pivot = a;
        }
      }

      if (leave_row < 0) {
        if (t_max == std::numeric_limits<double>::infinity()) return 1;
        // Bound flip: enter jumps to its other bound, basics absorb the step.
        const double step = sigma * t_max;
        for (int r = 0; r < m_; ++r) {
          const double a = tab(r, enter);
          if (a != 0.0) xb_[r] -= a * step;
        }
        status_[enter] = sigma > 0 ? kNonbasicUpper : kNonbasicLower;
        note_step(t_max);
        continue;
      }

      pivot(leave_row, enter, sigma, t_max, leave_at_upper);
      note_step(t_max);
    }
  }

  void pivot(int r, int enter, int sigma, double t, bool leaving_to_upper) {
    const int leave = basis_[r];
    for (int i = 0; i < m_; ++i) {
      const double a = tab(i, enter);
      if (a != 0.0) xb_[i] -= a * sigma * t;
    }
    const double enter_val = (sigma > 0 ? lb_[enter] : ub_[enter]) + sigma * t;

    const double piv = tab(r, enter);
    if (std::abs(piv) <= kPivotTol) throw numeric_error("pivot element vanished");
    const double inv = 1.0 / piv;
    for (int j = 0; j < active_cols_; ++j) tab(r, j) *= inv;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      const double f = tab(i, enter);
      if (f == 0.0) continue;
      double* __restrict row_i = &tableau_[static_cast<std::size_t>(i) * ncols_];
      const double* __restrict row_r = &tableau_[static_cast<std::size_t>(r) * ncols_];
      for (int j = 0; j < active_cols_; ++j) row_i[j] -= f * row_r[j];
      row_i[enter] = 0.0;
    }

    basis_[r] = enter;
    row_of_[enter] = r;
    row_of_[leave] = -1;
    status_[enter] = kBasic;
    status_[leave] = leaving_to_upper ? kNonbasicUpper : kNonbasicLower;
    xb_[r] = enter_val;

    // Incremental reduced-cost update with the scaled pivot row; the leaving
    // column is recomputed exactly to limit drift.
    const double dq = dj_[enter];
    if (dq != 0.0)
      for (int j = 0; j < active_cols_; ++j) dj_[j] -= dq * tab(r, j);
    dj_[enter] = 0.0;
    dj_[leave] = leave < active_cols_ ? exact_reduced_cost(leave) : 0.0;
  }

  double exact_reduced_cost(int col) const {
    const auto& c = active_cost();
    double d = c[col];
    for (int i = 0; i < m_; ++i) {
      const double a = tab(i, col);
      if (a != 0.0) d -= c[basis_[i]] * a;
    }
    return d;
  }

  void note_step(double t) {
    if (t > kTieTol) {
      degenerate_streak_ = 0;
    } else if (!bland_ && ++degenerate_streak_ > 2L * (m_ + ncols_) + 50) {
      bland_ = true;
    }
  }
};

inline LpResult solve_lp(const LpProblem& p) {
  SimplexSolver solver(p);
  return solver.solve();
}

}  // namespace tbc
