#pragma once

// Exact MILP solving: LP relaxation, depth-first branch-and-bound with a
// relative tolerance gap, an exhaustive oracle for tiny instances, LP-format
// export, and solution verification.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "tbc/lp.hpp"
#include "tbc/model.hpp"

namespace tbc {

struct SolveConfig {
  double tolerance_gap = 0.001;  // relative
  long node_limit = 2'000'000;
  double time_limit_s = std::numeric_limits<double>::infinity();
};

enum class SolveStatus { Optimal, GapReached, Limit, Infeasible };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::GapReached: return "gap-reached";
    case SolveStatus::Limit: return "limit";
    case SolveStatus::Infeasible: return "infeasible";
  }
  return "?";
}

struct Solution {
  std::vector<double> values;  // per model variable, binaries snapped to 0/1
  double objective = 0.0;
  double bound = 0.0;        // best proven lower bound
  double root_lp = 0.0;      // root relaxation objective
  double gap = 0.0;          // (objective - bound) / max(1, |objective|)
  SolveStatus status = SolveStatus::Optimal;
  long nodes_explored = 0;   // LP solves beyond the root
  long lp_iterations = 0;
  double wall_time_s = 0.0;
};

namespace detail {

constexpr double kIntegralityTol = 1e-6;
constexpr double kConstraintTol = 1e-7;
constexpr double kPruneEps = 1e-10;

inline LpProblem to_lp(const MilpModel& m) {
  LpProblem p;
  p.n = m.num_vars();
  p.c = m.obj;
  p.lb = m.lb;
  p.ub = m.ub;
  p.rows.reserve(m.rows.size());
  for (const auto& r : m.rows) {
    LpProblem::Row row;
    row.terms = r.terms;
    row.equality = r.sense == RowSense::Equal;
    row.rhs = r.rhs;
    p.rows.push_back(std::move(row));
  }
  return p;
}

// Sets every continuous z to its implied tight value given the binaries:
// z >= lhs - rhs for each row carrying it with coefficient -1, and z >= 0.
inline void tighten_continuous(const MilpModel& m, std::vector<double>& v) {
  for (int j = 0; j < m.num_vars(); ++j)
    if (m.kind[j] == VarKind::Continuous) v[j] = 0.0;
  std::vector<double> needed(m.num_vars(), 0.0);
  for (const auto& row : m.rows) {
    int zvar = -1;
    double lhs = 0.0;
    for (const auto& [j, a] : row.terms) {
      if (m.kind[j] == VarKind::Continuous) {
        if (a != -1.0 || zvar >= 0)
          throw integrity_error("continuous variable in unexpected row form");
        zvar = j;
      } else {
        lhs += a * v[j];
      }
    }
    if (zvar >= 0) needed[zvar] = std::max(needed[zvar], lhs - row.rhs);
  }
  for (int j = 0; j < m.num_vars(); ++j)
    if (m.kind[j] == VarKind::Continuous) v[j] = std::max(0.0, needed[j]);
}

inline double objective_of(const MilpModel& m, const std::vector<double>& v) {
  double s = 0.0;
  for (int j = 0; j < m.num_vars(); ++j) s += m.obj[j] * v[j];
  return s;
}

inline bool rows_feasible(const MilpModel& m, const std::vector<double>& v, double tol) {
  for (const auto& row : m.rows) {
    double lhs = 0.0;
    for (const auto& [j, a] : row.terms) lhs += a * v[j];
    if (row.sense == RowSense::Equal) {
      if (std::abs(lhs - row.rhs) > tol) return false;
    } else {
      if (lhs > row.rhs + tol) return false;
    }
  }
  return true;
}

}  // namespace detail

// Verifies a full assignment: variable bounds, every constraint row, and
// (for count models) that each z equals its implied residual.
inline void verify_solution(const MilpModel& m, const std::vector<double>& v,
                            double row_tol = detail::kConstraintTol,
                            double z_tol = detail::kIntegralityTol) {
  if (static_cast<int>(v.size()) != m.num_vars())
    throw integrity_error("solution size mismatch");
  for (int j = 0; j < m.num_vars(); ++j) {
    if (v[j] < m.lb[j] - row_tol || v[j] > m.ub[j] + row_tol)
      throw integrity_error("variable " + m.var_name[j] + " out of bounds");
    if (m.kind[j] == VarKind::Binary && std::abs(v[j] - std::round(v[j])) > row_tol)
      throw integrity_error("binary " + m.var_name[j] + " not integral");
  }
  if (!detail::rows_feasible(m, v, row_tol))
    throw integrity_error("constraint violated by solution");
  for (const auto& w : m.window_refs) {
    double inside = 0.0;
    for (int j : w.member_nodes) inside += v[j];
    if (std::abs(v[w.z_var] - std::abs(inside - w.n_hat)) > z_tol)
      throw integrity_error("z not tight for window t=" + std::to_string(w.t) +
                            " k=" + std::to_string(w.k));
  }
}

// LP relaxation of the model (binaries relaxed to [0,1]). The returned point
// is checked against bounds and rows before handing it back.
inline LpResult solve_lp_relaxation(const MilpModel& m) {
  const LpProblem p = detail::to_lp(m);
  LpResult r = solve_lp(p);
  if (r.status == LpStatus::IterationLimit)
    throw numeric_error("simplex iteration limit reached");
  if (r.status == LpStatus::Unbounded)
    throw numeric_error("relaxation unbounded");
  if (r.status == LpStatus::Optimal) {
    for (int j = 0; j < m.num_vars(); ++j)
      if (r.x[j] < m.lb[j] - 1e-9 || r.x[j] > m.ub[j] + 1e-9)
        throw numeric_error("relaxation value out of bounds for " + m.var_name[j]);
    for (const auto& row : m.rows) {
      double lhs = 0.0;
      double scale = std::abs(row.rhs);
      for (const auto& [j, a] : row.terms) {
        lhs += a * r.x[j];
        scale += std::abs(a);
      }
      const double tol = 1e-9 * std::max(1.0, scale);
      const bool ok = row.sense == RowSense::Equal ? std::abs(lhs - row.rhs) <= tol
                                                   : lhs <= row.rhs + tol;
      if (!ok) throw numeric_error("relaxation violates row " + row.name);
    }
  }
  return r;
}

// Rounding-repair incumbent: round nodes at 0.5, drop one side of any violated
// exclusion, greedily select consistent edges by ascending cost, derive the
// source/sink arcs, then set z tight. Always feasible by construction.
inline std::vector<double> rounding_heuristic(const MilpModel& m,
                                              const std::vector<double>& lp_x) {
  std::vector<double> v(m.num_vars(), 0.0);
  std::vector<bool> selected(m.n_nodes, false);
  for (int i = 0; i < m.n_nodes; ++i) selected[i] = lp_x[m.node_var(i)] >= 0.5;
  for (const auto& [a, b] : m.exclusion_pairs) {
    if (selected[a] && selected[b]) {
      // Drop the node with the worse (larger) objective coefficient.
      if (m.obj[a] > m.obj[b])
        selected[a] = false;
      else if (m.obj[b] > m.obj[a])
        selected[b] = false;
      else
        selected[std::max(a, b)] = false;
    }
  }
  std::vector<int> order(m.edge_list.size());
  for (std::size_t e = 0; e < order.size(); ++e) order[e] = static_cast<int>(e);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ca = m.obj[m.edge_var(a)], cb = m.obj[m.edge_var(b)];
    if (ca != cb) return ca < cb;
    return a < b;
  });
  std::vector<bool> out_used(m.n_nodes, false), in_used(m.n_nodes, false);
  for (int e : order) {
    const auto& [from, to] = m.edge_list[e];
    if (!selected[from] || !selected[to]) continue;
    if (out_used[from] || in_used[to]) continue;
    v[m.edge_var(e)] = 1.0;
    out_used[from] = true;
    in_used[to] = true;
  }
  for (int i = 0; i < m.n_nodes; ++i) {
    if (!selected[i]) continue;
    v[m.node_var(i)] = 1.0;
    if (!in_used[i]) v[m.source_var(i)] = 1.0;
    if (!out_used[i]) v[m.sink_var(i)] = 1.0;
  }
  detail::tighten_continuous(m, v);
  return v;
}

// Best-bound branch-and-bound over the LP relaxation. Branching picks the
// most fractional binary (lowest index on ties); the open node with the
// weakest bound is processed next (deeper node on ties, so the search still
// dives), which lets the proven bound rise and the relative gap close at
// cfg.tolerance_gap instead of only at tree exhaustion.
inline Solution branch_and_bound(const MilpModel& m, const SolveConfig& cfg = {}) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };

  Solution sol;
  LpProblem base = detail::to_lp(m);

  struct Node {
    std::vector<std::pair<int, double>> fixings;  // (var, value)
    double parent_bound;
    long seq;

    // Heap order: weakest bound first, then deepest, then creation order.
    bool operator<(const Node& other) const {
      if (parent_bound != other.parent_bound) return parent_bound > other.parent_bound;
      if (fixings.size() != other.fixings.size()) return fixings.size() < other.fixings.size();
      return seq > other.seq;
    }
  };

  const double inf = std::numeric_limits<double>::infinity();
  double incumbent_obj = inf;
  std::vector<double> incumbent;

  auto offer_incumbent = [&](std::vector<double> v) {
    detail::tighten_continuous(m, v);
    const double obj = detail::objective_of(m, v);
    if (obj < incumbent_obj - detail::kPruneEps &&
        detail::rows_feasible(m, v, detail::kConstraintTol)) {
      incumbent_obj = obj;
      incumbent = std::move(v);
    }
  };

  auto solve_node = [&](const Node& nd, LpResult& out) {
    LpProblem p = base;
    for (const auto& [j, val] : nd.fixings) {
      p.lb[j] = val;
      p.ub[j] = val;
    }
    out = solve_lp(p);
    if (out.status == LpStatus::IterationLimit)
      throw numeric_error("simplex iteration limit reached in branch-and-bound");
    if (out.status == LpStatus::Unbounded)
      throw numeric_error("node relaxation unbounded");
    sol.lp_iterations += out.iterations;
  };

  // Root relaxation.
  LpResult root;
  solve_node(Node{{}, -inf, 0}, root);
  if (root.status == LpStatus::Infeasible) {
    sol.status = SolveStatus::Infeasible;
    sol.wall_time_s = elapsed();
    return sol;
  }
  sol.root_lp = root.objective;

  auto most_fractional = [&](const std::vector<double>& x) {
    int var = -1;
    double best = detail::kIntegralityTol;
    for (int j = 0; j < m.num_vars(); ++j) {
      if (m.kind[j] != VarKind::Binary) continue;
      const double frac = std::abs(x[j] - std::round(x[j]));
      if (frac > best + 1e-15) {
        // Most fractional == closest to one half.
        best = frac;
        var = j;
      }
    }
    return var;
  };

  auto snap = [&](const std::vector<double>& x) {
    std::vector<double> v = x;
    for (int j = 0; j < m.num_vars(); ++j)
      if (m.kind[j] == VarKind::Binary) v[j] = std::round(v[j]);
    return v;
  };

  offer_incumbent(rounding_heuristic(m, root.x));

  std::priority_queue<Node> open;
  long next_seq = 1;
  const int root_branch = most_fractional(root.x);
  if (root_branch < 0) {
    offer_incumbent(snap(root.x));
  } else {
    const double frac_val = root.x[root_branch];
    const double first = frac_val >= 0.5 ? 1.0 : 0.0;
    open.push({{{root_branch, first}}, root.objective, next_seq++});
    open.push({{{root_branch, 1.0 - first}}, root.objective, next_seq++});
  }

  bool hit_limit = false;
  bool gap_met = false;
  while (!open.empty() && !hit_limit && !gap_met) {
    // The heap top carries the weakest outstanding bound.
    if (incumbent_obj < inf) {
      const double lb = std::min(open.top().parent_bound, incumbent_obj);
      const double gap = (incumbent_obj - lb) / std::max(1.0, std::abs(incumbent_obj));
      if (gap <= cfg.tolerance_gap) {
        sol.bound = lb;
        sol.status = gap > 0.0 ? SolveStatus::GapReached : SolveStatus::Optimal;
        gap_met = true;
        break;
      }
    }

    Node nd = open.top();
    open.pop();
    if (nd.parent_bound >= incumbent_obj - detail::kPruneEps) continue;

    // Plunge: follow the rounding direction depth-first from this node so
    // integral leaves (incumbents) are reached early; the off branches go
    // back on the heap with their parent bounds.
    while (true) {
      if (sol.nodes_explored >= cfg.node_limit || elapsed() > cfg.time_limit_s) {
        open.push(std::move(nd));  // keep the frontier bound sound
        hit_limit = true;
        break;
      }
      LpResult lp;
      solve_node(nd, lp);
      ++sol.nodes_explored;
      if (lp.status == LpStatus::Infeasible) break;
      if (lp.objective >= incumbent_obj - detail::kPruneEps) break;

      const int branch = most_fractional(lp.x);
      if (branch < 0) {
        offer_incumbent(snap(lp.x));
        break;
      }
      offer_incumbent(rounding_heuristic(m, lp.x));
      if (lp.objective >= incumbent_obj - detail::kPruneEps) break;

      const double first = lp.x[branch] >= 0.5 ? 1.0 : 0.0;
      Node other = nd;
      other.fixings.emplace_back(branch, 1.0 - first);
      other.parent_bound = lp.objective;
      other.seq = next_seq++;
      open.push(std::move(other));
      nd.fixings.emplace_back(branch, first);
      nd.parent_bound = lp.objective;
      nd.seq = next_seq++;
    }
  }
  if (hit_limit) {
    const double frontier = open.empty() ? inf : open.top().parent_bound;
    sol.bound = incumbent_obj < inf ? std::min(frontier, incumbent_obj) : frontier;
  }

  if (incumbent.empty()) {
    // x = 0 with tight z is always feasible for these models.
    std::vector<double> v(m.num_vars(), 0.0);
    offer_incumbent(std::move(v));
  }
  sol.values = incumbent;
  sol.objective = incumbent_obj;
  if (!hit_limit && !gap_met) {
    // Exhausted: every open node was pruned against the incumbent.
    sol.bound = incumbent_obj;
    sol.status = SolveStatus::Optimal;
  } else if (hit_limit) {
    sol.status = SolveStatus::Limit;
  }
  sol.gap = (sol.objective - sol.bound) / std::max(1.0, std::abs(sol.objective));
  if (sol.gap < 0.0) sol.gap = 0.0;
  sol.wall_time_s = elapsed();
  verify_solution(m, sol.values);
  if (sol.root_lp > sol.bound + 1e-7 || sol.bound > sol.objective + 1e-7)
    throw integrity_error("solver certificate violates the bound sandwich");
  if ((sol.status == SolveStatus::Optimal || sol.status == SolveStatus::GapReached) &&
      sol.gap > cfg.tolerance_gap)
    throw integrity_error("declared gap exceeds the configured tolerance");
  return sol;
}

// Exhaustive oracle: enumerates every binary assignment (variable 0 is the
// most significant position, so ties resolve to the lexicographically
// smallest assignment), keeps feasible ones with z set tight.
inline Solution brute_force(const MilpModel& m) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  std::vector<int> bin_vars;
  for (int j = 0; j < m.num_vars(); ++j)
    if (m.kind[j] == VarKind::Binary) bin_vars.push_back(j);
  const int nb = static_cast<int>(bin_vars.size());
  if (nb > 24) throw size_error("brute force limited to 24 binaries, got " + std::to_string(nb));

  Solution best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<double> v(m.num_vars(), 0.0);
  const std::uint64_t total = 1ULL << nb;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    for (int b = 0; b < nb; ++b)
      v[bin_vars[b]] = (mask >> (nb - 1 - b)) & 1ULL ? 1.0 : 0.0;
    detail::tighten_continuous(m, v);
    if (!detail::rows_feasible(m, v, 1e-9)) continue;
    const double obj = detail::objective_of(m, v);
    if (obj < best.objective - 1e-15) {
      best.objective = obj;
      best.values = v;
    }
  }
  if (best.values.empty()) {
    // x = 0 fallback; reachable only for hand-made infeasible row sets.
    v.assign(m.num_vars(), 0.0);
    detail::tighten_continuous(m, v);
    best.values = v;
    best.objective = detail::objective_of(m, v);
    best.status = SolveStatus::Infeasible;
  } else {
    best.status = SolveStatus::Optimal;
  }
  best.bound = best.objective;
  best.root_lp = best.objective;
  best.gap = 0.0;
  best.wall_time_s = std::chrono::duration<double>(clock::now() - t0).count();
  return best;
}

// ---------------------------------------------------------------------------
// LP-format export

namespace detail {

inline std::string lp_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void lp_terms(std::ostream& os, const std::vector<std::pair<int, double>>& terms,
                     const MilpModel& m) {
  bool first = true;
  int line_len = 0;
  for (const auto& [j, a] : terms) {
    if (a == 0.0) continue;
    std::string piece;
    const double mag = std::abs(a);
    const std::string coeff = mag == 1.0 ? "" : lp_num(mag) + " ";
    if (first) {
      piece = (a < 0.0 ? "- " : "") + coeff + m.var_name[j];
      first = false;
    } else {
      piece = (a < 0.0 ? " - " : " + ") + coeff + m.var_name[j];
    }
    if (line_len + static_cast<int>(piece.size()) > 200) {
      os << "\n  ";
      line_len = 2;
    }
    os << piece;
    line_len += static_cast<int>(piece.size());
  }
  if (first) os << "0 " << (m.num_vars() > 0 ? m.var_name[0] : "x");
}

}  // namespace detail

// Writes the model in LP text interchange format with the model's fixed
// variable naming, suitable for external solvers.
inline void export_lp(const MilpModel& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot open for writing: " + path);
  os << "Minimize\n obj: ";
  std::vector<std::pair<int, double>> obj_terms;
  for (int j = 0; j < m.num_vars(); ++j)
    if (m.obj[j] != 0.0) obj_terms.emplace_back(j, m.obj[j]);
  detail::lp_terms(os, obj_terms, m);
  os << "\nSubject To\n";
  for (const auto& row : m.rows) {
    os << " " << row.name << ": ";
    detail::lp_terms(os, row.terms, m);
    os << (row.sense == RowSense::Equal ? " = " : " <= ") << detail::lp_num(row.rhs) << "\n";
  }
  bool bounds_header = false;
  for (int j = 0; j < m.num_vars(); ++j) {
    if (m.kind[j] != VarKind::Continuous) continue;
    const bool default_bounds =
        m.lb[j] == 0.0 && m.ub[j] == std::numeric_limits<double>::infinity();
    if (default_bounds) continue;
    if (!bounds_header) {
      os << "Bounds\n";
      bounds_header = true;
    }
    os << " " << detail::lp_num(m.lb[j]) << " <= " << m.var_name[j];
    if (m.ub[j] != std::numeric_limits<double>::infinity())
      os << " <= " << detail::lp_num(m.ub[j]);
    os << "\n";
  }
  bool any_binary = false;
  for (int j = 0; j < m.num_vars(); ++j) any_binary |= m.kind[j] == VarKind::Binary;
  if (any_binary) {
    os << "Binaries\n";
    int line_len = 0;
    for (int j = 0; j < m.num_vars(); ++j) {
      if (m.kind[j] != VarKind::Binary) continue;
      if (line_len == 0) {
        os << " " << m.var_name[j];
        line_len = 1 + static_cast<int>(m.var_name[j].size());
      } else if (line_len + 1 + static_cast<int>(m.var_name[j].size()) > 200) {
        os << "\n " << m.var_name[j];
        line_len = 1 + static_cast<int>(m.var_name[j].size());
      } else {
        os << " " << m.var_name[j];
        line_len += 1 + static_cast<int>(m.var_name[j].size());
      }
    }
    os << "\n";
  }
  os << "End\n";
  if (!os) throw io_error("write failed: " + path);
}

}  // namespace tbc
