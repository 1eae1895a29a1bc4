#pragma once

// Assembles the mixed-integer program coupling flow conservation with
// per-window count residuals, the detection-augmented variant with overlap
// exclusion and score terms, the plain flow model used as a baseline, and
// the batching plan for the 3-frame windowed mode.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tbc/common.hpp"
#include "tbc/graph.hpp"
#include "tbc/windows.hpp"

namespace tbc {

enum class VarKind { Binary, Continuous };
enum class RowSense { LessEqual, Equal };

struct ModelRow {
  std::string name;
  std::vector<std::pair<int, double>> terms;  // (variable index, coefficient)
  RowSense sense = RowSense::LessEqual;
  double rhs = 0.0;
};

// Variable order is fixed: nodes, edges, source arcs, sink arcs, z. Builders
// rely on this order and so do track decoding and the LP export.
struct MilpModel {
  std::vector<VarKind> kind;
  std::vector<double> lb, ub, obj;
  std::vector<std::string> var_name;
  std::vector<ModelRow> rows;

  // Semantic tables for decoding and residual recomputation.
  int n_nodes = 0;
  int n_edges = 0;
  std::vector<std::pair<int, int>> edge_list;  // (from, to) node indices per edge
  struct WindowRef {
    int z_var = -1;
    double n_hat = 0.0;
    int t = 1, k = 0;
    std::vector<int> member_nodes;  // node variable indices inside the window
  };
  std::vector<WindowRef> window_refs;
  std::vector<std::pair<int, int>> exclusion_pairs;  // node variable indices

  int num_vars() const { return static_cast<int>(kind.size()); }
  int num_binaries() const {
    int n = 0;
    for (auto k : kind) n += (k == VarKind::Binary);
    return n;
  }
  int node_var(int i) const { return i; }
  int edge_var(int e) const { return n_nodes + e; }
  int source_var(int i) const { return n_nodes + n_edges + i; }
  int sink_var(int i) const { return n_nodes + n_edges + n_nodes + i; }

  int add_var(VarKind k, double lo, double hi, double cost, std::string name) {
    kind.push_back(k);
    lb.push_back(lo);
    ub.push_back(hi);
    obj.push_back(cost);
    var_name.push_back(std::move(name));
    return num_vars() - 1;
  }
};

struct DetectionAugmentation {
  std::vector<double> score;  // m_i per candidate; empty means all-zero
  std::vector<std::pair<int, int>> exclusion_pairs;  // node ids, intra-frame
  double overlap_threshold = 0.65;
};

namespace detail {

inline MilpModel make_flow_skeleton(const CandidateGraph& graph, double node_unary_cost) {
  MilpModel m;
  m.n_nodes = static_cast<int>(graph.nodes.size());
  m.n_edges = static_cast<int>(graph.edges.size());
  for (int i = 0; i < m.n_nodes; ++i)
    m.add_var(VarKind::Binary, 0.0, 1.0, node_unary_cost, "x_n" + std::to_string(i));
  for (const auto& e : graph.edges) {
    if (e.from < 0 || e.from >= m.n_nodes || e.to < 0 || e.to >= m.n_nodes)
      throw integrity_error("edge references unknown node");
    if (graph.nodes[e.to].t != graph.nodes[e.from].t + 1)
      throw integrity_error("edge must link consecutive frames");
    m.add_var(VarKind::Binary, 0.0, 1.0, e.cost,
              "x_e" + std::to_string(e.from) + "_" + std::to_string(e.to));
    m.edge_list.emplace_back(e.from, e.to);
  }
  for (int i = 0; i < m.n_nodes; ++i)
    m.add_var(VarKind::Binary, 0.0, 1.0, graph.c_si, "x_s" + std::to_string(i));
  for (int i = 0; i < m.n_nodes; ++i)
    m.add_var(VarKind::Binary, 0.0, 1.0, graph.c_it, "x_t" + std::to_string(i));

  // Inflow: sum_{i: ij in E} x_ij + x_sj = x_j
  for (int j = 0; j < m.n_nodes; ++j) {
    ModelRow r;
    r.name = "flow_in_n" + std::to_string(j);
    r.sense = RowSense::Equal;
    r.rhs = 0.0;
    for (int e = 0; e < m.n_edges; ++e)
      if (graph.edges[static_cast<std::size_t>(e)].to == j)
        r.terms.emplace_back(m.edge_var(e), 1.0);
    r.terms.emplace_back(m.source_var(j), 1.0);
    r.terms.emplace_back(m.node_var(j), -1.0);
    m.rows.push_back(std::move(r));
  }
  // Outflow: x_j = sum_{i: ji in E} x_ji + x_jt
  for (int j = 0; j < m.n_nodes; ++j) {
    ModelRow r;
    r.name = "flow_out_n" + std::to_string(j);
    r.sense = RowSense::Equal;
    r.rhs = 0.0;
    r.terms.emplace_back(m.node_var(j), 1.0);
    for (int e = 0; e < m.n_edges; ++e)
      if (graph.edges[static_cast<std::size_t>(e)].from == j)
        r.terms.emplace_back(m.edge_var(e), -1.0);
    r.terms.emplace_back(m.sink_var(j), -1.0);
    m.rows.push_back(std::move(r));
  }
  // Global balance: sum x_it = sum x_si
  {
    ModelRow r;
    r.name = "balance";
    r.sense = RowSense::Equal;
    r.rhs = 0.0;
    for (int i = 0; i < m.n_nodes; ++i) {
      r.terms.emplace_back(m.sink_var(i), 1.0);
      r.terms.emplace_back(m.source_var(i), -1.0);
    }
    m.rows.push_back(std::move(r));
  }
  return m;
}

inline void add_count_terms(MilpModel& m, const CandidateGraph& graph, const WindowSet& ws) {
  for (const auto& w : ws.windows) {
    MilpModel::WindowRef ref;
    ref.n_hat = w.n_hat;
    ref.t = w.t;
    ref.k = w.k;
    for (int i = 0; i < m.n_nodes; ++i) {
      const auto& n = graph.nodes[static_cast<std::size_t>(i)];
      if (n.t == w.t && w.rect.contains(n.phi.x, n.phi.y))
        ref.member_nodes.push_back(m.node_var(i));
    }
    const std::string suffix = "_t" + std::to_string(w.t) + "_k" + std::to_string(w.k);
    ref.z_var = m.add_var(VarKind::Continuous, 0.0,
                          std::numeric_limits<double>::infinity(), 1.0, "z" + suffix);
    // (w)^T x - z <= n_hat  and  -(w)^T x - z <= -n_hat
    ModelRow hi;
    hi.name = "cnt_hi" + suffix;
    hi.rhs = w.n_hat;
    for (int v : ref.member_nodes) hi.terms.emplace_back(v, 1.0);
    hi.terms.emplace_back(ref.z_var, -1.0);
    m.rows.push_back(std::move(hi));
    ModelRow lo;
    lo.name = "cnt_lo" + suffix;
    lo.rhs = -w.n_hat;
    for (int v : ref.member_nodes) lo.terms.emplace_back(v, -1.0);
    lo.terms.emplace_back(ref.z_var, -1.0);
    m.rows.push_back(std::move(lo));
    m.window_refs.push_back(std::move(ref));
  }
}

}  // namespace detail

// Joint detection-and-tracking model: flow conservation per node, global
// source/sink balance, and a pair of count inequalities per window whose
// residual is absorbed by z. Objective: sum z + edge costs + arc costs.
inline MilpModel build_tbc(const CandidateGraph& graph, const WindowSet& ws) {
  MilpModel m = detail::make_flow_skeleton(graph, 0.0);
  detail::add_count_terms(m, graph, ws);
  return m;
}

// Flow-only baseline: count terms removed, each selected node instead pays
// the unary cost (negative by default so detections are encouraged).
inline MilpModel build_flow_only(const CandidateGraph& graph, double unary_cost) {
  return detail::make_flow_skeleton(graph, unary_cost);
}

// Detection-augmented model: adds the detector score m^T x and, for every
// overlapping candidate pair, the hard exclusion x_i + x_j <= 1 (the exact
// linear form of an infinite pairwise overlap penalty).
inline MilpModel build_tbc_det(const CandidateGraph& graph, const WindowSet& ws,
                               const DetectionAugmentation& aug) {
  if (!aug.score.empty() && aug.score.size() != graph.nodes.size())
    throw integrity_error("score vector size does not match node count");
  MilpModel m = build_tbc(graph, ws);
  for (std::size_t i = 0; i < aug.score.size(); ++i) m.obj[m.node_var(static_cast<int>(i))] += aug.score[i];
  for (const auto& [a, b] : aug.exclusion_pairs) {
    if (a < 0 || b < 0 || a >= m.n_nodes || b >= m.n_nodes || a == b)
      throw integrity_error("exclusion pair references invalid nodes");
    if (graph.nodes[static_cast<std::size_t>(a)].t != graph.nodes[static_cast<std::size_t>(b)].t)
      throw integrity_error("exclusion pair must be intra-frame");
    ModelRow r;
    r.name = "excl_" + std::to_string(a) + "_" + std::to_string(b);
    r.rhs = 1.0;
    r.terms.emplace_back(m.node_var(a), 1.0);
    r.terms.emplace_back(m.node_var(b), 1.0);
    m.rows.push_back(std::move(r));
    m.exclusion_pairs.emplace_back(m.node_var(a), m.node_var(b));
  }
  return m;
}

// Detector score map: each node receives the sum over same-frame detections
// of a Gaussian RBF with height equal to the negative detection score.
struct Detection {
  int t = 1;
  double x = 0.0, y = 0.0;
  double score = 0.0;
};

inline std::vector<double> build_score_map(const std::vector<Detection>& detections,
                                           double sigma,
                                           const std::vector<CandidateNode>& nodes) {
  if (sigma <= 0.0) throw param_error("score map sigma must be positive");
  std::vector<double> m(nodes.size(), 0.0);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (const auto& d : detections) {
      if (d.t != nodes[i].t) continue;
      const double dx = nodes[i].phi.x - d.x;
      const double dy = nodes[i].phi.y - d.y;
      m[i] -= d.score * std::exp(-(dx * dx + dy * dy) * inv2s2);
    }
  }
  return m;
}

// Overlap exclusion pairs from per-candidate boxes (IoU above threshold).
inline std::vector<std::pair<int, int>> overlap_exclusions(
    const std::vector<CandidateNode>& nodes, const std::vector<Rect>& boxes,
    double overlap_threshold) {
  if (boxes.size() != nodes.size()) throw param_error("one box per candidate required");
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      if (nodes[i].t != nodes[j].t) continue;
      if (rect_iou(boxes[i], boxes[j]) > overlap_threshold)
        pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  return pairs;
}

// ---------------------------------------------------------------------------
// Batching

enum class BatchMode { Whole, Tbc3 };

struct FrameRange {
  int first = 1;
  int last = 1;  // inclusive

  bool operator==(const FrameRange&) const = default;
};

// Whole mode: a single range. Tbc3: consecutive ranges of batch_len frames
// sharing exactly one frame with the previous batch, last batch possibly
// shorter, so per-batch tracks can be chained on the shared frame.
inline std::vector<FrameRange> plan_batches(int t_frames, int batch_len, BatchMode mode) {
  if (t_frames < 2) throw param_error("batching needs at least two frames");
  if (mode == BatchMode::Whole) return {{1, t_frames}};
  if (batch_len < 2) throw param_error("tbc3 batch length must be >= 2");
  std::vector<FrameRange> out;
  int start = 1;
  while (start < t_frames) {
    const int end = std::min(start + batch_len - 1, t_frames);
    out.push_back({start, end});
    if (end == t_frames) break;
    start = end;
  }
  return out;
}

}  // namespace tbc
