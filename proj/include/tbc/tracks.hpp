#pragma once

// Turning solver output into trajectories, chaining batched solutions on
// their shared frames, and MOT Challenge CSV serialization.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tbc/bbox.hpp"
#include "tbc/common.hpp"
#include "tbc/graph.hpp"
#include "tbc/model.hpp"
#include "tbc/solver.hpp"

namespace tbc {

struct TrackPoint {
  int t = 1;  // 1-based frame
  double x = 0.0;
  double y = 0.0;
  std::optional<Rect> box;
};

struct Trajectory {
  int id = 0;
  std::vector<TrackPoint> points;  // strictly consecutive frames

  int first_frame() const { return points.front().t; }
  int last_frame() const { return points.back().t; }
};

enum class Provenance { Whole, Tbc3 };

struct TrackSet {
  std::vector<Trajectory> trajectories;
  int width = 0, height = 0, frame_count = 0;
  Provenance provenance = Provenance::Whole;
};

// Follows unit flow from each active source arc through selected edges to a
// sink arc. Yields one trajectory per active source arc; node-disjointness
// comes from flow conservation, which is re-checked here.
inline TrackSet decode_tracks(const CandidateGraph& graph, const Solution& sol) {
  const int n = static_cast<int>(graph.nodes.size());
  const int ne = static_cast<int>(graph.edges.size());
  const auto var_node = [&](int i) { return i; };
  const auto var_edge = [&](int e) { return n + e; };
  const auto var_src = [&](int i) { return n + ne + i; };
  const auto var_sink = [&](int i) { return n + ne + n + i; };
  if (static_cast<int>(sol.values.size()) < 2 * n + ne)
    throw integrity_error("solution does not cover the graph's variables");

  auto on = [&](int var) { return sol.values[var] > 0.5; };

  // Flow conservation per node, checked against the raw assignment.
  std::vector<int> out_edge(n, -1), in_count(n, 0), out_count(n, 0);
  for (int e = 0; e < ne; ++e) {
    if (!on(var_edge(e))) continue;
    const auto& edge = graph.edges[e];
    if (out_edge[edge.from] >= 0)
      throw integrity_error("node " + std::to_string(edge.from) + " has two outgoing edges");
    out_edge[edge.from] = e;
    ++out_count[edge.from];
    ++in_count[edge.to];
  }
  for (int i = 0; i < n; ++i) {
    const double xi = sol.values[var_node(i)];
    const double inflow = in_count[i] + (on(var_src(i)) ? 1.0 : 0.0);
    const double outflow = out_count[i] + (on(var_sink(i)) ? 1.0 : 0.0);
    if (std::abs(inflow - xi) > 1e-7 || std::abs(outflow - xi) > 1e-7)
      throw integrity_error("flow conservation violated at node " + std::to_string(i));
  }

  TrackSet ts;
  int next_id = 1;
  for (int i = 0; i < n; ++i) {
    if (!on(var_src(i))) continue;
    Trajectory traj;
    traj.id = next_id++;
    int cur = i;
    while (true) {
      const auto& node = graph.nodes[cur];
      traj.points.push_back({node.t, node.phi.x, node.phi.y, std::nullopt});
      if (on(var_sink(cur))) break;
      const int e = out_edge[cur];
      if (e < 0)
        throw integrity_error("track through node " + std::to_string(cur) +
                              " has no continuation");
      cur = graph.edges[e].to;
    }
    ts.trajectories.push_back(std::move(traj));
  }
  return ts;
}

// Merges per-batch track sets across their single shared frame. Endpoints
// are matched greedily by ascending distance (same position first), within
// match_radius; everything else keeps a fresh id.
inline TrackSet chain_batches(const std::vector<TrackSet>& batches,
                              const std::vector<FrameRange>& ranges, double match_radius) {
  if (batches.size() != ranges.size()) throw param_error("one track set per batch required");
  if (batches.empty()) return {};
  for (std::size_t b = 1; b < ranges.size(); ++b)
    if (ranges[b].first != ranges[b - 1].last)
      throw param_error("adjacent batches must share exactly one frame");

  TrackSet out;
  out.provenance = Provenance::Tbc3;
  out.width = batches.front().width;
  out.height = batches.front().height;
  out.frame_count = ranges.back().last;
  int next_id = 1;

  // Index of the open trajectory (in out) a chained track currently maps to.
  std::vector<Trajectory> merged;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const int shared = ranges[b].first;
    std::vector<const Trajectory*> incoming;
    for (const auto& traj : batches[b].trajectories) incoming.push_back(&traj);

    if (b == 0) {
      for (const auto* traj : incoming) {
        Trajectory t = *traj;
        t.id = next_id++;
        merged.push_back(std::move(t));
      }
      continue;
    }

    // Candidates for merging: open tracks ending on the shared frame vs
    // batch tracks starting on it.
    struct Pair {
      double dist;
      int open_idx;
      int in_idx;
    };
    std::vector<int> open_idx;
    for (std::size_t i = 0; i < merged.size(); ++i)
      if (merged[i].last_frame() == shared) open_idx.push_back(static_cast<int>(i));
    std::vector<Pair> pairs;
    for (int oi : open_idx) {
      const auto& tail = merged[oi].points.back();
      for (std::size_t j = 0; j < incoming.size(); ++j) {
        if (incoming[j]->first_frame() != shared) continue;
        const auto& head = incoming[j]->points.front();
        const double d = std::hypot(tail.x - head.x, tail.y - head.y);
        if (d <= match_radius) pairs.push_back({d, oi, static_cast<int>(j)});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.dist != b.dist) return a.dist < b.dist;
      if (a.open_idx != b.open_idx) return a.open_idx < b.open_idx;
      return a.in_idx < b.in_idx;
    });
    std::vector<bool> open_used(merged.size(), false), in_used(incoming.size(), false);
    for (const auto& pr : pairs) {
      if (open_used[pr.open_idx] || in_used[pr.in_idx]) continue;
      open_used[pr.open_idx] = true;
      in_used[pr.in_idx] = true;
      auto& dst = merged[pr.open_idx];
      const auto& src = incoming[pr.in_idx]->points;
      dst.points.insert(dst.points.end(), src.begin() + 1, src.end());
    }
    for (std::size_t j = 0; j < incoming.size(); ++j) {
      if (in_used[j]) continue;
      Trajectory t = *incoming[j];
      t.id = next_id++;
      merged.push_back(std::move(t));
    }
  }
  out.trajectories = std::move(merged);
  std::sort(out.trajectories.begin(), out.trajectories.end(),
            [](const Trajectory& a, const Trajectory& b) { return a.id < b.id; });
  return out;
}

// ---------------------------------------------------------------------------
// MOT Challenge CSV: frame,id,bb_left,bb_top,bb_width,bb_height,conf,-1,-1,-1

inline void write_mot_csv(const TrackSet& ts, const std::string& path, int fallback_w,
                          int fallback_h) {
  std::ofstream os(path);
  if (!os) throw io_error("cannot open for writing: " + path);
  struct Row {
    int t, id;
    Rect box;
  };
  std::vector<Row> rows;
  for (const auto& traj : ts.trajectories)
    for (const auto& pt : traj.points) {
      Rect box;
      if (pt.box) {
        box = *pt.box;
      } else {
        box.x0 = static_cast<int>(std::lround(pt.x)) - (fallback_w - 1) / 2;
        box.y0 = static_cast<int>(std::lround(pt.y)) - (fallback_h - 1) / 2;
        box.x1 = box.x0 + fallback_w - 1;
        box.y1 = box.y0 + fallback_h - 1;
      }
      rows.push_back({pt.t, traj.id, box});
    }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.id < b.id;
  });
  for (const auto& r : rows)
    os << r.t << "," << r.id << "," << r.box.x0 << "," << r.box.y0 << "," << r.box.width()
       << "," << r.box.height() << ",1,-1,-1,-1\n";
  if (!os) throw io_error("write failed: " + path);
}

// One annotated object instance; center is derived from the box.
struct MotRow {
  int t = 1;
  int id = 0;
  double left = 0.0, top = 0.0, width = 0.0, height = 0.0;
  double conf = 1.0;

  double cx() const { return left + (width - 1.0) / 2.0; }
  double cy() const { return top + (height - 1.0) / 2.0; }
};

inline std::vector<MotRow> read_mot_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open: " + path);
  std::vector<MotRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> fields;
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        fields.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw format_error(path + ": bad number at line " + std::to_string(lineno));
      }
    }
    if (fields.size() < 6)
      throw format_error(path + ": expected at least 6 fields at line " +
                         std::to_string(lineno));
    MotRow r;
    r.t = static_cast<int>(fields[0]);
    r.id = static_cast<int>(fields[1]);
    r.left = fields[2];
    r.top = fields[3];
    r.width = fields[4];
    r.height = fields[5];
    r.conf = fields.size() > 6 ? fields[6] : 1.0;
    if (r.t < 1) throw format_error(path + ": frames are 1-based, line " + std::to_string(lineno));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace tbc
