#pragma once

// CLEAR MOT and identity metrics: per-frame optimal assignment with matches
// carried forward, plus globally matched IDF1.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tbc/common.hpp"
#include "tbc/tracks.hpp"

namespace tbc {

// Minimum-cost assignment (Hungarian with potentials). cost is n x m with
// n <= m; returns the column assigned to each row.
inline std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  const int m = static_cast<int>(cost[0].size());
  if (n > m) throw param_error("assignment needs rows <= columns");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> result(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] > 0) result[p[j] - 1] = j - 1;
  return result;
}

struct ObjectObs {
  int id = 0;
  double x = 0.0, y = 0.0;
  std::optional<Rect> box;
};

// Per-frame observations with persistent ids; frame 1 at index 0.
struct FrameObjects {
  std::vector<std::vector<ObjectObs>> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
  long long total() const {
    long long n = 0;
    for (const auto& f : frames) n += static_cast<long long>(f.size());
    return n;
  }
};

inline FrameObjects frame_objects_from_rows(const std::vector<MotRow>& rows,
                                            int min_frames = 0) {
  int t_max = min_frames;
  for (const auto& r : rows) t_max = std::max(t_max, r.t);
  FrameObjects fo;
  fo.frames.resize(static_cast<std::size_t>(t_max));
  for (const auto& r : rows) {
    for (const auto& existing : fo.frames[static_cast<std::size_t>(r.t - 1)])
      if (existing.id == r.id)
        throw format_error("duplicate id " + std::to_string(r.id) + " in frame " +
                           std::to_string(r.t));
    ObjectObs o;
    o.id = r.id;
    o.x = r.cx();
    o.y = r.cy();
    o.box = Rect{static_cast<int>(std::lround(r.left)), static_cast<int>(std::lround(r.top)),
                 static_cast<int>(std::lround(r.left + r.width - 1)),
                 static_cast<int>(std::lround(r.top + r.height - 1))};
    fo.frames[static_cast<std::size_t>(r.t - 1)].push_back(o);
  }
  return fo;
}

inline FrameObjects frame_objects_from_tracks(const TrackSet& ts, int min_frames = 0) {
  int t_max = min_frames;
  for (const auto& traj : ts.trajectories)
    if (!traj.points.empty()) t_max = std::max(t_max, traj.last_frame());
  FrameObjects fo;
  fo.frames.resize(static_cast<std::size_t>(t_max));
  for (const auto& traj : ts.trajectories)
    for (const auto& pt : traj.points)
      fo.frames[static_cast<std::size_t>(pt.t - 1)].push_back(
          {traj.id, pt.x, pt.y, pt.box});
  return fo;
}

struct EvalOptions {
  double match_threshold = 3.0;  // max center distance (point mode)
  bool use_iou = false;          // box mode: match when IoU >= iou_threshold
  double iou_threshold = 0.5;
};

struct EvalReport {
  double mota = 0.0, motp = 0.0, idf1 = 0.0;
  double rcll = 0.0, prcn = 0.0, faf = 0.0;
  long long gt_tracks = 0, mt = 0, pt = 0, ml = 0;
  long long fp = 0, fn = 0, ids = 0, fm = 0;
  long long gt_total = 0, tp = 0;
};

// CLEAR evaluation. Matches from the previous frame are kept while still
// valid; the rest are assigned by minimum-cost bipartite matching under the
// threshold. A ground-truth object re-matching to a different id counts an
// identity switch; a matched-unmatched-matched gap counts a fragmentation.
inline EvalReport evaluate(const FrameObjects& pred, const FrameObjects& gt,
                           const EvalOptions& opt = {}) {
  if (pred.frame_count() > gt.frame_count())
    throw param_error("prediction frames exceed ground-truth range");

  const double forbidden = 1e9;
  auto pair_cost = [&](const ObjectObs& g, const ObjectObs& p) -> double {
    if (opt.use_iou) {
      if (!g.box || !p.box) throw param_error("IoU matching requires boxes");
      const double iou = rect_iou(*g.box, *p.box);
      return iou >= opt.iou_threshold ? 1.0 - iou : forbidden;
    }
    const double d = std::hypot(g.x - p.x, g.y - p.y);
    return d <= opt.match_threshold ? d : forbidden;
  };

  EvalReport rep;
  rep.gt_total = gt.total();

  std::map<int, int> last_match;        // gt id -> last matched pred id
  std::map<int, int> active_match;      // matches alive in the previous frame
  std::map<int, long long> gt_frames;   // gt id -> #frames present
  std::map<int, long long> gt_covered;  // gt id -> #frames matched
  std::map<int, bool> gt_was_matched;   // for fragmentation counting
  double dist_sum = 0.0;
  double iou_sum = 0.0;

  const int T = gt.frame_count();
  for (int f = 0; f < T; ++f) {
    const auto& gts = gt.frames[static_cast<std::size_t>(f)];
    const auto& prs = f < pred.frame_count() ? pred.frames[static_cast<std::size_t>(f)]
                                             : std::vector<ObjectObs>{};
    for (const auto& g : gts) ++gt_frames[g.id];

    std::vector<bool> g_done(gts.size(), false), p_done(prs.size(), false);
    std::vector<std::pair<int, int>> matches;  // (gt idx, pred idx)

    // Carry forward matches that remain valid.
    std::map<int, int> new_active;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      const auto it = active_match.find(gts[gi].id);
      if (it == active_match.end()) continue;
      for (std::size_t pi = 0; pi < prs.size(); ++pi) {
        if (p_done[pi] || prs[pi].id != it->second) continue;
        if (pair_cost(gts[gi], prs[pi]) < forbidden) {
          matches.emplace_back(static_cast<int>(gi), static_cast<int>(pi));
          g_done[gi] = true;
          p_done[pi] = true;
        }
        break;
      }
    }

    // Optimal assignment over the remainder.
    std::vector<int> g_rest, p_rest;
    for (std::size_t gi = 0; gi < gts.size(); ++gi)
      if (!g_done[gi]) g_rest.push_back(static_cast<int>(gi));
    for (std::size_t pi = 0; pi < prs.size(); ++pi)
      if (!p_done[pi]) p_rest.push_back(static_cast<int>(pi));
    if (!g_rest.empty() && !p_rest.empty()) {
      const int dim = static_cast<int>(std::max(g_rest.size(), p_rest.size()));
      std::vector<std::vector<double>> cost(
          static_cast<std::size_t>(dim), std::vector<double>(static_cast<std::size_t>(dim), forbidden));
      for (std::size_t a = 0; a < g_rest.size(); ++a)
        for (std::size_t b = 0; b < p_rest.size(); ++b)
          cost[a][b] = pair_cost(gts[static_cast<std::size_t>(g_rest[a])],
                                 prs[static_cast<std::size_t>(p_rest[b])]);
      const auto assign = min_cost_assignment(cost);
      for (std::size_t a = 0; a < g_rest.size(); ++a) {
        const int b = assign[a];
        if (b < 0 || b >= static_cast<int>(p_rest.size())) continue;
        if (cost[a][static_cast<std::size_t>(b)] >= forbidden) continue;
        matches.emplace_back(g_rest[a], p_rest[static_cast<std::size_t>(b)]);
      }
    }

    for (const auto& [gi, pi] : matches) {
      const auto& g = gts[static_cast<std::size_t>(gi)];
      const auto& p = prs[static_cast<std::size_t>(pi)];
      ++rep.tp;
      ++gt_covered[g.id];
      if (opt.use_iou) {
        iou_sum += rect_iou(*g.box, *p.box);
      } else {
        dist_sum += std::hypot(g.x - p.x, g.y - p.y);
      }
      const auto lm = last_match.find(g.id);
      if (lm != last_match.end() && lm->second != p.id) ++rep.ids;
      // Fragmentation: re-match after a gap while previously matched.
      const auto wm = gt_was_matched.find(g.id);
      if (wm != gt_was_matched.end() && wm->second && active_match.find(g.id) == active_match.end())
        ++rep.fm;
      last_match[g.id] = p.id;
      new_active[g.id] = p.id;
    }
    for (const auto& g : gts) gt_was_matched[g.id] = gt_was_matched[g.id] || new_active.count(g.id);

    const long long frame_tp = static_cast<long long>(matches.size());
    rep.fp += static_cast<long long>(prs.size()) - frame_tp;
    rep.fn += static_cast<long long>(gts.size()) - frame_tp;
    active_match = std::move(new_active);
  }

  rep.gt_tracks = static_cast<long long>(gt_frames.size());
  for (const auto& [id, frames] : gt_frames) {
    const double cov = static_cast<double>(gt_covered.count(id) ? gt_covered[id] : 0) /
                       static_cast<double>(frames);
    if (cov >= 0.8)
      ++rep.mt;
    else if (cov <= 0.2)
      ++rep.ml;
    else
      ++rep.pt;
  }

  const double gt_total = static_cast<double>(std::max<long long>(1, rep.gt_total));
  rep.mota = 1.0 - static_cast<double>(rep.fp + rep.fn + rep.ids) / gt_total;
  rep.motp = rep.tp > 0 ? (opt.use_iou ? iou_sum / static_cast<double>(rep.tp)
                                       : dist_sum / static_cast<double>(rep.tp))
                        : 0.0;
  rep.rcll = static_cast<double>(rep.tp) / gt_total;
  const long long pred_total = rep.tp + rep.fp;
  rep.prcn = pred_total > 0 ? static_cast<double>(rep.tp) / static_cast<double>(pred_total) : 0.0;
  rep.faf = T > 0 ? static_cast<double>(rep.fp) / static_cast<double>(T) : 0.0;

  // IDF1: maximum-overlap global identity matching.
  {
    std::vector<int> gt_ids, pr_ids;
    std::map<int, int> gt_pos, pr_pos;
    std::map<int, long long> pr_frames;
    for (const auto& f : gt.frames)
      for (const auto& o : f)
        if (!gt_pos.count(o.id)) {
          gt_pos[o.id] = static_cast<int>(gt_ids.size());
          gt_ids.push_back(o.id);
        }
    for (const auto& f : pred.frames)
      for (const auto& o : f) {
        ++pr_frames[o.id];
        if (!pr_pos.count(o.id)) {
          pr_pos[o.id] = static_cast<int>(pr_ids.size());
          pr_ids.push_back(o.id);
        }
      }
    const int ng = static_cast<int>(gt_ids.size());
    const int np = static_cast<int>(pr_ids.size());
    long long idtp = 0;
    if (ng > 0 && np > 0) {
      std::vector<std::vector<long long>> overlap(
          static_cast<std::size_t>(ng), std::vector<long long>(static_cast<std::size_t>(np), 0));
      for (int f = 0; f < T; ++f) {
        const auto& gts = gt.frames[static_cast<std::size_t>(f)];
        const auto& prs = f < pred.frame_count() ? pred.frames[static_cast<std::size_t>(f)]
                                                 : std::vector<ObjectObs>{};
        for (const auto& g : gts)
          for (const auto& p : prs)
            if (pair_cost(g, p) < forbidden) ++overlap[gt_pos[g.id]][pr_pos[p.id]];
      }
      const int dim = std::max(ng, np);
      std::vector<std::vector<double>> cost(
          static_cast<std::size_t>(dim), std::vector<double>(static_cast<std::size_t>(dim), 0.0));
      for (int a = 0; a < ng; ++a)
        for (int b = 0; b < np; ++b)
          cost[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
              -static_cast<double>(overlap[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]);
      const auto assign = min_cost_assignment(cost);
      for (int a = 0; a < ng; ++a) {
        const int b = assign[static_cast<std::size_t>(a)];
        if (b >= 0 && b < np) idtp += overlap[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
      }
    }
    long long pred_det_total = 0;
    for (const auto& [id, n] : pr_frames) pred_det_total += n;
    const long long denom = rep.gt_total + pred_det_total;
    rep.idf1 = denom > 0 ? 2.0 * static_cast<double>(idtp) / static_cast<double>(denom) : 0.0;
  }
  return rep;
}

// Aligned text table mirroring the usual tracking-report columns.
inline std::string format_report(const EvalReport& r) {
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf, "%7s %7s %6s %4s %4s %4s %4s %6s %6s %5s %5s %7s %7s %7s\n",
                "RCLL", "PRCN", "FAF", "GT", "MT", "PT", "ML", "FP", "FN", "IDS", "FM",
                "MOTA", "IDF1", "MOTP");
  out += buf;
  std::snprintf(buf, sizeof buf,
                "%6.1f%% %6.1f%% %6.2f %4lld %4lld %4lld %4lld %6lld %6lld %5lld %5lld %6.1f%% %6.1f%% %7.3f\n",
                100.0 * r.rcll, 100.0 * r.prcn, r.faf, r.gt_tracks, r.mt, r.pt, r.ml, r.fp,
                r.fn, r.ids, r.fm, 100.0 * r.mota, 100.0 * r.idf1, r.motp);
  out += buf;
  return out;
}

}  // namespace tbc
