#pragma once

// Candidate detections extracted from density maps and the layered
// association graph between consecutive frames.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "tbc/common.hpp"
#include "tbc/density.hpp"

namespace tbc {

constexpr int kHistogramBins = 16;
using Histogram = std::array<double, kHistogramBins>;  // L1-normalized

struct CandidateNode {
  int id = 0;
  int t = 1;  // 1-based frame
  Point2 phi;
  double density = 0.0;
  Point2 velocity;  // pixels/frame; zero when unknown
  std::optional<Histogram> appearance;
};

struct EdgeCostParams {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double lambda = 1.0;
  double c_si = 10.0;
  double c_it = 10.0;
};

struct Edge {
  int from = 0;  // node ids, t(to) = t(from) + 1
  int to = 0;
  double cost = 0.0;
};

struct CandidateGraph {
  std::vector<CandidateNode> nodes;
  std::vector<Edge> edges;
  double c_si = 10.0;  // source arc cost, one arc per node
  double c_it = 10.0;  // sink arc cost, one arc per node
};

// Pixels with density >= threshold, thinned by greedy suppression: highest
// density first (ties by linear pixel index), a pixel is kept only if no
// kept pixel of the same frame lies within nms_radius (Euclidean).
// Ids are assigned frame-major, then density-descending within the frame.
inline std::vector<CandidateNode> extract_candidates(const DensityVideo& video,
                                                     double threshold, double nms_radius) {
  if (threshold < 0.0) throw param_error("candidate threshold must be >= 0");
  const int W = video.width(), H = video.height(), T = video.frame_count();
  std::vector<std::vector<CandidateNode>> by_frame(static_cast<std::size_t>(T));
  parallel_for(static_cast<std::size_t>(T), [&](std::size_t fi) {
    const DensityMap& f = video.frames[fi];
    struct Pix {
      double d;
      int lin;
    };
    std::vector<Pix> above;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double d = f.at(x, y);
        if (d >= threshold && d > 0.0) above.push_back({d, y * W + x});
      }
    std::sort(above.begin(), above.end(), [](const Pix& a, const Pix& b) {
      if (a.d != b.d) return a.d > b.d;
      return a.lin < b.lin;
    });
    const double r2 = nms_radius * nms_radius;
    auto& kept = by_frame[fi];
    for (const Pix& p : above) {
      const double px = p.lin % W, py = p.lin / W;
      bool suppressed = false;
      for (const auto& q : kept) {
        const double dx = px - q.phi.x, dy = py - q.phi.y;
        if (dx * dx + dy * dy <= r2) {
          suppressed = true;
          break;
        }
      }
      if (suppressed) continue;
      CandidateNode n;
      n.t = static_cast<int>(fi) + 1;
      n.phi = {px, py};
      n.density = p.d;
      kept.push_back(n);
    }
  });
  std::vector<CandidateNode> nodes;
  for (auto& frame_nodes : by_frame)
    for (auto& n : frame_nodes) {
      n.id = static_cast<int>(nodes.size());
      nodes.push_back(n);
    }
  return nodes;
}

// Histogram intersection, sum of elementwise minima.
inline double histogram_intersection(const Histogram& a, const Histogram& b) {
  double s = 0.0;
  for (int i = 0; i < kHistogramBins; ++i) s += std::min(a[i], b[i]);
  return s;
}

// 16-bin intensity histogram over the patch rect, L1-normalized.
inline Histogram patch_histogram(const GrayImage& img, Rect patch) {
  patch = clip_rect(patch, img.width, img.height);
  Histogram h{};
  double n = 0.0;
  for (int y = patch.y0; y <= patch.y1; ++y)
    for (int x = patch.x0; x <= patch.x1; ++x) {
      h[img.at(x, y) * kHistogramBins / 256] += 1.0;
      n += 1.0;
    }
  if (n > 0.0)
    for (double& v : h) v /= n;
  return h;
}

// Association cost between temporally adjacent candidates:
//   -alpha * exp(-lambda * ||phi_a - phi_b||)  geometric proximity
//   -beta  * histogram intersection            appearance
//   -gamma * max(0, cos(V_a, V_b))             motion agreement
// A missing histogram or a near-zero velocity contributes 0 for its term,
// and opposing motion is treated as no evidence rather than a penalty, so
// the cost always lies in [-(alpha+beta+gamma), 0].
inline double edge_cost(const CandidateNode& a, const CandidateNode& b,
                        const EdgeCostParams& p) {
  const double dist = dist2d(a.phi, b.phi);
  double cost = -p.alpha * std::exp(-p.lambda * dist);
  if (a.appearance && b.appearance)
    cost -= p.beta * histogram_intersection(*a.appearance, *b.appearance);
  const double na = std::hypot(a.velocity.x, a.velocity.y);
  const double nb = std::hypot(b.velocity.x, b.velocity.y);
  if (na >= 1e-6 && nb >= 1e-6) {
    const double cosine =
        (a.velocity.x * b.velocity.x + a.velocity.y * b.velocity.y) / (na * nb);
    cost -= p.gamma * std::max(0.0, cosine);
  }
  return cost;
}

// Connects every consecutive-frame pair within max_displacement; all nodes
// get source and sink arcs. Nodes must already carry velocity/appearance.
inline CandidateGraph build_graph(std::vector<CandidateNode> nodes, const EdgeCostParams& p,
                                  double max_displacement) {
  if (max_displacement <= 0.0) throw param_error("max_displacement must be positive");
  CandidateGraph g;
  g.c_si = p.c_si;
  g.c_it = p.c_it;
  g.nodes = std::move(nodes);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    for (std::size_t j = 0; j < g.nodes.size(); ++j) {
      if (g.nodes[j].t != g.nodes[i].t + 1) continue;
      if (dist2d(g.nodes[i].phi, g.nodes[j].phi) > max_displacement) continue;
      g.edges.push_back({static_cast<int>(i), static_cast<int>(j),
                         edge_cost(g.nodes[i], g.nodes[j], p)});
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Velocity and appearance attachment

// Block-matching fallback when no velocity field is supplied: the base-window
// patch around phi in frame t is matched against frame t+1 within
// max_displacement (SAD over density values); the last frame reuses the
// backward match negated. Ties prefer the smallest displacement.
inline Point2 block_match_velocity(const DensityVideo& video, int t, const Point2& phi,
                                   int patch_w, int patch_h, int search_radius) {
  const int W = video.width(), H = video.height(), T = video.frame_count();
  int src_t = t, dst_t = t + 1;
  double sign = 1.0;
  if (t >= T) {
    if (T < 2) return {0.0, 0.0};
    src_t = t;
    dst_t = t - 1;
    sign = -1.0;
  }
  const int cx = static_cast<int>(std::lround(phi.x));
  const int cy = static_cast<int>(std::lround(phi.y));
  const Rect patch = clip_rect(Rect{cx - patch_w / 2, cy - patch_h / 2,
                                    cx - patch_w / 2 + patch_w - 1,
                                    cy - patch_h / 2 + patch_h - 1},
                               W, H);
  const DensityMap& src = video.frame(src_t);
  const DensityMap& dst = video.frame(dst_t);
  double best_sad = std::numeric_limits<double>::infinity();
  int best_dx = 0, best_dy = 0;
  double best_norm2 = 0.0;
  for (int dy = -search_radius; dy <= search_radius; ++dy) {
    for (int dx = -search_radius; dx <= search_radius; ++dx) {
      if (patch.x0 + dx < 0 || patch.x1 + dx >= W || patch.y0 + dy < 0 ||
          patch.y1 + dy >= H)
        continue;
      double sad = 0.0;
      for (int y = patch.y0; y <= patch.y1; ++y)
        for (int x = patch.x0; x <= patch.x1; ++x)
          sad += std::abs(src.at(x, y) - dst.at(x + dx, y + dy));
      const double norm2 = static_cast<double>(dx) * dx + static_cast<double>(dy) * dy;
      if (sad < best_sad - 1e-15 ||
          (std::abs(sad - best_sad) <= 1e-15 && norm2 < best_norm2)) {
        best_sad = sad;
        best_dx = dx;
        best_dy = dy;
        best_norm2 = norm2;
      }
    }
  }
  return {sign * best_dx, sign * best_dy};
}

struct AttachParams {
  int patch_w = 0, patch_h = 0;  // base window dims
  int search_radius = 0;         // max_displacement, rounded
};

// Fills node velocities from a field when given, else by block matching.
inline void attach_velocities(std::vector<CandidateNode>& nodes, const DensityVideo& video,
                              const VelocityField* field, const AttachParams& ap) {
  parallel_for(nodes.size(), [&](std::size_t i) {
    CandidateNode& n = nodes[i];
    if (field) {
      const int x = std::clamp(static_cast<int>(std::lround(n.phi.x)), 0, field->width - 1);
      const int y = std::clamp(static_cast<int>(std::lround(n.phi.y)), 0, field->height - 1);
      n.velocity = {field->x_at(n.t, x, y), field->y_at(n.t, x, y)};
    } else {
      n.velocity = block_match_velocity(video, n.t, n.phi, ap.patch_w, ap.patch_h,
                                        ap.search_radius);
    }
  });
}

// Histograms over base-window patches of the per-frame appearance images.
// frames[i] corresponds to video frame i+1; missing images leave nodes bare.
inline void attach_appearance(std::vector<CandidateNode>& nodes,
                              const std::vector<GrayImage>& frames, int patch_w,
                              int patch_h) {
  parallel_for(nodes.size(), [&](std::size_t i) {
    CandidateNode& n = nodes[i];
    const std::size_t fi = static_cast<std::size_t>(n.t - 1);
    if (fi >= frames.size() || frames[fi].pixels.empty()) return;
    const int cx = static_cast<int>(std::lround(n.phi.x));
    const int cy = static_cast<int>(std::lround(n.phi.y));
    const Rect patch{cx - patch_w / 2, cy - patch_h / 2, cx - patch_w / 2 + patch_w - 1,
                     cy - patch_h / 2 + patch_h - 1};
    n.appearance = patch_histogram(frames[fi], patch);
  });
}

}  // namespace tbc
