#pragma once

// Sliding-window masks over every frame and their density-estimated counts.

#include <cmath>
#include <cstdlib>
#include <optional>
#include <vector>

#include "tbc/common.hpp"
#include "tbc/density.hpp"

namespace tbc {

struct SlidingWindow {
  int t = 1;   // 1-based frame
  int k = 0;   // index within frame, over retained windows
  Rect rect;
  double n_hat = 0.0;  // region_sum of the density inside rect
};

struct WindowSet {
  std::vector<SlidingWindow> windows;  // frame-major, then row-major origin
  std::vector<int> per_frame_count;    // K_t, index 0 = frame 1
  int stride_x = 3, stride_y = 6;
  int base_w = 0, base_h = 0;
  double prune_threshold = 0.0;

  int total() const { return static_cast<int>(windows.size()); }
};

struct WindowParams {
  int base_w = 0, base_h = 0;
  int stride_x = 3, stride_y = 6;
  double prune_threshold = 0.005;
  // Row at which base_w/base_h are the true target size; perspective scaling
  // is relative to the scale at this row. Defaults to the frame middle.
  std::optional<double> calibration_row;
};

// Tiles each frame with windows of the base size at the given stride. Origins
// run row-major over {0, stride, 2*stride, ...} while the base window fits.
// With a perspective map, each window is rescaled about its center by
// scale(center row) / scale(calibration row) and clipped to the frame.
// Windows whose density sum falls below prune_threshold are dropped.
inline WindowSet generate_windows(const DensityVideo& video, const WindowParams& wp,
                                  const PerspectiveMap* perspective = nullptr) {
  const int W = video.width(), H = video.height(), T = video.frame_count();
  if (wp.base_w <= 0 || wp.base_h <= 0) throw param_error("window base size must be positive");
  if (wp.stride_x <= 0 || wp.stride_y <= 0) throw param_error("window stride must be positive");
  if (wp.base_w > W || wp.base_h > H)
    throw param_error("window base size exceeds frame dimensions");

  const double calib_row = wp.calibration_row.value_or((H - 1) / 2.0);
  const double calib_scale =
      perspective ? perspective_scale_at(*perspective, calib_row) : 1.0;

  std::vector<std::vector<SlidingWindow>> by_frame(static_cast<std::size_t>(T));
  parallel_for(static_cast<std::size_t>(T), [&](std::size_t fi) {
    const int t = static_cast<int>(fi) + 1;
    auto& out = by_frame[fi];
    int k = 0;
    for (int oy = 0; oy + wp.base_h <= H; oy += wp.stride_y) {
      for (int ox = 0; ox + wp.base_w <= W; ox += wp.stride_x) {
        Rect r{ox, oy, ox + wp.base_w - 1, oy + wp.base_h - 1};
        if (perspective) {
          const double cx = 0.5 * (r.x0 + r.x1);
          const double cy = 0.5 * (r.y0 + r.y1);
          const double ratio = perspective_scale_at(*perspective, cy) / calib_scale;
          const double hw = 0.5 * wp.base_w * ratio;
          const double hh = 0.5 * wp.base_h * ratio;
          r.x0 = static_cast<int>(std::lround(cx - hw + 0.5));
          r.x1 = static_cast<int>(std::lround(cx + hw - 0.5));
          r.y0 = static_cast<int>(std::lround(cy - hh + 0.5));
          r.y1 = static_cast<int>(std::lround(cy + hh - 0.5));
          if (r.x1 < r.x0) r.x1 = r.x0;
          if (r.y1 < r.y0) r.y1 = r.y0;
          r = clip_rect(r, W, H);
        }
        const double n_hat = region_sum(video, t, r);
        if (n_hat < wp.prune_threshold) continue;
        SlidingWindow sw;
        sw.t = t;
        sw.k = k++;
        sw.rect = r;
        sw.n_hat = n_hat;
        out.push_back(sw);
      }
    }
  });

  WindowSet ws;
  ws.stride_x = wp.stride_x;
  ws.stride_y = wp.stride_y;
  ws.base_w = wp.base_w;
  ws.base_h = wp.base_h;
  ws.prune_threshold = wp.prune_threshold;
  ws.per_frame_count.resize(static_cast<std::size_t>(T), 0);
  for (int fi = 0; fi < T; ++fi) {
    ws.per_frame_count[static_cast<std::size_t>(fi)] =
        static_cast<int>(by_frame[static_cast<std::size_t>(fi)].size());
    for (auto& sw : by_frame[static_cast<std::size_t>(fi)]) ws.windows.push_back(sw);
  }
  return ws;
}

// Sum over every window of |selected count inside - n_hat|, where the
// selection indicator x is given over a candidate point set.
inline double count_residual(const WindowSet& ws, const std::vector<Point2>& candidates,
                             const std::vector<int>& candidate_frames,
                             const std::vector<double>& x) {
  if (candidates.size() != x.size() || candidates.size() != candidate_frames.size())
    throw param_error("candidate/selection size mismatch");
  double total = 0.0;
  for (const auto& w : ws.windows) {
    double inside = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i)
      if (candidate_frames[i] == w.t && w.rect.contains(candidates[i].x, candidates[i].y))
        inside += x[i];
    total += std::abs(inside - w.n_hat);
  }
  return total;
}

}  // namespace tbc
