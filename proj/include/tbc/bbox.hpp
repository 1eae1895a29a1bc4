#pragma once

// Bounding-box estimation: exhaustive search over integer box sizes around a
// perspective-derived reference, trading density mass against a size prior.

#include <cmath>
#include <limits>

#include "tbc/common.hpp"
#include "tbc/density.hpp"

namespace tbc {

struct BBoxParams {
  double c = 0.9;         // target density mass inside the box, in [0.8, 1.0]
  double lambda_b = 1.0;  // weight of the reference-box prior
  double search_range = 0.2;  // +-20% of the reference dims
  double aspect = 0.41;       // width / height of the reference box
};

struct BBox {
  int t = 1;
  Rect rect;
  double mass = 0.0;
  double objective = 0.0;
};

namespace detail {

// Box of the given integer dims centered at phi; clipping truncates rather
// than shifts, so the center moves as little as the frame allows.
inline Rect centered_box(const Point2& phi, int w_px, int h_px, int frame_w, int frame_h) {
  const int cx = static_cast<int>(std::lround(phi.x));
  const int cy = static_cast<int>(std::lround(phi.y));
  Rect r;
  r.x0 = cx - (w_px - 1) / 2;
  r.y0 = cy - (h_px - 1) / 2;
  r.x1 = r.x0 + w_px - 1;
  r.y1 = r.y0 + h_px - 1;
  return clip_rect(r, frame_w, frame_h);
}

}  // namespace detail

// Reference box at phi: height from the perspective scale, width from the
// aspect ratio, clipped to the frame.
inline Rect reference_box(const Point2& phi, const PerspectiveMap& perspective, double aspect,
                          int frame_w, int frame_h) {
  const double h = perspective_scale_at(perspective, phi.y);
  const double w = h * aspect;
  const int h_px = std::max(1, static_cast<int>(std::lround(h)));
  const int w_px = std::max(1, static_cast<int>(std::lround(w)));
  return detail::centered_box(phi, w_px, h_px, frame_w, frame_h);
}

// Sum of absolute coordinate differences, normalized by the reference height.
inline double box_prior_delta(const Rect& b, const Rect& ref) {
  const double norm = std::max(1, ref.height());
  return (std::abs(b.x0 - ref.x0) + std::abs(b.y0 - ref.y0) + std::abs(b.x1 - ref.x1) +
          std::abs(b.y1 - ref.y1)) /
         norm;
}

// Exhaustive search over integer widths and heights within search_range of
// the reference dims, box centered at phi. Minimizes |mass - c| +
// lambda_b * delta(b, ref); ties prefer smaller delta, then smaller area.
inline BBox estimate_box(const DensityVideo& video, int t, const Point2& phi,
                         const PerspectiveMap& perspective, const BBoxParams& p) {
  if (p.c < 0.8 || p.c > 1.0) throw param_error("target mass c must be in [0.8, 1.0]");
  const int W = video.width(), H = video.height();
  if (phi.x < 0 || phi.x > W - 1 || phi.y < 0 || phi.y > H - 1)
    throw param_error("candidate outside frame");
  const Rect ref = reference_box(phi, perspective, p.aspect, W, H);
  const int ref_w = ref.width(), ref_h = ref.height();
  const int w_lo = std::max(1, static_cast<int>(std::lround(ref_w * (1.0 - p.search_range))));
  const int w_hi = std::max(w_lo, static_cast<int>(std::lround(ref_w * (1.0 + p.search_range))));
  const int h_lo = std::max(1, static_cast<int>(std::lround(ref_h * (1.0 - p.search_range))));
  const int h_hi = std::max(h_lo, static_cast<int>(std::lround(ref_h * (1.0 + p.search_range))));

  BBox best;
  best.t = t;
  best.objective = std::numeric_limits<double>::infinity();
  double best_delta = std::numeric_limits<double>::infinity();
  long long best_area = std::numeric_limits<long long>::max();
  for (int h = h_lo; h <= h_hi; ++h) {
    for (int w = w_lo; w <= w_hi; ++w) {
      const Rect r = detail::centered_box(phi, w, h, W, H);
      const double mass = region_sum(video, t, r);
      const double delta = box_prior_delta(r, ref);
      const double obj = std::abs(mass - p.c) + p.lambda_b * delta;
      const long long area = r.area();
      const bool better = obj < best.objective - 1e-12 ||
                          (obj <= best.objective + 1e-12 &&
                           (delta < best_delta - 1e-12 ||
                            (delta <= best_delta + 1e-12 && area < best_area)));
      if (better) {
        best.rect = r;
        best.mass = mass;
        best.objective = obj;
        best_delta = delta;
        best_area = area;
      }
    }
  }
  return best;
}

}  // namespace tbc
