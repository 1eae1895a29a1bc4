#include <doctest.h>

#include <cmath>
#include <limits>

#include "tbc/windows.hpp"

using namespace tbc;

TEST_CASE("tiling a 10x10 frame with base 4x4 stride 3 yields 9 windows") {
  DensityVideo v = make_video(1, 10, 10, 1.0);
  WindowParams wp;
  wp.base_w = 4;
  wp.base_h = 4;
  wp.stride_x = 3;
  wp.stride_y = 3;
  wp.prune_threshold = 0.0;
  const WindowSet ws = generate_windows(v, wp);
  REQUIRE(ws.total() == 9);
  int k = 0;
  for (int oy : {0, 3, 6})
    for (int ox : {0, 3, 6}) {
      CHECK(ws.windows[k].rect == Rect{ox, oy, ox + 3, oy + 3});
      CHECK(ws.windows[k].k == k);
      ++k;
    }
  CHECK(ws.per_frame_count[0] == 9);
}

TEST_CASE("all-zero density prunes every window at the default threshold") {
  DensityVideo v = make_video(2, 16, 16);
  WindowParams wp;
  wp.base_w = 6;
  wp.base_h = 6;
  wp.prune_threshold = 0.005;
  const WindowSet ws = generate_windows(v, wp);
  CHECK(ws.total() == 0);
  CHECK(ws.per_frame_count[0] == 0);
  CHECK(ws.per_frame_count[1] == 0);
}

TEST_CASE("window counts equal an independent region-sum recomputation") {
  const DensityVideo v = render_from_points(
      {{1, 10.0, 12.0, 1.0}, {1, 22.0, 8.0, 1.0}, {1, 16.0, 24.0, 1.0}}, 1.8, 1, 32, 32);
  WindowParams wp;
  wp.base_w = 8;
  wp.base_h = 8;
  wp.stride_x = 3;
  wp.stride_y = 6;
  wp.prune_threshold = 0.005;
  const WindowSet ws = generate_windows(v, wp);
  REQUIRE(ws.total() > 0);
  for (const auto& w : ws.windows) {
    double oracle = 0.0;
    for (int y = w.rect.y0; y <= w.rect.y1; ++y)
      for (int x = w.rect.x0; x <= w.rect.x1; ++x) oracle += v.frame(w.t).at(x, y);
    CHECK(w.n_hat == doctest::Approx(oracle).epsilon(1e-15));
    CHECK(w.n_hat >= wp.prune_threshold);
  }
}

TEST_CASE("base size larger than the frame is a parameter error") {
  DensityVideo v = make_video(1, 8, 8);
  WindowParams wp;
  wp.base_w = 9;
  wp.base_h = 4;
  CHECK_THROWS_AS(generate_windows(v, wp), param_error);
}

TEST_CASE("raising the prune threshold never adds windows") {
  const DensityVideo v =
      render_from_points({{1, 8.0, 8.0, 1.0}, {1, 24.0, 20.0, 1.0}}, 2.0, 1, 32, 32);
  WindowParams wp;
  wp.base_w = 6;
  wp.base_h = 6;
  int prev = std::numeric_limits<int>::max();
  for (double thr : {0.0, 0.001, 0.005, 0.02, 0.1, 0.5}) {
    wp.prune_threshold = thr;
    const int n = generate_windows(v, wp).total();
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("generation is deterministic and frame-major, row-major") {
  const DensityVideo v =
      render_from_points({{1, 8.0, 8.0, 1.0}, {2, 20.0, 12.0, 1.0}}, 2.0, 2, 32, 32);
  WindowParams wp;
  wp.base_w = 8;
  wp.base_h = 8;
  const WindowSet a = generate_windows(v, wp);
  const WindowSet b = generate_windows(v, wp);
  REQUIRE(a.total() == b.total());
  for (int i = 0; i < a.total(); ++i) {
    CHECK(a.windows[i].rect == b.windows[i].rect);
    CHECK(a.windows[i].t == b.windows[i].t);
    CHECK(a.windows[i].n_hat == b.windows[i].n_hat);
  }
  for (int i = 1; i < a.total(); ++i) {
    const auto& prev = a.windows[i - 1];
    const auto& cur = a.windows[i];
    const bool ordered = prev.t < cur.t || (prev.t == cur.t && prev.rect.y0 < cur.rect.y0) ||
                         (prev.t == cur.t && prev.rect.y0 == cur.rect.y0 &&
                          prev.rect.x0 < cur.rect.x0);
    CHECK(ordered);
  }
}

TEST_CASE("perspective scaling grows windows toward the bottom") {
  DensityVideo v = make_video(1, 40, 40, 0.01);
  const PerspectiveMap persp = build_perspective({0.0, 5.0}, {39.0, 15.0}, 40, 40);
  WindowParams wp;
  wp.base_w = 8;
  wp.base_h = 8;
  wp.stride_x = 8;
  wp.stride_y = 8;
  wp.prune_threshold = 0.0;
  wp.calibration_row = 19.5;
  const WindowSet ws = generate_windows(v, wp, &persp);
  REQUIRE(ws.total() > 0);
  double top_area = 0.0, bottom_area = 0.0;
  for (const auto& w : ws.windows) {
    if (w.rect.y0 <= 4) top_area = std::max<double>(top_area, static_cast<double>(w.rect.area()));
    if (w.rect.y1 >= 30)
      bottom_area = std::max<double>(bottom_area, static_cast<double>(w.rect.area()));
  }
  CHECK(bottom_area > top_area);
  for (const auto& w : ws.windows) {
    CHECK(w.rect.x0 >= 0);
    CHECK(w.rect.y0 >= 0);
    CHECK(w.rect.x1 < 40);
    CHECK(w.rect.y1 < 40);
  }
}

TEST_CASE("count residual with x = 0 is the sum of window estimates") {
  const DensityVideo v = render_from_points({{1, 16.0, 16.0, 1.0}}, 2.0, 1, 32, 32);
  WindowParams wp;
  wp.base_w = 8;
  wp.base_h = 8;
  const WindowSet ws = generate_windows(v, wp);
  double nhat_sum = 0.0;
  for (const auto& w : ws.windows) nhat_sum += w.n_hat;
  const double residual = count_residual(ws, {}, {}, {});
  CHECK(residual == doctest::Approx(nhat_sum).epsilon(1e-12));
}

TEST_CASE("selecting a candidate at the mode improves the residual") {
  const DensityVideo v = render_from_points({{1, 16.0, 16.0, 1.0}}, 2.0, 1, 32, 32);
  WindowParams wp;
  wp.base_w = 10;
  wp.base_h = 10;
  wp.stride_x = 3;
  wp.stride_y = 3;
  const WindowSet ws = generate_windows(v, wp);
  const std::vector<Point2> cands = {{16.0, 16.0}};
  const std::vector<int> frames = {1};
  const double off = count_residual(ws, cands, frames, {0.0});
  const double on = count_residual(ws, cands, frames, {1.0});
  CHECK(on < off);
}

TEST_CASE("random selection matches a hand-evaluated residual") {
  const DensityVideo v = render_from_points(
      {{1, 8.0, 8.0, 1.0}, {1, 20.0, 10.0, 1.0}, {1, 14.0, 22.0, 1.0}}, 2.0, 1, 32, 32);
  WindowParams wp;
  wp.base_w = 9;
  wp.base_h = 9;
  wp.stride_x = 4;
  wp.stride_y = 4;
  const WindowSet ws = generate_windows(v, wp);
  const std::vector<Point2> cands = {{8.0, 8.0},  {20.0, 10.0}, {14.0, 22.0},
                                     {10.0, 9.0}, {26.0, 26.0}, {3.0, 28.0}};
  const std::vector<int> frames = {1, 1, 1, 1, 1, 1};
  Rng rng(7);
  std::vector<double> x(6);
  for (double& xi : x) xi = rng.next_double() < 0.5 ? 0.0 : 1.0;

  double oracle = 0.0;
  for (const auto& w : ws.windows) {
    double inside = 0.0;
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (frames[i] == w.t && cands[i].x >= w.rect.x0 && cands[i].x <= w.rect.x1 &&
          cands[i].y >= w.rect.y0 && cands[i].y <= w.rect.y1)
        inside += x[i];
    oracle += std::abs(inside - w.n_hat);
  }
  CHECK(count_residual(ws, cands, frames, x) == doctest::Approx(oracle).epsilon(1e-15));
}

TEST_CASE("residual is zero when selections reproduce every window count") {
  // Unit impulses at candidate pixels make every window count integral.
  DensityVideo v = make_video(1, 20, 20);
  v.frame(1).at(5, 5) = 1.0;
  v.frame(1).at(13, 9) = 1.0;
  WindowParams wp;
  wp.base_w = 6;
  wp.base_h = 6;
  wp.stride_x = 2;
  wp.stride_y = 2;
  wp.prune_threshold = 0.0;
  const WindowSet ws = generate_windows(v, wp);
  const std::vector<Point2> cands = {{5.0, 5.0}, {13.0, 9.0}};
  const std::vector<int> frames = {1, 1};
  CHECK(count_residual(ws, cands, frames, {1.0, 1.0}) == doctest::Approx(0.0));
}
