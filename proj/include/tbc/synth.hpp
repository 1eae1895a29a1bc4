#pragma once

// Synthetic multi-target scenes: seeded trajectories with reflective borders,
// rendered density video, exact velocity fields, flat-patch appearance
// frames, and MOT-style ground truth.

#include <cmath>
#include <string>
#include <vector>

#include "tbc/common.hpp"
#include "tbc/density.hpp"
#include "tbc/tracks.hpp"

namespace tbc {

enum class MotionModel { Linear, Bounce, RandomTurn };

struct SceneSpec {
  int t_frames = 10, width = 64, height = 64;
  int n_targets = 2;
  MotionModel motion = MotionModel::Linear;
  double p_turn = 0.1;          // per-frame turn probability (RandomTurn)
  double speed_min = 1.0, speed_max = 2.0;
  double sigma = 2.0;           // rendering kernel
  int birth_min = 1, birth_max = 1;  // birth frame range (inclusive)
  int death_min = 0, death_max = 0;  // death frame range; 0 = last frame
  std::uint64_t seed = 1;
  double noise_sigma = 0.0;     // additive density noise, clipped at 0
  std::vector<int> palette;     // per-target intensity; filled if empty
  // Explicit trajectories override the motion model when non-empty:
  // one list of (t, x, y) per target, frames consecutive.
  std::vector<std::vector<TrackPoint>> scripted;
};

struct Scene {
  std::vector<MotRow> ground_truth;  // with boxes of the 2-sigma target size
  DensityVideo density;
  VelocityField velocity;
  std::vector<GrayImage> appearance;  // one per frame
  int target_box = 0;                 // side of the square target box
};

inline Scene generate_scene(const SceneSpec& spec) {
  if (spec.t_frames < 1 || spec.width < 4 || spec.height < 4)
    throw param_error("scene dims too small");
  if (spec.n_targets < 0) throw param_error("negative target count");
  const int box = std::max(3, 2 * static_cast<int>(std::ceil(2.0 * spec.sigma)) + 1);
  const double margin = std::max(1.0, 2.0 * spec.sigma);
  if (2.0 * margin >= spec.width - 1 || 2.0 * margin >= spec.height - 1)
    throw param_error("frame too small for the kernel margin");

  Rng rng(spec.seed);
  struct Target {
    int birth = 1, death = 1;
    std::vector<Point2> pos;  // per frame alive
    std::vector<Point2> vel;
  };
  std::vector<Target> targets;

  if (!spec.scripted.empty()) {
    for (const auto& pts : spec.scripted) {
      if (pts.empty()) throw param_error("scripted trajectory must be non-empty");
      Target tg;
      tg.birth = pts.front().t;
      tg.death = pts.back().t;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i > 0 && pts[i].t != pts[i - 1].t + 1)
          throw param_error("scripted frames must be consecutive");
        tg.pos.push_back({pts[i].x, pts[i].y});
      }
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::size_t j = i + 1 < pts.size() ? i + 1 : i;
        const std::size_t k = j == i ? (i > 0 ? i - 1 : i) : i;
        tg.vel.push_back({tg.pos[j].x - tg.pos[k].x, tg.pos[j].y - tg.pos[k].y});
      }
      targets.push_back(std::move(tg));
    }
  } else {
    for (int n = 0; n < spec.n_targets; ++n) {
      Target tg;
      tg.birth = static_cast<int>(rng.uniform_int(spec.birth_min, std::max(spec.birth_min, spec.birth_max)));
      const int dmin = spec.death_min > 0 ? spec.death_min : spec.t_frames;
      const int dmax = spec.death_max > 0 ? spec.death_max : spec.t_frames;
      tg.death = static_cast<int>(rng.uniform_int(dmin, std::max(dmin, dmax)));
      tg.birth = std::clamp(tg.birth, 1, spec.t_frames);
      tg.death = std::clamp(tg.death, tg.birth, spec.t_frames);
      Point2 p{rng.uniform(margin, spec.width - 1 - margin),
               rng.uniform(margin, spec.height - 1 - margin)};
      const double speed = rng.uniform(spec.speed_min, spec.speed_max);
      double angle = rng.uniform(0.0, 6.283185307179586);
      Point2 v{speed * std::cos(angle), speed * std::sin(angle)};
      for (int t = tg.birth; t <= tg.death; ++t) {
        tg.pos.push_back(p);
        tg.vel.push_back(v);
        if (spec.motion == MotionModel::RandomTurn && rng.next_double() < spec.p_turn) {
          angle = rng.uniform(0.0, 6.283185307179586);
          v = {speed * std::cos(angle), speed * std::sin(angle)};
        }
        // Advance with reflective borders.
        p.x += v.x;
        p.y += v.y;
        if (p.x < margin) {
          p.x = 2.0 * margin - p.x;
          v.x = -v.x;
        }
        if (p.x > spec.width - 1 - margin) {
          p.x = 2.0 * (spec.width - 1 - margin) - p.x;
          v.x = -v.x;
        }
        if (p.y < margin) {
          p.y = 2.0 * margin - p.y;
          v.y = -v.y;
        }
        if (p.y > spec.height - 1 - margin) {
          p.y = 2.0 * (spec.height - 1 - margin) - p.y;
          v.y = -v.y;
        }
      }
      targets.push_back(std::move(tg));
    }
  }

  Scene scene;
  scene.target_box = box;

  std::vector<int> palette = spec.palette;
  while (static_cast<int>(palette.size()) < static_cast<int>(targets.size()))
    palette.push_back(80 + (static_cast<int>(palette.size()) * 67) % 160);

  // Render density and assemble ground truth.
  std::vector<PointMass> points;
  for (std::size_t n = 0; n < targets.size(); ++n) {
    const auto& tg = targets[n];
    for (std::size_t i = 0; i < tg.pos.size(); ++i) {
      const int t = tg.birth + static_cast<int>(i);
      points.push_back({t, tg.pos[i].x, tg.pos[i].y, 1.0});
      MotRow row;
      row.t = t;
      row.id = static_cast<int>(n) + 1;
      row.left = tg.pos[i].x - (box - 1) / 2.0;
      row.top = tg.pos[i].y - (box - 1) / 2.0;
      row.width = box;
      row.height = box;
      scene.ground_truth.push_back(row);
    }
  }
  scene.density = render_from_points(points, spec.sigma, spec.t_frames, spec.width, spec.height);

  if (spec.noise_sigma > 0.0) {
    for (auto& frame : scene.density.frames)
      for (double& v : frame.values) v = std::max(0.0, v + spec.noise_sigma * rng.normal());
  }

  // Exact velocity field: each pixel within 2*sigma of a target carries the
  // velocity of the nearest such target.
  scene.velocity.frame_count = spec.t_frames;
  scene.velocity.width = spec.width;
  scene.velocity.height = spec.height;
  const std::size_t per = static_cast<std::size_t>(spec.width) * spec.height;
  scene.velocity.vx.assign(per * spec.t_frames, 0.0);
  scene.velocity.vy.assign(per * spec.t_frames, 0.0);
  const double reach = 2.0 * spec.sigma;
  for (int t = 1; t <= spec.t_frames; ++t) {
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) {
        double best_d = reach;
        Point2 best_v{0.0, 0.0};
        bool found = false;
        for (const auto& tg : targets) {
          if (t < tg.birth || t > tg.death) continue;
          const std::size_t i = static_cast<std::size_t>(t - tg.birth);
          const double d = std::hypot(x - tg.pos[i].x, y - tg.pos[i].y);
          if (d <= best_d) {
            best_d = d;
            best_v = tg.vel[i];
            found = true;
          }
        }
        if (found) {
          scene.velocity.vx[(static_cast<std::size_t>(t - 1)) * per + static_cast<std::size_t>(y) * spec.width + x] = best_v.x;
          scene.velocity.vy[(static_cast<std::size_t>(t - 1)) * per + static_cast<std::size_t>(y) * spec.width + x] = best_v.y;
        }
      }
  }

  // Appearance: flat palette intensity painted in each target's box.
  scene.appearance.resize(static_cast<std::size_t>(spec.t_frames));
  for (int t = 1; t <= spec.t_frames; ++t) {
    GrayImage img;
    img.width = spec.width;
    img.height = spec.height;
    img.pixels.assign(per, 0);
    for (std::size_t n = 0; n < targets.size(); ++n) {
      const auto& tg = targets[n];
      if (t < tg.birth || t > tg.death) continue;
      const std::size_t i = static_cast<std::size_t>(t - tg.birth);
      const Rect r = clip_rect(
          Rect{static_cast<int>(std::lround(tg.pos[i].x)) - (box - 1) / 2,
               static_cast<int>(std::lround(tg.pos[i].y)) - (box - 1) / 2,
               static_cast<int>(std::lround(tg.pos[i].x)) + (box - 1) / 2,
               static_cast<int>(std::lround(tg.pos[i].y)) + (box - 1) / 2},
          spec.width, spec.height);
      for (int y = r.y0; y <= r.y1; ++y)
        for (int x = r.x0; x <= r.x1; ++x)
          img.pixels[static_cast<std::size_t>(y) * spec.width + x] =
              static_cast<std::uint8_t>(palette[n]);
    }
    scene.appearance[static_cast<std::size_t>(t - 1)] = std::move(img);
  }
  return scene;
}

inline void write_gt_csv(const std::vector<MotRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw io_error("cannot open for writing: " + path);
  std::vector<MotRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const MotRow& a, const MotRow& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.id < b.id;
  });
  for (const auto& r : sorted)
    os << r.t << "," << r.id << "," << r.left << "," << r.top << "," << r.width << ","
       << r.height << ",1,-1,-1,-1\n";
  if (!os) throw io_error("write failed: " + path);
}

}  // namespace tbc
