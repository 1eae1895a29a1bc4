#pragma once

// Density-map videos and the binary container they travel in.
//
// File format ("TBCD1"): magic, u32 T, u32 W, u32 H, then T*W*H little-endian
// f32 values, row-major per frame, frames in order. Perspective maps use the
// same container with T=1 and magic "TBCP1"; velocity fields use "TBCV1" with
// two planes per frame (all vx, then all vy, each W*H row-major).

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tbc/common.hpp"

namespace tbc {

struct DensityMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, all >= 0

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }

  double total() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
};

inline DensityMap make_map(int w, int h, double fill = 0.0) {
  if (w <= 0 || h <= 0) throw param_error("density map dimensions must be positive");
  DensityMap m;
  m.width = w;
  m.height = h;
  m.values.assign(static_cast<std::size_t>(w) * h, fill);
  return m;
}

// Frames are addressed 1-based (t = 1..T) throughout the public API.
struct DensityVideo {
  std::vector<DensityMap> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
  int width() const { return frames.empty() ? 0 : frames.front().width; }
  int height() const { return frames.empty() ? 0 : frames.front().height; }

  const DensityMap& frame(int t) const {
    if (t < 1 || t > frame_count()) throw bounds_error("frame index out of range");
    return frames[static_cast<std::size_t>(t - 1)];
  }
  DensityMap& frame(int t) {
    if (t < 1 || t > frame_count()) throw bounds_error("frame index out of range");
    return frames[static_cast<std::size_t>(t - 1)];
  }
};

inline DensityVideo make_video(int t, int w, int h, double fill = 0.0) {
  if (t < 1) throw param_error("video needs at least one frame");
  DensityVideo v;
  v.frames.assign(static_cast<std::size_t>(t), make_map(w, h, fill));
  return v;
}

// Per-pixel expected target height; row-linear, column-constant when built
// from two anchors, but any positive grid is accepted.
struct PerspectiveMap {
  int width = 0;
  int height = 0;
  std::vector<double> scale;  // row-major, all > 0

  double at(int x, int y) const { return scale[static_cast<std::size_t>(y) * width + x]; }
};

// Mapping between (t, x, y) and the index into the global vectorization d.
struct PixelIndex {
  int t = 1;  // 1-based frame
  int x = 0;
  int y = 0;

  std::size_t linear(int w, int h) const {
    return static_cast<std::size_t>(t - 1) * w * h + static_cast<std::size_t>(y) * w + x;
  }
  static PixelIndex from_linear(std::size_t lin, int w, int h) {
    const std::size_t per = static_cast<std::size_t>(w) * h;
    PixelIndex p;
    p.t = static_cast<int>(lin / per) + 1;
    const std::size_t rem = lin % per;
    p.y = static_cast<int>(rem / w);
    p.x = static_cast<int>(rem % w);
    return p;
  }
};

// ---------------------------------------------------------------------------
// Binary container

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  const std::array<unsigned char, 4> b = {
      static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
      static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b.data()), 4);
}

inline std::uint32_t read_u32(std::istream& is, const std::string& what) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4))
    throw format_error("truncated header: missing " + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  write_u32(os, u);
}

inline float read_f32(std::istream& is, bool& ok) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) {
    ok = false;
    return 0.0f;
  }
  const std::uint32_t u = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                          (static_cast<std::uint32_t>(b[2]) << 16) |
                          (static_cast<std::uint32_t>(b[3]) << 24);
  float f;
  std::memcpy(&f, &u, 4);
  ok = true;
  return f;
}

inline void save_planes(const std::string& path, const char* magic, std::uint32_t t,
                        std::uint32_t w, std::uint32_t h,
                        const std::vector<const std::vector<double>*>& planes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot open for writing: " + path);
  os.write(magic, 5);
  write_u32(os, t);
  write_u32(os, w);
  write_u32(os, h);
  for (const auto* plane : planes)
    for (double v : *plane) write_f32(os, static_cast<float>(v));
  if (!os) throw io_error("write failed: " + path);
}

struct RawContainer {
  std::uint32_t t = 0, w = 0, h = 0;
  std::vector<float> data;
};

inline RawContainer load_container(const std::string& path, const char* magic,
                                   std::size_t planes_per_frame) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open: " + path);
  char got[5];
  if (!is.read(got, 5)) throw format_error(path + ": truncated magic");
  if (std::memcmp(got, magic, 5) != 0)
    throw format_error(path + ": bad magic, expected " + std::string(magic, 5));
  RawContainer rc;
  rc.t = read_u32(is, "frame count");
  rc.w = read_u32(is, "width");
  rc.h = read_u32(is, "height");
  if (rc.t == 0 || rc.w == 0 || rc.h == 0)
    throw format_error(path + ": zero dimension in header");
  const std::size_t n =
      static_cast<std::size_t>(rc.t) * rc.w * rc.h * planes_per_frame;
  rc.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    bool ok = true;
    rc.data[i] = read_f32(is, ok);
    if (!ok) {
      std::ostringstream msg;
      msg << path << ": frame " << (i / (static_cast<std::size_t>(rc.w) * rc.h * planes_per_frame)) + 1
          << " truncated at value offset " << i;
      throw format_error(msg.str());
    }
  }
  return rc;
}

}  // namespace detail

inline void save_density_video(const DensityVideo& v, const std::string& path) {
  if (v.frame_count() < 1) throw param_error("cannot save empty video");
  std::vector<const std::vector<double>*> planes;
  planes.reserve(v.frames.size());
  for (const auto& f : v.frames) {
    if (f.width != v.width() || f.height != v.height())
      throw integrity_error("frame size mismatch while saving");
    planes.push_back(&f.values);
  }
  detail::save_planes(path, "TBCD1", static_cast<std::uint32_t>(v.frame_count()),
                      static_cast<std::uint32_t>(v.width()),
                      static_cast<std::uint32_t>(v.height()), planes);
}

inline DensityVideo load_density_video(const std::string& path) {
  const auto rc = detail::load_container(path, "TBCD1", 1);
  DensityVideo v = make_video(static_cast<int>(rc.t), static_cast<int>(rc.w),
                              static_cast<int>(rc.h));
  const std::size_t per = static_cast<std::size_t>(rc.w) * rc.h;
  for (std::uint32_t t = 0; t < rc.t; ++t)
    for (std::size_t i = 0; i < per; ++i) {
      const float f = rc.data[t * per + i];
      if (f < 0.0f) {
        std::ostringstream msg;
        msg << path << ": negative density " << f << " at frame " << (t + 1)
            << " offset " << i;
        throw format_error(msg.str());
      }
      v.frames[t].values[i] = static_cast<double>(f);
    }
  return v;
}

// CSV import: one row "t,x,y,value" per nonzero cell; dims supplied by caller.
inline DensityVideo load_density_csv(const std::string& path, int t_frames, int w, int h) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open: " + path);
  DensityVideo v = make_video(t_frames, w, h);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    int t, x, y;
    double val;
    char c1, c2, c3;
    std::istringstream ss(line);
    if (!(ss >> t >> c1 >> x >> c2 >> y >> c3 >> val) || c1 != ',' || c2 != ',' || c3 != ',')
      throw format_error(path + ": malformed row at line " + std::to_string(lineno));
    if (t < 1 || t > t_frames || x < 0 || x >= w || y < 0 || y >= h)
      throw format_error(path + ": cell out of bounds at line " + std::to_string(lineno));
    if (val < 0.0)
      throw format_error(path + ": negative density at line " + std::to_string(lineno));
    v.frame(t).at(x, y) = val;
  }
  return v;
}

inline void save_perspective(const PerspectiveMap& p, const std::string& path) {
  std::vector<const std::vector<double>*> planes = {&p.scale};
  detail::save_planes(path, "TBCP1", 1, static_cast<std::uint32_t>(p.width),
                      static_cast<std::uint32_t>(p.height), planes);
}

inline PerspectiveMap load_perspective(const std::string& path) {
  const auto rc = detail::load_container(path, "TBCP1", 1);
  if (rc.t != 1) throw format_error(path + ": perspective container must have T=1");
  PerspectiveMap p;
  p.width = static_cast<int>(rc.w);
  p.height = static_cast<int>(rc.h);
  p.scale.resize(rc.data.size());
  for (std::size_t i = 0; i < rc.data.size(); ++i) {
    if (rc.data[i] <= 0.0f)
      throw format_error(path + ": non-positive scale at offset " + std::to_string(i));
    p.scale[i] = static_cast<double>(rc.data[i]);
  }
  return p;
}

// Velocity field: per frame, per pixel (vx, vy) in pixels/frame.
struct VelocityField {
  int frame_count = 0;
  int width = 0;
  int height = 0;
  std::vector<double> vx, vy;  // frame-major, row-major within frame

  double x_at(int t, int x, int y) const {
    return vx[(static_cast<std::size_t>(t - 1) * height + y) * width + x];
  }
  double y_at(int t, int x, int y) const {
    return vy[(static_cast<std::size_t>(t - 1) * height + y) * width + x];
  }
};

inline void save_velocity_field(const VelocityField& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot open for writing: " + path);
  os.write("TBCV1", 5);
  detail::write_u32(os, static_cast<std::uint32_t>(f.frame_count));
  detail::write_u32(os, static_cast<std::uint32_t>(f.width));
  detail::write_u32(os, static_cast<std::uint32_t>(f.height));
  const std::size_t per = static_cast<std::size_t>(f.width) * f.height;
  for (int t = 0; t < f.frame_count; ++t) {
    for (std::size_t i = 0; i < per; ++i)
      detail::write_f32(os, static_cast<float>(f.vx[t * per + i]));
    for (std::size_t i = 0; i < per; ++i)
      detail::write_f32(os, static_cast<float>(f.vy[t * per + i]));
  }
  if (!os) throw io_error("write failed: " + path);
}

inline VelocityField load_velocity_field(const std::string& path) {
  const auto rc = detail::load_container(path, "TBCV1", 2);
  VelocityField f;
  f.frame_count = static_cast<int>(rc.t);
  f.width = static_cast<int>(rc.w);
  f.height = static_cast<int>(rc.h);
  const std::size_t per = static_cast<std::size_t>(rc.w) * rc.h;
  f.vx.resize(per * rc.t);
  f.vy.resize(per * rc.t);
  for (std::uint32_t t = 0; t < rc.t; ++t)
    for (std::size_t i = 0; i < per; ++i) {
      f.vx[t * per + i] = rc.data[t * per * 2 + i];
      f.vy[t * per + i] = rc.data[t * per * 2 + per + i];
    }
  return f;
}

// ---------------------------------------------------------------------------
// Rendering and sums

struct PointMass {
  int t = 1;  // 1-based frame
  double x = 0.0;
  double y = 0.0;
  double mass = 1.0;
};

// Renders discretized Gaussians, truncated at 4*sigma and renormalized over
// the in-frame support so every point contributes exactly its mass.
inline DensityVideo render_from_points(const std::vector<PointMass>& points, double sigma,
                                       int t_frames, int w, int h) {
  if (sigma <= 0.0) throw param_error("sigma must be positive");
  DensityVideo v = make_video(t_frames, w, h);
  std::vector<std::vector<std::size_t>> per_frame(static_cast<std::size_t>(t_frames));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (p.t < 1 || p.t > t_frames || p.x < 0.0 || p.x > w - 1 || p.y < 0.0 || p.y > h - 1)
      throw param_error("point " + std::to_string(i) + " out of bounds");
    per_frame[static_cast<std::size_t>(p.t - 1)].push_back(i);
  }
  const int reach = static_cast<int>(std::ceil(4.0 * sigma));
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  parallel_for(static_cast<std::size_t>(t_frames), [&](std::size_t fi) {
    DensityMap& frame = v.frames[fi];
    // Point-index order per frame keeps sums independent of the schedule.
    for (std::size_t pi : per_frame[fi]) {
      const auto& p = points[pi];
      const int x_lo = std::max(0, static_cast<int>(std::floor(p.x)) - reach);
      const int x_hi = std::min(w - 1, static_cast<int>(std::ceil(p.x)) + reach);
      const int y_lo = std::max(0, static_cast<int>(std::floor(p.y)) - reach);
      const int y_hi = std::min(h - 1, static_cast<int>(std::ceil(p.y)) + reach);
      double norm = 0.0;
      for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x) {
          const double dx = x - p.x, dy = y - p.y;
          norm += std::exp(-(dx * dx + dy * dy) * inv2s2);
        }
      if (norm <= 0.0) continue;
      const double scale = p.mass / norm;
      for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x) {
          const double dx = x - p.x, dy = y - p.y;
          frame.at(x, y) += scale * std::exp(-(dx * dx + dy * dy) * inv2s2);
        }
    }
  });
  return v;
}

// Sum of density values inside the inclusive rect on frame t.
inline double region_sum(const DensityVideo& v, int t, const Rect& rect) {
  const DensityMap& f = v.frame(t);
  if (rect.x0 < 0 || rect.y0 < 0 || rect.x1 >= f.width || rect.y1 >= f.height ||
      rect.x0 > rect.x1 || rect.y0 > rect.y1)
    throw bounds_error("region rect out of frame bounds");
  double s = 0.0;
  for (int y = rect.y0; y <= rect.y1; ++y) {
    const double* row = &f.values[static_cast<std::size_t>(y) * f.width];
    for (int x = rect.x0; x <= rect.x1; ++x) s += row[x];
  }
  return s;
}

struct PerspectiveAnchor {
  double row = 0.0;
  double height = 0.0;  // expected target height in pixels at that row
};

// Row-linear, column-constant scale between two anchors, clamped outside.
inline PerspectiveMap build_perspective(const PerspectiveAnchor& a, const PerspectiveAnchor& b,
                                        int w, int h) {
  if (w <= 0 || h <= 0) throw param_error("perspective dims must be positive");
  if (a.height <= 0.0 || b.height <= 0.0) throw param_error("anchor heights must be positive");
  if (a.row == b.row) throw param_error("anchor rows must be distinct");
  const PerspectiveAnchor& top = a.row < b.row ? a : b;
  const PerspectiveAnchor& bot = a.row < b.row ? b : a;
  PerspectiveMap p;
  p.width = w;
  p.height = h;
  p.scale.resize(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    double s;
    if (y <= top.row)
      s = top.height;
    else if (y >= bot.row)
      s = bot.height;
    else
      s = top.height + (bot.height - top.height) * (y - top.row) / (bot.row - top.row);
    for (int x = 0; x < w; ++x) p.scale[static_cast<std::size_t>(y) * w + x] = s;
  }
  return p;
}

// Scale at a possibly fractional row, linear between integer rows.
inline double perspective_scale_at(const PerspectiveMap& p, double row) {
  const double r = std::clamp(row, 0.0, static_cast<double>(p.height - 1));
  const int r0 = static_cast<int>(std::floor(r));
  const int r1 = std::min(r0 + 1, p.height - 1);
  const double frac = r - r0;
  return p.at(0, r0) * (1.0 - frac) + p.at(0, r1) * frac;
}

// ---------------------------------------------------------------------------
// 8-bit grayscale PGM (binary P5), used for appearance patches.

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

inline void save_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot open for writing: " + path);
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw io_error("write failed: " + path);
}

inline GrayImage load_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open: " + path);
  std::string magic;
  is >> magic;
  if (magic != "P5") throw format_error(path + ": only binary P5 PGM supported");
  auto next_int = [&](const char* what) {
    // Skips whitespace and '#' comment lines between header tokens.
    int c;
    while ((c = is.get()) != EOF) {
      if (c == '#') {
        while ((c = is.get()) != EOF && c != '\n') {
        }
      } else if (!std::isspace(c)) {
        is.unget();
        break;
      }
    }
    long v = -1;
    if (!(is >> v) || v < 0) throw format_error(path + std::string(": bad ") + what);
    return static_cast<int>(v);
  };
  GrayImage img;
  img.width = next_int("width");
  img.height = next_int("height");
  const int maxval = next_int("maxval");
  if (maxval != 255) throw format_error(path + ": only maxval 255 supported");
  is.get();  // single whitespace after maxval
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  if (!is.read(reinterpret_cast<char*>(img.pixels.data()),
               static_cast<std::streamsize>(img.pixels.size())))
    throw format_error(path + ": truncated pixel data");
  return img;
}

}  // namespace tbc
