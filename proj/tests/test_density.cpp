#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tbc/density.hpp"

using namespace tbc;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("binary container round-trips values, dims and frame order") {
  DensityVideo v = make_video(2, 4, 4);
  // f32-representable values survive the 32-bit container bit-exactly.
  v.frame(1).at(0, 0) = 0.5;
  v.frame(1).at(3, 2) = 0.25;
  v.frame(2).at(1, 1) = 1.75;
  const std::string path = tmp_path("tbc_roundtrip.tbcd");
  save_density_video(v, path);
  const DensityVideo w = load_density_video(path);
  REQUIRE(w.frame_count() == 2);
  REQUIRE(w.width() == 4);
  REQUIRE(w.height() == 4);
  for (int t = 1; t <= 2; ++t)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) CHECK(w.frame(t).at(x, y) == v.frame(t).at(x, y));
  std::filesystem::remove(path);
}

TEST_CASE("loading two frames of zeros gives zero sums") {
  const std::string path = tmp_path("tbc_zeros.tbcd");
  save_density_video(make_video(2, 4, 4), path);
  const DensityVideo v = load_density_video(path);
  CHECK(v.frame_count() == 2);
  CHECK(v.frame(1).total() == 0.0);
  CHECK(v.frame(2).total() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("negative value in the container is a format error naming the offset") {
  const std::string path = tmp_path("tbc_negative.tbcd");
  {
    std::ofstream os(path, std::ios::binary);
    os.write("TBCD1", 5);
    const auto u32 = [&](std::uint32_t v) {
      unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 24)};
      os.write(reinterpret_cast<char*>(b), 4);
    };
    u32(1);
    u32(2);
    u32(2);
    const float vals[4] = {0.0f, 0.1f, -0.1f, 0.0f};
    for (float f : vals) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      u32(u);
    }
  }
  try {
    load_density_video(path);
    FAIL("expected format error");
  } catch (const format_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("offset 2") != std::string::npos);
    CHECK(msg.find("frame 1") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("bad magic and truncation are format errors") {
  const std::string path = tmp_path("tbc_badmagic.tbcd");
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE!";
  }
  CHECK_THROWS_AS(load_density_video(path), format_error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_density_video(tmp_path("tbc_missing_file.tbcd")), io_error);
}

TEST_CASE("csv import places cells and validates bounds") {
  const std::string path = tmp_path("tbc_cells.csv");
  {
    std::ofstream os(path);
    os << "# t,x,y,value\n1,0,0,0.5\n2,3,1,1.25\n";
  }
  const DensityVideo v = load_density_csv(path, 2, 4, 2);
  CHECK(v.frame(1).at(0, 0) == 0.5);
  CHECK(v.frame(2).at(3, 1) == 1.25);
  {
    std::ofstream os(path);
    os << "1,9,0,0.5\n";
  }
  CHECK_THROWS_AS(load_density_csv(path, 2, 4, 2), format_error);
  {
    std::ofstream os(path);
    os << "1,0,0,-0.5\n";
  }
  CHECK_THROWS_AS(load_density_csv(path, 2, 4, 2), format_error);
  std::filesystem::remove(path);
}

TEST_CASE("rendering one unit point normalizes frame mass exactly") {
  const DensityVideo v = render_from_points({{1, 31.5, 30.0, 1.0}}, 2.0, 1, 64, 64);
  CHECK(v.frame(1).total() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(v.frame(1).total() - 1.0) < 1e-9);
}

TEST_CASE("rendering no points gives an all-zero video") {
  const DensityVideo v = render_from_points({}, 2.0, 3, 16, 16);
  for (int t = 1; t <= 3; ++t) CHECK(v.frame(t).total() == 0.0);
}

TEST_CASE("two overlapping kernels sum to mass 2") {
  const DensityVideo v =
      render_from_points({{1, 30.0, 30.0, 1.0}, {1, 32.0, 31.0, 1.0}}, 2.0, 1, 64, 64);
  CHECK(std::abs(v.frame(1).total() - 2.0) < 1e-9);
}

TEST_CASE("rendering is additive over point sets") {
  const std::vector<PointMass> a = {{1, 10.0, 12.0, 1.0}, {2, 20.0, 8.0, 0.5}};
  const std::vector<PointMass> b = {{1, 11.5, 12.5, 2.0}, {2, 5.0, 5.0, 1.0}};
  std::vector<PointMass> both = a;
  both.insert(both.end(), b.begin(), b.end());
  const DensityVideo va = render_from_points(a, 1.5, 2, 32, 32);
  const DensityVideo vb = render_from_points(b, 1.5, 2, 32, 32);
  const DensityVideo vab = render_from_points(both, 1.5, 2, 32, 32);
  for (int t = 1; t <= 2; ++t)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        CHECK(vab.frame(t).at(x, y) ==
              doctest::Approx(va.frame(t).at(x, y) + vb.frame(t).at(x, y)).epsilon(1e-12));
}

TEST_CASE("out-of-bounds point is rejected with its index") {
  try {
    render_from_points({{1, 5.0, 5.0, 1.0}, {1, -1.0, 5.0, 1.0}}, 1.0, 1, 16, 16);
    FAIL("expected param error");
  } catch (const param_error& e) {
    CHECK(std::string(e.what()).find("point 1") != std::string::npos);
  }
}

TEST_CASE("region_sum on zero map is zero and bounds are checked") {
  const DensityVideo v = make_video(1, 16, 16);
  CHECK(region_sum(v, 1, {2, 3, 9, 9}) == 0.0);
  CHECK_THROWS_AS(region_sum(v, 1, {0, 0, 16, 5}), bounds_error);
  CHECK_THROWS_AS(region_sum(v, 2, {0, 0, 5, 5}), bounds_error);
}

TEST_CASE("fully contained gaussian sums to its mass") {
  const DensityVideo v = render_from_points({{1, 32.0, 32.0, 1.0}}, 2.0, 1, 64, 64);
  CHECK(region_sum(v, 1, {16, 16, 48, 48}) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("half-plane region sum matches a direct summation oracle") {
  // Gaussian of mass 1 at the center of a 64x64 grid, sigma 2; rect covering
  // the left half-plane through its center.
  const DensityVideo v = render_from_points({{1, 32.0, 32.0, 1.0}}, 2.0, 1, 64, 64);
  const Rect half{0, 0, 32, 63};
  double oracle = 0.0;
  for (int y = 0; y <= 63; ++y)
    for (int x = 0; x <= 32; ++x) oracle += v.frame(1).at(x, y);
  CHECK(region_sum(v, 1, half) == doctest::Approx(oracle).epsilon(1e-15));
  // The frozen value: just over half the mass, since the center column is
  // included in the rect.
  CHECK(oracle > 0.5);
  CHECK(oracle < 0.65);
}

TEST_CASE("region sums over a partition reproduce the frame total") {
  const DensityVideo v = render_from_points(
      {{1, 10.0, 20.0, 1.0}, {1, 40.0, 8.0, 2.0}, {1, 25.0, 55.0, 0.25}}, 2.5, 1, 64, 64);
  const double whole = region_sum(v, 1, {0, 0, 63, 63});
  double parts = 0.0;
  parts += region_sum(v, 1, {0, 0, 31, 31});
  parts += region_sum(v, 1, {32, 0, 63, 31});
  parts += region_sum(v, 1, {0, 32, 31, 63});
  parts += region_sum(v, 1, {32, 32, 63, 63});
  CHECK(parts == doctest::Approx(whole).epsilon(1e-12));
  CHECK(std::abs(parts - whole) < 1e-9);
}

TEST_CASE("perspective from equal anchors is constant") {
  const PerspectiveMap p = build_perspective({0.0, 10.0}, {99.0, 10.0}, 8, 100);
  for (int y : {0, 31, 99}) CHECK(p.at(3, y) == 10.0);
}

TEST_CASE("perspective interpolates linearly and clamps outside anchors") {
  const PerspectiveMap p = build_perspective({0.0, 10.0}, {99.0, 20.0}, 4, 100);
  CHECK(perspective_scale_at(p, 49.5) == doctest::Approx(15.0));
  CHECK(p.at(0, 0) == doctest::Approx(10.0));
  CHECK(p.at(3, 99) == doctest::Approx(20.0));
  const PerspectiveMap q = build_perspective({20.0, 10.0}, {80.0, 20.0}, 4, 100);
  CHECK(q.at(0, 5) == doctest::Approx(10.0));   // above top anchor
  CHECK(q.at(0, 95) == doctest::Approx(20.0));  // below bottom anchor
}

TEST_CASE("perspective rejects identical rows and non-positive heights") {
  CHECK_THROWS_AS(build_perspective({5.0, 10.0}, {5.0, 20.0}, 4, 10), param_error);
  CHECK_THROWS_AS(build_perspective({0.0, 0.0}, {9.0, 20.0}, 4, 10), param_error);
}

TEST_CASE("pixel index is bijective with (t, x, y)") {
  const int W = 7, H = 5;
  for (int t = 1; t <= 3; ++t)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const PixelIndex p{t, x, y};
        const std::size_t lin = p.linear(W, H);
        CHECK(lin == static_cast<std::size_t>((t - 1) * W * H + y * W + x));
        const PixelIndex q = PixelIndex::from_linear(lin, W, H);
        CHECK(q.t == t);
        CHECK(q.x == x);
        CHECK(q.y == y);
      }
}

TEST_CASE("velocity field container round-trips") {
  VelocityField f;
  f.frame_count = 2;
  f.width = 3;
  f.height = 2;
  f.vx.assign(12, 0.0);
  f.vy.assign(12, 0.0);
  f.vx[1] = 1.5;
  f.vy[7] = -2.25;
  const std::string path = tmp_path("tbc_vel.tbcv");
  save_velocity_field(f, path);
  const VelocityField g = load_velocity_field(path);
  CHECK(g.frame_count == 2);
  CHECK(g.x_at(1, 1, 0) == 1.5);
  CHECK(g.y_at(2, 1, 0) == -2.25);
  CHECK(g.x_at(2, 2, 1) == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("pgm round-trips 8-bit grayscale") {
  GrayImage img;
  img.width = 4;
  img.height = 3;
  img.pixels = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 250, 255};
  const std::string path = tmp_path("tbc_img.pgm");
  save_pgm(img, path);
  const GrayImage back = load_pgm(path);
  REQUIRE(back.width == 4);
  REQUIRE(back.height == 3);
  CHECK(back.pixels == img.pixels);
  std::filesystem::remove(path);
}
