#include <doctest.h>

#include <cmath>
#include <set>

#include "tbc/graph.hpp"

using namespace tbc;

namespace {

CandidateNode node(int id, int t, double x, double y, Point2 vel = {0, 0}) {
  CandidateNode n;
  n.id = id;
  n.t = t;
  n.phi = {x, y};
  n.velocity = vel;
  return n;
}

Histogram uniform_hist() {
  Histogram h{};
  for (double& v : h) v = 1.0 / kHistogramBins;
  return h;
}

}  // namespace

TEST_CASE("extraction on an all-zero video is empty") {
  CHECK(extract_candidates(make_video(3, 16, 16), 0.005, 3.0).empty());
}

TEST_CASE("a single gaussian yields one candidate at its mode") {
  const DensityVideo v = render_from_points({{1, 16.0, 12.0, 1.0}}, 2.0, 1, 32, 32);
  const auto cands = extract_candidates(v, 0.005, 3.0);
  REQUIRE(cands.size() >= 1);
  CHECK(std::abs(cands[0].phi.x - 16.0) <= 1.0);
  CHECK(std::abs(cands[0].phi.y - 12.0) <= 1.0);
  // The top candidate carries the peak density.
  for (const auto& c : cands) CHECK(c.density <= cands[0].density);
}

TEST_CASE("two well-separated gaussians match a brute-force local-maxima oracle") {
  const DensityVideo v =
      render_from_points({{1, 8.0, 16.0, 1.0}, {1, 28.0, 16.0, 1.0}}, 2.0, 1, 40, 32);
  // Oracle: per blob, the argmax over a half plane split at x = 18.
  const DensityMap& f = v.frame(1);
  Point2 left{0, 0}, right{0, 0};
  double lbest = -1.0, rbest = -1.0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 40; ++x) {
      if (x < 18 && f.at(x, y) > lbest) {
        lbest = f.at(x, y);
        left = {static_cast<double>(x), static_cast<double>(y)};
      }
      if (x >= 18 && f.at(x, y) > rbest) {
        rbest = f.at(x, y);
        right = {static_cast<double>(x), static_cast<double>(y)};
      }
    }
  const auto cands = extract_candidates(v, 0.005, 6.0);
  bool found_left = false, found_right = false;
  for (const auto& c : cands) {
    if (c.phi.x == left.x && c.phi.y == left.y) found_left = true;
    if (c.phi.x == right.x && c.phi.y == right.y) found_right = true;
  }
  CHECK(found_left);
  CHECK(found_right);
}

TEST_CASE("ids are frame-major then density-descending") {
  const DensityVideo v = render_from_points(
      {{1, 8.0, 8.0, 1.0}, {1, 24.0, 24.0, 2.0}, {2, 16.0, 16.0, 1.0}}, 2.0, 2, 32, 32);
  const auto cands = extract_candidates(v, 0.01, 4.0);
  REQUIRE(cands.size() >= 3);
  for (std::size_t i = 0; i < cands.size(); ++i) CHECK(cands[i].id == static_cast<int>(i));
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const bool ordered = cands[i - 1].t < cands[i].t ||
                         (cands[i - 1].t == cands[i].t &&
                          cands[i - 1].density >= cands[i].density);
    CHECK(ordered);
  }
}

TEST_CASE("nms keeps accepted points at least the radius apart") {
  const DensityVideo v = render_from_points(
      {{1, 15.0, 15.0, 1.0}, {1, 17.0, 16.0, 1.0}, {1, 16.0, 14.0, 1.0}}, 2.5, 1, 32, 32);
  const double radius = 4.0;
  const auto cands = extract_candidates(v, 0.001, radius);
  for (std::size_t i = 0; i < cands.size(); ++i)
    for (std::size_t j = i + 1; j < cands.size(); ++j) {
      if (cands[i].t != cands[j].t) continue;
      CHECK(dist2d(cands[i].phi, cands[j].phi) > radius);
    }
}

TEST_CASE("identical nodes with full similarity cost -3") {
  EdgeCostParams p;
  CandidateNode a = node(0, 1, 5, 5, {1, 0});
  CandidateNode b = node(1, 2, 5, 5, {1, 0});
  a.appearance = uniform_hist();
  b.appearance = uniform_hist();
  CHECK(edge_cost(a, b, p) == doctest::Approx(-3.0));
}

TEST_CASE("vanishing similarity drives the cost to zero from below") {
  EdgeCostParams p;
  Histogram ha{}, hb{};
  ha[0] = 1.0;
  hb[8] = 1.0;  // disjoint
  CandidateNode a = node(0, 1, 0, 0, {1, 0});
  CandidateNode b = node(1, 2, 500, 0, {0, 1});  // orthogonal velocities
  a.appearance = ha;
  b.appearance = hb;
  const double c = edge_cost(a, b, p);
  CHECK(c < 0.0);
  CHECK(c > -1e-9);
}

TEST_CASE("edge cost matches hand arithmetic on the mixed example") {
  EdgeCostParams p;  // defaults alpha=beta=gamma=lambda=1
  Histogram ha{}, hb{};
  ha[0] = 0.5;
  ha[1] = 0.5;
  hb[0] = 0.5;
  hb[2] = 0.5;  // intersection 0.5
  CandidateNode a = node(0, 1, 0, 0, {1, 0});
  CandidateNode b = node(1, 2, 3, 4, {1, 1});
  a.appearance = ha;
  b.appearance = hb;
  const double expected = -(std::exp(-5.0) + 0.5 + 1.0 / std::sqrt(2.0));
  CHECK(edge_cost(a, b, p) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("missing appearance or velocity zeroes those terms") {
  EdgeCostParams p;
  CandidateNode a = node(0, 1, 2, 2);
  CandidateNode b = node(1, 2, 2, 2);
  // No appearance, zero velocities: only the location term remains.
  CHECK(edge_cost(a, b, p) == doctest::Approx(-1.0));
  a.velocity = {1e-9, 0.0};  // below the motion-evidence floor
  b.velocity = {1.0, 0.0};
  CHECK(edge_cost(a, b, p) == doctest::Approx(-1.0));
}

TEST_CASE("edge cost stays within [-(alpha+beta+gamma), 0] for random inputs") {
  EdgeCostParams p;
  p.alpha = 1.5;
  p.beta = 0.7;
  p.gamma = 2.0;
  p.lambda = 0.8;
  Rng rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    CandidateNode a = node(0, 1, rng.uniform(0, 50), rng.uniform(0, 50),
                           {rng.uniform(-3, 3), rng.uniform(-3, 3)});
    CandidateNode b = node(1, 2, rng.uniform(0, 50), rng.uniform(0, 50),
                           {rng.uniform(-3, 3), rng.uniform(-3, 3)});
    if (trial % 3 == 0) {
      Histogram ha{}, hb{};
      double sa = 0.0, sb = 0.0;
      for (int i = 0; i < kHistogramBins; ++i) {
        ha[i] = rng.next_double();
        hb[i] = rng.next_double();
        sa += ha[i];
        sb += hb[i];
      }
      for (int i = 0; i < kHistogramBins; ++i) {
        ha[i] /= sa;
        hb[i] /= sb;
      }
      a.appearance = ha;
      b.appearance = hb;
    }
    const double c = edge_cost(a, b, p);
    CHECK(c <= 0.0);
    CHECK(c >= -(p.alpha + p.beta + p.gamma) - 1e-12);
  }
}

TEST_CASE("a chain of nodes gets T-1 edges plus source and sink arcs") {
  std::vector<CandidateNode> nodes;
  for (int t = 1; t <= 4; ++t) nodes.push_back(node(t - 1, t, 10.0 + t, 10.0));
  EdgeCostParams p;
  const CandidateGraph g = build_graph(nodes, p, 5.0);
  CHECK(g.edges.size() == 3);
  CHECK(g.nodes.size() == 4);
  CHECK(g.c_si == 10.0);
  CHECK(g.c_it == 10.0);
}

TEST_CASE("nodes beyond max displacement get no edges") {
  std::vector<CandidateNode> nodes = {node(0, 1, 0, 0), node(1, 2, 30, 0)};
  const CandidateGraph g = build_graph(nodes, EdgeCostParams{}, 8.0);
  CHECK(g.edges.empty());
}

TEST_CASE("random instance matches a brute-force pair enumeration") {
  Rng rng(11);
  std::vector<CandidateNode> nodes;
  int id = 0;
  for (int t = 1; t <= 3; ++t)
    for (int i = 0; i < 5; ++i)
      nodes.push_back(node(id++, t, rng.uniform(0, 30), rng.uniform(0, 30)));
  const double radius = 12.0;
  const CandidateGraph g = build_graph(nodes, EdgeCostParams{}, radius);

  std::set<std::pair<int, int>> oracle;
  for (const auto& a : nodes)
    for (const auto& b : nodes)
      if (b.t == a.t + 1 && dist2d(a.phi, b.phi) <= radius) oracle.insert({a.id, b.id});
  std::set<std::pair<int, int>> got;
  for (const auto& e : g.edges) {
    CHECK(nodes[e.to].t == nodes[e.from].t + 1);
    got.insert({e.from, e.to});
  }
  CHECK(got == oracle);
  // No duplicates.
  CHECK(got.size() == g.edges.size());
}

TEST_CASE("graph is layered: edges advance one frame") {
  Rng rng(3);
  std::vector<CandidateNode> nodes;
  int id = 0;
  for (int t = 1; t <= 4; ++t)
    for (int i = 0; i < 3; ++i)
      nodes.push_back(node(id++, t, rng.uniform(0, 20), rng.uniform(0, 20)));
  const CandidateGraph g = build_graph(nodes, EdgeCostParams{}, 25.0);
  for (const auto& e : g.edges) CHECK(g.nodes[e.to].t == g.nodes[e.from].t + 1);
}

TEST_CASE("block matching recovers a rigid shift of the density") {
  // A blob moving +3 px per frame in x.
  const DensityVideo v =
      render_from_points({{1, 10.0, 16.0, 1.0}, {2, 13.0, 16.0, 1.0}}, 2.0, 2, 32, 32);
  const Point2 vel = block_match_velocity(v, 1, {10.0, 16.0}, 8, 8, 6);
  CHECK(vel.x == doctest::Approx(3.0));
  CHECK(vel.y == doctest::Approx(0.0));
  // Last frame reuses the backward match, negated.
  const Point2 vel2 = block_match_velocity(v, 2, {13.0, 16.0}, 8, 8, 6);
  CHECK(vel2.x == doctest::Approx(3.0));
  CHECK(vel2.y == doctest::Approx(0.0));
}

TEST_CASE("velocity field attachment reads the field at the candidate pixel") {
  VelocityField f;
  f.frame_count = 1;
  f.width = 8;
  f.height = 8;
  f.vx.assign(64, 0.0);
  f.vy.assign(64, 0.0);
  f.vx[3 * 8 + 4] = 2.5;
  f.vy[3 * 8 + 4] = -1.0;
  std::vector<CandidateNode> nodes = {node(0, 1, 4, 3)};
  attach_velocities(nodes, make_video(1, 8, 8), &f, {});
  CHECK(nodes[0].velocity.x == 2.5);
  CHECK(nodes[0].velocity.y == -1.0);
}

TEST_CASE("patch histograms are L1-normalized") {
  GrayImage img;
  img.width = 8;
  img.height = 8;
  img.pixels.assign(64, 0);
  for (int i = 0; i < 64; ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 4);
  const Histogram h = patch_histogram(img, {0, 0, 7, 7});
  double sum = 0.0;
  for (double v : h) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}
