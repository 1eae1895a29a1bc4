#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tbc/solver.hpp"
#include "test_util.hpp"

using namespace tbc;
using namespace tbc_test;

TEST_CASE("relaxation of a model with no binaries sets z at its bound") {
  CandidateGraph g;
  std::vector<SlidingWindow> wins;
  wins.push_back({1, 0, Rect{0, 0, 2, 2}, 0.8});
  wins.push_back({2, 0, Rect{0, 0, 2, 2}, 1.2});
  const MilpModel m = build_tbc(g, window_set(std::move(wins)));
  const LpResult r = solve_lp_relaxation(m);
  CHECK(r.status == LpStatus::Optimal);
  CHECK(r.objective == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("single node with a unit window and free arcs is selected") {
  CandidateGraph g;
  g.c_si = 0.0;
  g.c_it = 0.0;
  g.nodes.push_back(make_node(0, 1, 5.0, 5.0));
  std::vector<SlidingWindow> wins;
  wins.push_back({1, 0, Rect{4, 4, 6, 6}, 1.0});
  const MilpModel m = build_tbc(g, window_set(std::move(wins)));
  const LpResult r = solve_lp_relaxation(m);
  CHECK(r.objective == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r.x[m.node_var(0)] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("relaxation lower-bounds the integer optimum on random models") {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const RandomInstance inst = random_instance(seed, 14);
    const LpResult lp = solve_lp_relaxation(inst.model);
    const Solution exact = brute_force(inst.model);
    CHECK(lp.objective <= exact.objective + 1e-7);
  }
}

TEST_CASE("branch and bound: integral relaxation short-circuits at the root") {
  const CandidateGraph g = chain_graph(3, -1.0, 0.0, 0.0);
  const MilpModel m = build_tbc(g, unit_windows_per_frame(3));
  const Solution s = branch_and_bound(m);
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(s.nodes_explored == 0);
  CHECK(s.objective == doctest::Approx(-2.0).epsilon(1e-9));
  CHECK(s.gap == 0.0);
}

TEST_CASE("branch and bound equals exhaustive enumeration on 60 random instances") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const RandomInstance inst = random_instance(seed, 14);
    const Solution bb = branch_and_bound(inst.model);
    const Solution ex = brute_force(inst.model);
    INFO("seed ", seed);
    CHECK(std::abs(bb.objective - ex.objective) <= 1e-9);
    CHECK(bb.root_lp <= bb.bound + 1e-9);
    CHECK(bb.bound <= bb.objective + 1e-9);
    CHECK(bb.gap <= 0.001);
  }
}

TEST_CASE("solutions are deterministic bit for bit") {
  const RandomInstance inst = random_instance(77, 14);
  const Solution a = branch_and_bound(inst.model);
  const Solution b = branch_and_bound(inst.model);
  CHECK(a.objective == b.objective);
  CHECK(a.bound == b.bound);
  CHECK(a.nodes_explored == b.nodes_explored);
  CHECK(a.values == b.values);
}

TEST_CASE("rounding heuristic always yields a feasible assignment") {
  for (std::uint64_t seed = 200; seed < 220; ++seed) {
    const RandomInstance inst = random_instance(seed, 20);
    const LpResult lp = solve_lp_relaxation(inst.model);
    const auto v = rounding_heuristic(inst.model, lp.x);
    CHECK_NOTHROW(verify_solution(inst.model, v));
  }
}

TEST_CASE("adding a window never lowers the optimum") {
  for (std::uint64_t seed = 300; seed < 310; ++seed) {
    RandomInstance inst = random_instance(seed, 12);
    const double before = brute_force(inst.model).objective;
    std::vector<SlidingWindow> wins(inst.windows.windows.begin(), inst.windows.windows.end());
    SlidingWindow extra;
    extra.t = 1;
    extra.rect = Rect{0, 0, 11, 11};
    extra.n_hat = 0.9;
    wins.push_back(extra);
    const MilpModel larger = build_tbc(inst.graph, window_set(std::move(wins)));
    const double after = brute_force(larger).objective;
    CHECK(after >= before - 1e-9);
  }
}

TEST_CASE("empty model brute force returns the estimate sum") {
  CandidateGraph g;
  std::vector<SlidingWindow> wins;
  wins.push_back({1, 0, Rect{0, 0, 1, 1}, 1.5});
  const MilpModel m = build_tbc(g, window_set(std::move(wins)));
  const Solution s = brute_force(m);
  CHECK(s.objective == doctest::Approx(1.5));
}

TEST_CASE("brute force refuses more than 24 binaries") {
  CandidateGraph g;
  for (int t = 1; t <= 3; ++t)
    for (int i = 0; i < 3; ++i)
      g.nodes.push_back(make_node(static_cast<int>(g.nodes.size()), t, i * 3.0, 0.0));
  const MilpModel m = build_tbc(g, WindowSet{});
  CHECK(m.num_binaries() == 27);
  CHECK_THROWS_AS(brute_force(m), size_error);
}

TEST_CASE("brute force and branch and bound agree through two code paths") {
  for (std::uint64_t seed = 400; seed < 410; ++seed) {
    const RandomInstance inst = random_instance(seed, 10);
    CHECK(std::abs(branch_and_bound(inst.model).objective -
                   brute_force(inst.model).objective) <= 1e-9);
  }
}

TEST_CASE("node limit returns the incumbent with limit status") {
  const RandomInstance inst = random_instance(42, 14);
  SolveConfig cfg;
  cfg.node_limit = 0;
  cfg.tolerance_gap = 0.0;
  const Solution s = branch_and_bound(inst.model, cfg);
  if (s.nodes_explored == 0 && s.status == SolveStatus::Optimal) {
    CHECK(s.gap == 0.0);  // integral root; limit never reached
  } else {
    CHECK(s.status == SolveStatus::Limit);
    CHECK_NOTHROW(verify_solution(inst.model, s.values));
    CHECK(s.bound <= s.objective + 1e-9);
  }
}

TEST_CASE("lp export of the two-node chain matches the golden file") {
  const CandidateGraph g = chain_graph(2, -1.5, 10.0, 10.0);
  const MilpModel m = build_tbc(g, unit_windows_per_frame(2));
  const std::string path =
      (std::filesystem::temp_directory_path() / "tbc_chain2.lp").string();
  export_lp(m, path);
  std::ifstream got_file(path);
  std::stringstream got;
  got << got_file.rdbuf();
  std::ifstream want_file(std::string(TBC_TEST_DATA_DIR) + "/chain2.lp");
  REQUIRE(want_file.good());
  std::stringstream want;
  want << want_file.rdbuf();
  CHECK(got.str() == want.str());
  std::filesystem::remove(path);
}

TEST_CASE("empty-graph export writes only z terms and parses structurally") {
  CandidateGraph g;
  std::vector<SlidingWindow> wins;
  wins.push_back({1, 0, Rect{0, 0, 2, 2}, 0.4});
  const MilpModel m = build_tbc(g, window_set(std::move(wins)));
  const std::string path =
      (std::filesystem::temp_directory_path() / "tbc_empty.lp").string();
  export_lp(m, path);
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  CHECK(text.find("Minimize") != std::string::npos);
  CHECK(text.find("obj: z_t1_k0") != std::string::npos);
  CHECK(text.find("Subject To") != std::string::npos);
  CHECK(text.find("End") != std::string::npos);
  CHECK(text.find("x_n") == std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("classic cycling instance terminates at the optimum") {
  // Beale's example: cycles under naive most-negative pricing; the
  // degeneracy stall must hand over to Bland's rule and finish.
  LpProblem p;
  p.n = 4;
  p.c = {-0.75, 150.0, -0.02, 6.0};
  p.lb = {0.0, 0.0, 0.0, 0.0};
  const double inf = std::numeric_limits<double>::infinity();
  p.ub = {inf, inf, inf, inf};
  LpProblem::Row r1;
  r1.terms = {{0, 0.25}, {1, -60.0}, {2, -1.0 / 25.0}, {3, 9.0}};
  r1.rhs = 0.0;
  LpProblem::Row r2;
  r2.terms = {{0, 0.5}, {1, -90.0}, {2, -1.0 / 50.0}, {3, 3.0}};
  r2.rhs = 0.0;
  LpProblem::Row r3;
  r3.terms = {{2, 1.0}};
  r3.rhs = 1.0;
  p.rows = {r1, r2, r3};
  const LpResult r = solve_lp(p);
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.objective == doctest::Approx(-0.05).epsilon(1e-9));
}

TEST_CASE("external solver cross-check when one is installed") {
  // Optional: runs only if glpsol is available on the host.
  if (std::system("command -v glpsol > /dev/null 2>&1") != 0) return;
  const RandomInstance inst = random_instance(9, 12);
  const std::string lp_path =
      (std::filesystem::temp_directory_path() / "tbc_cross.lp").string();
  const std::string out_path =
      (std::filesystem::temp_directory_path() / "tbc_cross.out").string();
  export_lp(inst.model, lp_path);
  const std::string cmd = "glpsol --lp " + lp_path + " -o " + out_path + " > /dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  std::ifstream is(out_path);
  std::string line;
  double objective = 0.0;
  bool found = false;
  while (std::getline(is, line)) {
    const auto pos = line.find("Objective:");
    if (pos != std::string::npos) {
      std::istringstream ss(line.substr(pos + 10));
      std::string name, eq;
      ss >> name >> eq >> objective;
      found = true;
      break;
    }
  }
  REQUIRE(found);
  CHECK(objective == doctest::Approx(brute_force(inst.model).objective).epsilon(1e-6));
  std::filesystem::remove(lp_path);
  std::filesystem::remove(out_path);
}
