#pragma once

// End-to-end runs driven by a single JSON config: density -> windows ->
// candidates -> graph -> model -> solve -> tracks (-> boxes -> metrics),
// whole-video or batched, plus the parameter-sweep driver.

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tbc/bbox.hpp"
#include "tbc/common.hpp"
#include "tbc/density.hpp"
#include "tbc/graph.hpp"
#include "tbc/metrics.hpp"
#include "tbc/model.hpp"
#include "tbc/solver.hpp"
#include "tbc/synth.hpp"
#include "tbc/tracks.hpp"
#include "tbc/windows.hpp"

namespace tbc {

using json = nlohmann::json;

// Every key and its default. Values of -1 (or empty strings) mean "derive":
// nms_radius and match_threshold default to half the base window width,
// max_displacement to the base window width, calibration_row to the frame
// middle, metrics thresholds likewise.
inline json default_config() {
  return json{
      {"mode", "tbc"},
      {"paths",
       {{"density", ""},
        {"density_csv", ""},
        {"velocity", ""},
        {"appearance_pattern", ""},
        {"perspective", ""},
        {"detections", ""},
        {"gt", ""},
        {"out_dir", "."}}},
      {"dims", {{"t", 0}, {"w", 0}, {"h", 0}}},
      {"window",
       {{"base_w", 8},
        {"base_h", 8},
        {"stride_x", 3},
        {"stride_y", 6},
        {"prune_threshold", 0.005},
        {"size_multiplier", 1.0},
        {"calibration_row", -1.0}}},
      {"graph",
       {{"alpha", 1.0},
        {"beta", 1.0},
        {"gamma", 1.0},
        {"lambda", 1.0},
        {"c_si", 10.0},
        {"c_it", 10.0},
        {"candidate_threshold", 0.005},
        {"nms_radius", -1.0},
        {"max_displacement", -1.0},
        {"velocity_source", "auto"}}},
      {"solver", {{"tolerance_gap", 0.001}, {"node_limit", 2000000}, {"time_limit_s", 0.0}}},
      {"bbox",
       {{"enable", false},
        {"c", 0.9},
        {"lambda_b", 1.0},
        {"aspect", 0.41},
        {"search_range", 0.2}}},
      {"det", {{"sigma", 2.0}, {"overlap_threshold", 0.65}}},
      {"model", {{"ft_unary_cost", -1.0}}},
      {"batch", {{"len", 3}}},
      {"metrics", {{"match_threshold", -1.0}, {"use_iou", false}, {"iou_threshold", 0.5}}},
  };
}

namespace detail {

inline void merge_strict(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw param_error("config section " + (prefix.empty() ? "<root>" : prefix) + " must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw param_error("unknown config key: " + path);
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), path);
    } else {
      if (slot.is_string() != it.value().is_string() ||
          slot.is_boolean() != it.value().is_boolean() ||
          (slot.is_number() && !it.value().is_number()))
        throw param_error("config key " + path + " has the wrong type");
      slot = it.value();
    }
  }
}

}  // namespace detail

// Merges user JSON over the defaults, rejecting unknown keys.
inline json load_config(const json& user) {
  json cfg = default_config();
  detail::merge_strict(cfg, user, "");
  return cfg;
}

inline json load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open config: " + path);
  json user;
  try {
    is >> user;
  } catch (const json::exception& e) {
    throw param_error("config parse error in " + path + ": " + e.what());
  }
  return load_config(user);
}

// Applies one "dotted.path=value" override; the key must already exist.
inline void apply_set(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw param_error("--set expects key=value, got: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json* slot = &cfg;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw param_error("empty config key in --set");
  for (const auto& p : parts) {
    if (!slot->is_object() || !slot->contains(p)) throw param_error("unknown config key: " + key);
    slot = &(*slot)[p];
  }
  if (slot->is_object()) throw param_error("config key " + key + " is a section, not a value");
  // Fractions like 1/3 are accepted for numeric keys.
  if (slot->is_number()) {
    const auto slash = raw.find('/');
    try {
      if (slash != std::string::npos) {
        const double num = std::stod(raw.substr(0, slash));
        const double den = std::stod(raw.substr(slash + 1));
        if (den == 0.0) throw param_error("zero denominator in " + assignment);
        *slot = num / den;
      } else if (slot->is_number_integer()) {
        *slot = std::stoll(raw);
      } else {
        *slot = std::stod(raw);
      }
    } catch (const std::exception&) {
      throw param_error("cannot parse numeric value for " + key + ": " + raw);
    }
  } else if (slot->is_boolean()) {
    if (raw == "true" || raw == "1")
      *slot = true;
    else if (raw == "false" || raw == "0")
      *slot = false;
    else
      throw param_error("cannot parse boolean value for " + key + ": " + raw);
  } else {
    *slot = raw;
  }
}

// ---------------------------------------------------------------------------

struct PipelineInputs {
  DensityVideo video;
  std::optional<VelocityField> velocity;
  std::vector<GrayImage> appearance;  // per frame; empty = no appearance
  std::optional<PerspectiveMap> perspective;
  std::vector<Detection> detections;  // used by tbc+det
};

struct PipelineResult {
  TrackSet tracks;
  double objective = 0.0;
  double bound = 0.0;
  double gap = 0.0;
  std::string status = "optimal";
  long nodes = 0;
  long lp_iterations = 0;
  double solve_seconds = 0.0;
  std::map<std::string, double> stage_seconds;
  int batches = 1;
  int candidate_count = 0;
  int window_count = 0;
  // Populated in whole-video modes for export and inspection.
  std::optional<MilpModel> model;
  std::optional<Solution> solution;
  std::optional<CandidateGraph> graph;
};

namespace detail {

struct EffectiveParams {
  WindowParams window;
  EdgeCostParams edge;
  double candidate_threshold = 0.005;
  double nms_radius = 4.0;
  double max_displacement = 8.0;
  std::string velocity_source = "auto";
  SolveConfig solve;
  bool bbox_enable = false;
  BBoxParams bbox;
  double det_sigma = 2.0;
  double det_overlap = 0.65;
  double ft_unary = -1.0;
  int batch_len = 3;
  std::string mode = "tbc";
};

inline EffectiveParams effective_params(const json& cfg) {
  EffectiveParams ep;
  const auto& w = cfg.at("window");
  const double mult = w.at("size_multiplier").get<double>();
  if (mult <= 0.0) throw param_error("window.size_multiplier must be positive");
  ep.window.base_w = std::max(1, static_cast<int>(std::lround(w.at("base_w").get<double>() * mult)));
  ep.window.base_h = std::max(1, static_cast<int>(std::lround(w.at("base_h").get<double>() * mult)));
  ep.window.stride_x = w.at("stride_x").get<int>();
  ep.window.stride_y = w.at("stride_y").get<int>();
  ep.window.prune_threshold = w.at("prune_threshold").get<double>();
  const double calib = w.at("calibration_row").get<double>();
  if (calib >= 0.0) ep.window.calibration_row = calib;

  const auto& g = cfg.at("graph");
  ep.edge.alpha = g.at("alpha").get<double>();
  ep.edge.beta = g.at("beta").get<double>();
  ep.edge.gamma = g.at("gamma").get<double>();
  ep.edge.lambda = g.at("lambda").get<double>();
  ep.edge.c_si = g.at("c_si").get<double>();
  ep.edge.c_it = g.at("c_it").get<double>();
  ep.candidate_threshold = g.at("candidate_threshold").get<double>();
  ep.nms_radius = g.at("nms_radius").get<double>();
  if (ep.nms_radius < 0.0) ep.nms_radius = ep.window.base_w / 2.0;
  ep.max_displacement = g.at("max_displacement").get<double>();
  if (ep.max_displacement < 0.0) ep.max_displacement = ep.window.base_w;
  ep.velocity_source = g.at("velocity_source").get<std::string>();

  const auto& s = cfg.at("solver");
  ep.solve.tolerance_gap = s.at("tolerance_gap").get<double>();
  ep.solve.node_limit = s.at("node_limit").get<long>();
  const double tl = s.at("time_limit_s").get<double>();
  ep.solve.time_limit_s = tl > 0.0 ? tl : std::numeric_limits<double>::infinity();

  const auto& b = cfg.at("bbox");
  ep.bbox_enable = b.at("enable").get<bool>();
  ep.bbox.c = b.at("c").get<double>();
  ep.bbox.lambda_b = b.at("lambda_b").get<double>();
  ep.bbox.aspect = b.at("aspect").get<double>();
  ep.bbox.search_range = b.at("search_range").get<double>();

  ep.det_sigma = cfg.at("det").at("sigma").get<double>();
  ep.det_overlap = cfg.at("det").at("overlap_threshold").get<double>();
  ep.ft_unary = cfg.at("model").at("ft_unary_cost").get<double>();
  ep.batch_len = cfg.at("batch").at("len").get<int>();
  ep.mode = cfg.at("mode").get<std::string>();
  if (ep.mode != "tbc" && ep.mode != "tbc3" && ep.mode != "tbc+det")
    throw param_error("mode must be tbc, tbc3 or tbc+det, got: " + ep.mode);
  if (ep.velocity_source != "auto" && ep.velocity_source != "block" &&
      ep.velocity_source != "none")
    throw param_error("graph.velocity_source must be auto, block or none");
  return ep;
}

struct RangeSolve {
  TrackSet tracks;
  Solution solution;
  MilpModel model;
  CandidateGraph graph;
  int windows = 0;
};

// Builds and solves one frame range. Node frames are absolute (whole-video).
inline RangeSolve solve_range(const PipelineInputs& in, const EffectiveParams& ep,
                              const FrameRange& range, bool flow_only = false) {
  DensityVideo sub;
  sub.frames.assign(in.video.frames.begin() + (range.first - 1),
                    in.video.frames.begin() + range.last);

  WindowSet ws = generate_windows(sub, ep.window,
                                  in.perspective ? &*in.perspective : nullptr);
  for (auto& w : ws.windows) w.t += range.first - 1;

  std::vector<CandidateNode> nodes =
      extract_candidates(sub, ep.candidate_threshold, ep.nms_radius);
  for (auto& n : nodes) n.t += range.first - 1;

  if (ep.velocity_source != "none") {
    AttachParams ap;
    ap.patch_w = ep.window.base_w;
    ap.patch_h = ep.window.base_h;
    ap.search_radius = std::max(1, static_cast<int>(std::lround(ep.max_displacement)));
    const VelocityField* field =
        (ep.velocity_source != "block" && in.velocity) ? &*in.velocity : nullptr;
    if (field) {
      attach_velocities(nodes, in.video, field, ap);
    } else {
      // Block matching runs inside the batch; remap to batch-local frames.
      for (auto& n : nodes) n.t -= range.first - 1;
      attach_velocities(nodes, sub, nullptr, ap);
      for (auto& n : nodes) n.t += range.first - 1;
    }
  }
  if (!in.appearance.empty())
    attach_appearance(nodes, in.appearance, ep.window.base_w, ep.window.base_h);

  CandidateGraph graph = build_graph(std::move(nodes), ep.edge, ep.max_displacement);

  MilpModel model;
  if (flow_only) {
    model = build_flow_only(graph, ep.ft_unary);
  } else if (ep.mode == "tbc+det") {
    DetectionAugmentation aug;
    aug.overlap_threshold = ep.det_overlap;
    std::vector<Detection> dets;
    for (const auto& d : in.detections)
      if (d.t >= range.first && d.t <= range.last) dets.push_back(d);
    aug.score = build_score_map(dets, ep.det_sigma, graph.nodes);
    std::vector<Rect> boxes(graph.nodes.size());
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
      if (ep.bbox_enable && in.perspective) {
        boxes[i] = estimate_box(in.video, graph.nodes[i].t, graph.nodes[i].phi,
                                *in.perspective, ep.bbox)
                       .rect;
      } else {
        const int cx = static_cast<int>(std::lround(graph.nodes[i].phi.x));
        const int cy = static_cast<int>(std::lround(graph.nodes[i].phi.y));
        boxes[i] = clip_rect(Rect{cx - ep.window.base_w / 2, cy - ep.window.base_h / 2,
                                  cx - ep.window.base_w / 2 + ep.window.base_w - 1,
                                  cy - ep.window.base_h / 2 + ep.window.base_h - 1},
                             in.video.width(), in.video.height());
      }
    }
    aug.exclusion_pairs = overlap_exclusions(graph.nodes, boxes, ep.det_overlap);
    model = build_tbc_det(graph, ws, aug);
  } else {
    model = build_tbc(graph, ws);
  }

  RangeSolve rs;
  rs.windows = ws.total();
  rs.solution = branch_and_bound(model, ep.solve);
  rs.tracks = decode_tracks(graph, rs.solution);
  rs.tracks.width = in.video.width();
  rs.tracks.height = in.video.height();
  rs.tracks.frame_count = in.video.frame_count();
  rs.model = std::move(model);
  rs.graph = std::move(graph);
  return rs;
}

}  // namespace detail

// Full tracking run per the config. flow_only replaces the count terms with
// the unary detection cost (the flow-tracking baseline).
inline PipelineResult run_pipeline(const PipelineInputs& in, const json& cfg,
                                   bool flow_only = false) {
  using clock = std::chrono::steady_clock;
  auto stamp = [](clock::time_point& t) {
    const auto now = clock::now();
    const double s = std::chrono::duration<double>(now - t).count();
    t = now;
    return s;
  };

  const detail::EffectiveParams ep = detail::effective_params(cfg);
  const int T = in.video.frame_count();
  PipelineResult out;
  clock::time_point tick = clock::now();

  if (ep.mode == "tbc3" && !flow_only) {
    const auto ranges = plan_batches(T, ep.batch_len, BatchMode::Tbc3);
    std::vector<detail::RangeSolve> solves(ranges.size());
    parallel_for(ranges.size(),
                 [&](std::size_t b) { solves[b] = detail::solve_range(in, ep, ranges[b]); });
    out.solve_seconds = stamp(tick);
    out.stage_seconds["solve"] = out.solve_seconds;
    out.batches = static_cast<int>(ranges.size());
    std::vector<TrackSet> batch_tracks;
    double worst_gap = 0.0;
    for (auto& rs : solves) {
      batch_tracks.push_back(std::move(rs.tracks));
      out.objective += rs.solution.objective;
      out.bound += rs.solution.bound;
      worst_gap = std::max(worst_gap, rs.solution.gap);
      out.nodes += rs.solution.nodes_explored;
      out.lp_iterations += rs.solution.lp_iterations;
      out.candidate_count += static_cast<int>(rs.graph.nodes.size());
      out.window_count += rs.windows;
      if (rs.solution.status == SolveStatus::Limit) out.status = "limit";
    }
    out.gap = worst_gap;
    out.tracks = chain_batches(batch_tracks, ranges, ep.window.base_w / 2.0);
    out.stage_seconds["chain"] = stamp(tick);
  } else {
    detail::RangeSolve rs = detail::solve_range(in, ep, {1, T}, flow_only);
    out.solve_seconds = rs.solution.wall_time_s;
    out.stage_seconds["solve"] = stamp(tick);
    out.objective = rs.solution.objective;
    out.bound = rs.solution.bound;
    out.gap = rs.solution.gap;
    out.status = to_string(rs.solution.status);
    out.nodes = rs.solution.nodes_explored;
    out.lp_iterations = rs.solution.lp_iterations;
    out.candidate_count = static_cast<int>(rs.graph.nodes.size());
    out.window_count = rs.windows;
    out.tracks = std::move(rs.tracks);
    out.model = std::move(rs.model);
    out.solution = std::move(rs.solution);
    out.graph = std::move(rs.graph);
  }

  if (ep.bbox_enable) {
    PerspectiveMap persp;
    if (in.perspective) {
      persp = *in.perspective;
    } else {
      // Constant reference of the base window height.
      persp.width = in.video.width();
      persp.height = in.video.height();
      persp.scale.assign(static_cast<std::size_t>(persp.width) * persp.height,
                         static_cast<double>(ep.window.base_h));
    }
    for (auto& traj : out.tracks.trajectories)
      for (auto& pt : traj.points)
        pt.box = estimate_box(in.video, pt.t, {pt.x, pt.y}, persp, ep.bbox).rect;
    out.stage_seconds["bbox"] = stamp(tick);
  }
  return out;
}

inline EvalOptions eval_options_from(const json& cfg) {
  EvalOptions eo;
  const auto& mcfg = cfg.at("metrics");
  eo.match_threshold = mcfg.at("match_threshold").get<double>();
  if (eo.match_threshold < 0.0) {
    const auto& w = cfg.at("window");
    eo.match_threshold =
        w.at("base_w").get<double>() * w.at("size_multiplier").get<double>() / 2.0;
  }
  eo.use_iou = mcfg.at("use_iou").get<bool>();
  eo.iou_threshold = mcfg.at("iou_threshold").get<double>();
  return eo;
}

inline json report_to_json(const EvalReport& r) {
  return json{{"MOTA", r.mota}, {"MOTP", r.motp}, {"IDF1", r.idf1},   {"RCLL", r.rcll},
              {"PRCN", r.prcn}, {"FAF", r.faf},   {"GT", r.gt_tracks}, {"MT", r.mt},
              {"PT", r.pt},     {"ML", r.ml},     {"FP", r.fp},        {"FN", r.fn},
              {"IDS", r.ids},   {"FM", r.fm}};
}

inline std::string solution_to_json(const MilpModel& m, const Solution& s) {
  json j;
  j["objective"] = s.objective;
  j["bound"] = s.bound;
  j["root_lp"] = s.root_lp;
  j["gap"] = s.gap;
  j["status"] = to_string(s.status);
  j["nodes"] = s.nodes_explored;
  j["lp_iterations"] = s.lp_iterations;
  j["wall_time_s"] = s.wall_time_s;
  json vars = json::object();
  for (int v = 0; v < m.num_vars(); ++v) vars[m.var_name[v]] = s.values[v];
  j["variables"] = std::move(vars);
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Scene spec JSON (for the synth command and test fixtures).

inline SceneSpec scene_spec_from_json(const json& j) {
  SceneSpec spec;
  if (!j.contains("dims")) throw param_error("scene spec missing key: dims");
  const auto& d = j.at("dims");
  for (const char* k : {"t", "w", "h"})
    if (!d.contains(k)) throw param_error(std::string("scene spec missing key: dims.") + k);
  spec.t_frames = d.at("t").get<int>();
  spec.width = d.at("w").get<int>();
  spec.height = d.at("h").get<int>();
  spec.n_targets = j.value("n_targets", 2);
  const std::string motion = j.value("motion", "linear");
  if (motion == "linear")
    spec.motion = MotionModel::Linear;
  else if (motion == "bounce")
    spec.motion = MotionModel::Bounce;
  else if (motion == "random-turn")
    spec.motion = MotionModel::RandomTurn;
  else
    throw param_error("unknown motion model: " + motion);
  spec.p_turn = j.value("p_turn", 0.1);
  if (j.contains("speed")) {
    spec.speed_min = j.at("speed").at(0).get<double>();
    spec.speed_max = j.at("speed").at(1).get<double>();
  }
  spec.sigma = j.value("sigma", 2.0);
  if (j.contains("birth")) {
    spec.birth_min = j.at("birth").at(0).get<int>();
    spec.birth_max = j.at("birth").at(1).get<int>();
  }
  if (j.contains("death")) {
    spec.death_min = j.at("death").at(0).get<int>();
    spec.death_max = j.at("death").at(1).get<int>();
  }
  spec.seed = j.value("seed", 1);
  spec.noise_sigma = j.value("noise_sigma", 0.0);
  if (j.contains("palette")) spec.palette = j.at("palette").get<std::vector<int>>();
  if (j.contains("scripted")) {
    for (const auto& traj : j.at("scripted")) {
      std::vector<TrackPoint> pts;
      for (const auto& p : traj)
        pts.push_back({p.at(0).get<int>(), p.at(1).get<double>(), p.at(2).get<double>(),
                       std::nullopt});
      spec.scripted.push_back(std::move(pts));
    }
    spec.n_targets = static_cast<int>(spec.scripted.size());
  }
  return spec;
}

inline std::vector<Detection> read_detections_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open: " + path);
  std::vector<Detection> dets;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Detection d;
    char c1, c2, c3;
    if (!(ss >> d.t >> c1 >> d.x >> c2 >> d.y >> c3 >> d.score) || c1 != ',' || c2 != ',' ||
        c3 != ',')
      throw format_error(path + ": malformed detection at line " + std::to_string(lineno));
    dets.push_back(d);
  }
  return dets;
}

}  // namespace tbc
