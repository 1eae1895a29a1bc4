// Command-line front end: synthesize scenes, run the tracker, evaluate
// against ground truth, and sweep config parameters into plot-ready CSV.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tbc/pipeline.hpp"

namespace fs = std::filesystem;
using tbc::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitIntegrity = 4;

std::string pattern_path(const std::string& pattern, int frame) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern.c_str(), frame);
  return buf;
}

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw tbc::io_error("cannot open: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw tbc::param_error("JSON parse error in " + path + ": " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw tbc::io_error("cannot open for writing: " + path);
  os << text;
  if (!os) throw tbc::io_error("write failed: " + path);
}

tbc::PipelineInputs load_inputs(const json& cfg) {
  tbc::PipelineInputs in;
  const auto& paths = cfg.at("paths");
  const std::string density = paths.at("density").get<std::string>();
  const std::string density_csv = paths.at("density_csv").get<std::string>();
  if (!density.empty()) {
    in.video = tbc::load_density_video(density);
  } else if (!density_csv.empty()) {
    const auto& d = cfg.at("dims");
    const int t = d.at("t").get<int>(), w = d.at("w").get<int>(), h = d.at("h").get<int>();
    if (t < 1 || w < 1 || h < 1)
      throw tbc::param_error("dims.{t,w,h} must be set for a CSV density input");
    in.video = tbc::load_density_csv(density_csv, t, w, h);
  } else {
    throw tbc::param_error("paths.density or paths.density_csv is required");
  }
  const std::string velocity = paths.at("velocity").get<std::string>();
  if (!velocity.empty()) in.velocity = tbc::load_velocity_field(velocity);
  const std::string pattern = paths.at("appearance_pattern").get<std::string>();
  if (!pattern.empty()) {
    in.appearance.resize(static_cast<std::size_t>(in.video.frame_count()));
    for (int t = 1; t <= in.video.frame_count(); ++t)
      in.appearance[static_cast<std::size_t>(t - 1)] = tbc::load_pgm(pattern_path(pattern, t));
  }
  const std::string persp = paths.at("perspective").get<std::string>();
  if (!persp.empty()) in.perspective = tbc::load_perspective(persp);
  const std::string dets = paths.at("detections").get<std::string>();
  if (!dets.empty()) in.detections = tbc::read_detections_csv(dets);
  return in;
}

json run_and_report(const json& cfg, const std::string& out_dir, bool export_lp) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  tbc::PipelineInputs in = load_inputs(cfg);
  tbc::PipelineResult result = tbc::run_pipeline(in, cfg);

  fs::create_directories(out_dir);
  const std::string tracks_path = (fs::path(out_dir) / "tracks.csv").string();
  const tbc::detail::EffectiveParams ep = tbc::detail::effective_params(cfg);
  tbc::write_mot_csv(result.tracks, tracks_path, ep.window.base_w, ep.window.base_h);

  if (export_lp && result.model) {
    tbc::export_lp(*result.model, (fs::path(out_dir) / "model.lp").string());
    if (result.solution)
      write_text((fs::path(out_dir) / "solution.json").string(),
                 tbc::solution_to_json(*result.model, *result.solution));
  }

  json report;
  report["mode"] = cfg.at("mode");
  report["objective"] = result.objective;
  report["bound"] = result.bound;
  report["gap"] = result.gap;
  report["status"] = result.status;
  report["nodes"] = result.nodes;
  report["lp_iterations"] = result.lp_iterations;
  report["batches"] = result.batches;
  report["candidates"] = result.candidate_count;
  report["windows"] = result.window_count;
  report["solve_seconds"] = result.solve_seconds;
  report["stage_seconds"] = result.stage_seconds;
  report["tracks"] = result.tracks.trajectories.size();

  const std::string gt_path = cfg.at("paths").at("gt").get<std::string>();
  if (!gt_path.empty()) {
    const auto gt_rows = tbc::read_mot_csv(gt_path);
    const auto gt = tbc::frame_objects_from_rows(gt_rows, in.video.frame_count());
    const auto pred = tbc::frame_objects_from_tracks(result.tracks, in.video.frame_count());
    const tbc::EvalReport rep = tbc::evaluate(pred, gt, tbc::eval_options_from(cfg));
    report["metrics"] = tbc::report_to_json(rep);
  }
  report["wall_seconds"] = std::chrono::duration<double>(clock::now() - t0).count();
  write_text((fs::path(out_dir) / "report.json").string(), report.dump(2) + "\n");
  return report;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  const tbc::SceneSpec spec = tbc::scene_spec_from_json(read_json_file(spec_path));
  const tbc::Scene scene = tbc::generate_scene(spec);
  fs::create_directories(out_dir);
  tbc::write_gt_csv(scene.ground_truth, (fs::path(out_dir) / "gt.csv").string());
  tbc::save_density_video(scene.density, (fs::path(out_dir) / "density.tbcd").string());
  tbc::save_velocity_field(scene.velocity, (fs::path(out_dir) / "velocity.tbcv").string());
  for (int t = 1; t <= spec.t_frames; ++t)
    tbc::save_pgm(scene.appearance[static_cast<std::size_t>(t - 1)],
                  pattern_path((fs::path(out_dir) / "appearance_%04d.pgm").string(), t));
  std::cout << "wrote scene to " << out_dir << " (T=" << spec.t_frames
            << ", targets=" << spec.n_targets << ", box=" << scene.target_box << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Count-constrained multi-object tracking on density maps"};
  app.require_subcommand(1);

  std::string config_path, out_dir, mode_override, spec_path;
  std::vector<std::string> sets;
  bool export_lp = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene");
  synth->add_option("spec", spec_path, "Scene spec JSON")->required();
  synth->add_option("--out", out_dir, "Output directory")->required();

  auto* track = app.add_subcommand("track", "Run the tracking pipeline");
  track->add_option("--config", config_path, "Run config JSON")->required();
  track->add_option("--set", sets, "Override config key=value");
  track->add_option("--mode", mode_override, "tbc | tbc3 | tbc+det");
  track->add_option("--out", out_dir, "Output directory (overrides paths.out_dir)");
  track->add_flag("--export-lp", export_lp, "Also write model.lp and solution.json");

  std::string tracks_csv, gt_csv;
  auto* eval = app.add_subcommand("eval", "Evaluate tracks against ground truth");
  eval->add_option("tracks", tracks_csv, "Tracker output CSV")->required();
  eval->add_option("gt", gt_csv, "Ground-truth CSV")->required();
  eval->add_option("--config", config_path, "Run config JSON (for thresholds)");
  eval->add_option("--set", sets, "Override config key=value");
  eval->add_option("--out", out_dir, "Directory for report.json");

  std::string sweep_key, sweep_values, sweep_out;
  auto* sweep = app.add_subcommand("sweep", "Run the pipeline across parameter values");
  sweep->add_option("--config", config_path, "Run config JSON")->required();
  sweep->add_option("--key", sweep_key, "Config key to vary")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")->required();
  sweep->add_option("--set", sets, "Override config key=value");
  sweep->add_option("--out", sweep_out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (synth->parsed()) return cmd_synth(spec_path, out_dir);

    json cfg = config_path.empty() ? tbc::default_config()
                                   : tbc::load_config_file(config_path);
    for (const auto& s : sets) tbc::apply_set(cfg, s);
    if (!mode_override.empty()) tbc::apply_set(cfg, "mode=" + mode_override);

    if (track->parsed()) {
      const std::string dir =
          out_dir.empty() ? cfg.at("paths").at("out_dir").get<std::string>() : out_dir;
      const json report = run_and_report(cfg, dir, export_lp);
      std::cout << report.dump(2) << "\n";
      return 0;
    }

    if (eval->parsed()) {
      const auto pred_rows = tbc::read_mot_csv(tracks_csv);
      const auto gt_rows = tbc::read_mot_csv(gt_csv);
      int t_max = 0;
      for (const auto& r : gt_rows) t_max = std::max(t_max, r.t);
      const auto gt = tbc::frame_objects_from_rows(gt_rows, t_max);
      const auto pred = tbc::frame_objects_from_rows(pred_rows, t_max);
      const tbc::EvalReport rep = tbc::evaluate(pred, gt, tbc::eval_options_from(cfg));
      std::cout << tbc::format_report(rep);
      std::cout << tbc::report_to_json(rep).dump(2) << "\n";
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_text((fs::path(out_dir) / "report.json").string(),
                   tbc::report_to_json(rep).dump(2) + "\n");
      }
      return 0;
    }

    if (sweep->parsed()) {
      if (cfg.at("paths").at("gt").get<std::string>().empty())
        throw tbc::param_error("sweep requires paths.gt for MOTA/IDF1");
      // Validate the key up front so unknown keys fail before any run.
      {
        json probe = cfg;
        tbc::apply_set(probe, sweep_key + "=" + sweep_values.substr(0, sweep_values.find(',')));
      }
      std::vector<std::string> values;
      std::stringstream ss(sweep_values);
      std::string v;
      while (std::getline(ss, v, ',')) values.push_back(v);
      if (values.empty()) throw tbc::param_error("sweep needs at least one value");

      std::ostringstream csv;
      csv << "value,mota,idf1,wall_time_s,solve_time_s\n";
      for (const auto& value : values) {
        json run_cfg = cfg;
        tbc::apply_set(run_cfg, sweep_key + "=" + value);
        using clock = std::chrono::steady_clock;
        const auto t0 = clock::now();
        tbc::PipelineInputs in = load_inputs(run_cfg);
        tbc::PipelineResult result = tbc::run_pipeline(in, run_cfg);
        const auto gt_rows = tbc::read_mot_csv(run_cfg.at("paths").at("gt").get<std::string>());
        const auto gt = tbc::frame_objects_from_rows(gt_rows, in.video.frame_count());
        const auto pred = tbc::frame_objects_from_tracks(result.tracks, in.video.frame_count());
        const tbc::EvalReport rep = tbc::evaluate(pred, gt, tbc::eval_options_from(run_cfg));
        const double wall = std::chrono::duration<double>(clock::now() - t0).count();
        char line[256];
        std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.6f,%.6f\n", value.c_str(), rep.mota,
                      rep.idf1, wall, result.solve_seconds);
        csv << line;
        std::cout << line;
      }
      write_text(sweep_out, csv.str());
      return 0;
    }
  } catch (const tbc::param_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const tbc::format_error& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const tbc::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const tbc::error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitIntegrity;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIntegrity;
  }
  return 0;
}
