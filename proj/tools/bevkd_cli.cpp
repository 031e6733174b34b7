// Copyright 2026 The bevkd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// bevkd command-line front end.
//
//   bevkd scene-gen  --seed S [--frames N] [--objects K] [--static] --out DIR
//   bevkd pipeline   --scene DIR --role expert|apprentice [--depth-strategy S] --out DIR
//   bevkd distill    --scene DIR --expert-grids DIR --apprentice-grids DIR --out report.json
//   bevkd misalign   --scene DIR --window N --out DIR
//
// Settings resolve as built-in defaults < --config JSON < flags. When --out is
// omitted, outputs go under $BEVKD_OUT_ROOT (default ./bevkd_out).
// Exit codes: 0 success, 2 usage, 3 data, 4 non-finite numbers.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <locale>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bevkd/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path default_out(const std::string& command) {
  const char* root = std::getenv("BEVKD_OUT_ROOT");
  return fs::path(root != nullptr && *root != '\0' ? root : "bevkd_out") / command;
}

fs::path resolve_out(const std::string& flag, const std::string& command) {
  return flag.empty() ? default_out(command) : fs::path(flag);
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw bevkd::Error(bevkd::ErrorKind::IoFailure, "cannot write " + path.string());
  out << text;
  if (!out) throw bevkd::Error(bevkd::ErrorKind::IoFailure, "write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Flags shared by the commands that need a RunConfig.
struct RunFlags {
  std::string config;
  std::optional<std::string> depth_strategy;
  std::optional<double> fusion_weight;
  std::optional<int> window;
  std::optional<int> traj_len;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<int> blur;
  std::optional<double> dropout;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file");
  cmd->add_option("--depth-strategy", f.depth_strategy, "predicted | lidar | fusion | weighted");
  cmd->add_option("--fusion-weight", f.fusion_weight, "w for the weighted strategy");
  cmd->add_option("--frames", f.window, "temporal window (frames fused into the BEV)");
  cmd->add_option("--traj-len", f.traj_len, "trajectory length, current frame included");
  cmd->add_option("--lambda1", f.lambda1, "trajectory distillation weight");
  cmd->add_option("--lambda2", f.lambda2, "occupancy reconstruction weight");
  cmd->add_option("--blur", f.blur, "predicted-depth blur half-width in bins");
  cmd->add_option("--dropout", f.dropout, "predicted-depth dropout fraction");
}

/// defaults < scene noise < config["run"] < flags.
bevkd::RunConfig resolve_run_config(const RunFlags& f, const bevkd::Scene* scene, bevkd::Role role) {
  bevkd::RunConfig cfg;
  if (role == bevkd::Role::Apprentice) cfg.depth_strategy = bevkd::DepthStrategy::Predicted;
  if (scene != nullptr) cfg.noise = scene->spec.noise;
  const json file = load_config(f.config);
  try {
    if (file.contains("run")) bevkd::merge_run_config(file.at("run"), cfg);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config run section: ") + e.what());
  }
  if (f.depth_strategy) cfg.depth_strategy = bevkd::parse_depth_strategy(*f.depth_strategy);
  if (f.fusion_weight) cfg.fusion_weight = *f.fusion_weight;
  if (f.window) cfg.temporal_window = *f.window;
  if (f.traj_len) cfg.trajectory_length = *f.traj_len;
  if (f.lambda1) cfg.lambda1 = *f.lambda1;
  if (f.lambda2) cfg.lambda2 = *f.lambda2;
  if (f.blur) cfg.noise.blur_width = *f.blur;
  if (f.dropout) cfg.noise.dropout = *f.dropout;
  bevkd::validate(cfg);
  return cfg;
}

bevkd::Role parse_role(const std::string& s) {
  if (s == "expert") return bevkd::Role::Expert;
  if (s == "apprentice") return bevkd::Role::Apprentice;
  throw UsageError("unknown role '" + s + "'");
}

bool all_finite(const std::vector<float>& v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

// --- scene-gen ---------------------------------------------------------------

struct SceneGenFlags {
  std::string config;
  std::string out;
  std::optional<uint64_t> seed;
  std::optional<int> frames;
  std::optional<int> objects;
  std::optional<int> cameras;
  std::optional<double> dt;
  std::optional<double> ego_speed;
  std::optional<double> yaw_rate;
  bool still = false;
};

int cmd_scene_gen(const SceneGenFlags& f) {
  const json file = load_config(f.config);
  bevkd::SceneSpec spec;
  uint64_t seed = 0;
  try {
    if (file.contains("scene_spec")) bevkd::merge_scene_spec(file.at("scene_spec"), spec);
    if (file.contains("seed")) seed = file.at("seed").get<uint64_t>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  if (f.seed) seed = *f.seed;
  if (f.frames) spec.n_frames = *f.frames;
  if (f.objects) spec.n_objects = *f.objects;
  if (f.cameras) spec.n_cameras = *f.cameras;
  if (f.dt) spec.frame_dt = *f.dt;
  if (f.ego_speed) spec.ego_speed = *f.ego_speed;
  if (f.yaw_rate) spec.ego_yaw_rate = *f.yaw_rate;
  if (f.still) {
    spec.object_speed_min = 0.0;
    spec.object_speed_max = 0.0;
  }
  const fs::path out = resolve_out(f.out, "scene");
  bevkd::save_scene(bevkd::generate_scene(spec, seed), out);
  std::cout << "wrote scene " << out.string() << "\n";
  return 0;
}

// --- pipeline ----------------------------------------------------------------

int cmd_pipeline(const std::string& scene_dir, const std::string& role_name, const RunFlags& rf,
                 const std::string& out_flag) {
  const bevkd::Role role = parse_role(role_name);
  const bevkd::Scene scene = bevkd::load_scene(scene_dir);
  const bevkd::RunConfig cfg = resolve_run_config(rf, &scene, role);
  const bevkd::PipelineOutput result = bevkd::run_pipeline(scene, role, cfg);
  if (!all_finite(result.bev.values) || !all_finite(result.occupancy.values)) {
    throw NumericError("pipeline produced non-finite values");
  }
  const fs::path out = resolve_out(out_flag, std::string(bevkd::to_string(role)));
  fs::create_directories(out);
  bevkd::save_grid(out / "bev.bin", result.bev);
  bevkd::save_grid(out / "occupancy.bin", result.occupancy);
  write_json(out / "run.json", {{"command", "pipeline"},
                                {"role", std::string(bevkd::to_string(role))},
                                {"scene_seed", scene.seed},
                                {"frames", scene.frames.size()},
                                {"config", bevkd::to_json_value(cfg)}});
  std::cout << "wrote " << (out / "bev.bin").string() << " and " << (out / "occupancy.bin").string() << "\n";
  return 0;
}

// --- distill -----------------------------------------------------------------

bevkd::PipelineOutput load_grids(const fs::path& dir) {
  return {bevkd::load_bev_grid(dir / "bev.bin"), bevkd::load_occupancy_grid(dir / "occupancy.bin")};
}

int cmd_distill(const std::string& scene_dir, const std::string& expert_dir, const std::string& apprentice_dir,
                double l_apprentice, const RunFlags& rf, const std::string& out_flag) {
  const bevkd::Scene scene = bevkd::load_scene(scene_dir);
  bevkd::RunConfig cfg = resolve_run_config(rf, &scene, bevkd::Role::Expert);
  const bevkd::PipelineOutput expert = load_grids(expert_dir);
  const bevkd::PipelineOutput apprentice = load_grids(apprentice_dir);
  if (!all_finite(expert.bev.values) || !all_finite(apprentice.bev.values) || !all_finite(expert.occupancy.values) ||
      !all_finite(apprentice.occupancy.values)) {
    throw NumericError("input grids contain non-finite values");
  }
  // Grid geometry is whatever the grids were produced with.
  cfg.bev = expert.bev.spec;
  cfg.voxels = expert.occupancy.spec;
  const bevkd::DistillResult r = bevkd::compute_distill(scene, expert, apprentice, cfg, l_apprentice);
  json report = r.report;
  report["trajectory_samples"] = {{"valid", r.trajectory.valid_samples},
                                  {"skipped", r.trajectory.skipped_samples},
                                  {"empty", r.trajectory.empty}};
  report["config"] = bevkd::to_json_value(cfg);
  const fs::path out = out_flag.empty() ? default_out("distill") / "report.json" : fs::path(out_flag);
  write_json(out, report);
  std::cout << "l_td " << r.report.l_td << "  l_or " << r.report.l_or << "  l_total " << r.report.l_total << "\n";
  return 0;
}

// --- misalign ----------------------------------------------------------------

std::string fixed(double v) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::fixed << std::setprecision(9) << v;
  return s.str();
}

int cmd_misalign(const std::string& scene_dir, int window, const std::string& out_flag) {
  if (window < 1) throw UsageError("--window must be >= 1");
  const bevkd::Scene scene = bevkd::load_scene(scene_dir);
  const bevkd::EgoTrack track = scene.ego_track();
  json reports = json::array();
  std::string csv = "object_id,N,e_fusion_norm\n";
  for (int id : scene.object_ids()) {
    const std::vector<bevkd::ObjectState> states = scene.object_states(id);
    reports.push_back(bevkd::to_json_value(bevkd::misalignment(track, states, window)));
    for (int n = 1; n <= window; ++n) {
      const double norm = bevkd::misalignment(track, states, n).fused_norm();
      if (!std::isfinite(norm)) throw NumericError("non-finite misalignment");
      csv += std::to_string(id) + "," + std::to_string(n) + "," + fixed(norm) + "\n";
    }
  }
  const fs::path out = resolve_out(out_flag, "misalign");
  write_json(out / "misalignment.json",
             {{"command", "misalign"}, {"scene_seed", scene.seed}, {"window", window}, {"objects", reports}});
  write_text(out / "misalignment.csv", csv);
  std::cout << "wrote " << (out / "misalignment.json").string() << " and " << (out / "misalignment.csv").string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bevkd: expert/apprentice BEV distillation toolkit"};
  app.require_subcommand(1);

  SceneGenFlags sg;
  CLI::App* scene_gen = app.add_subcommand("scene-gen", "generate a synthetic scene");
  scene_gen->add_option("--config", sg.config, "JSON config file (keys: seed, scene_spec)");
  scene_gen->add_option("--seed", sg.seed, "random seed");
  scene_gen->add_option("--frames", sg.frames, "number of frames");
  scene_gen->add_option("--objects", sg.objects, "number of objects");
  scene_gen->add_option("--cameras", sg.cameras, "number of cameras");
  scene_gen->add_option("--dt", sg.dt, "frame spacing in seconds");
  scene_gen->add_option("--ego-speed", sg.ego_speed, "ego speed in m/s");
  scene_gen->add_option("--yaw-rate", sg.yaw_rate, "ego yaw rate in rad/s (0 drives straight)");
  scene_gen->add_flag("--static", sg.still, "all objects stationary");
  scene_gen->add_option("--out", sg.out, "output scene directory");

  std::string scene_dir, role, out, expert_dir, apprentice_dir;
  double l_apprentice = 0.0;
  int window = 4;
  RunFlags pipeline_flags, distill_flags;

  CLI::App* pipeline = app.add_subcommand("pipeline", "run the expert or apprentice pipeline on a scene");
  pipeline->add_option("--scene", scene_dir, "scene directory")->required();
  pipeline->add_option("--role", role, "expert | apprentice")->required();
  add_run_flags(pipeline, pipeline_flags);
  pipeline->add_option("--out", out, "output directory for bev.bin and occupancy.bin");

  CLI::App* distill = app.add_subcommand("distill", "compute distillation losses between grid sets");
  distill->add_option("--scene", scene_dir, "scene directory")->required();
  distill->add_option("--expert-grids", expert_dir, "expert pipeline output directory")->required();
  distill->add_option("--apprentice-grids", apprentice_dir, "apprentice pipeline output directory")->required();
  distill->add_option("--l-apprentice", l_apprentice, "externally supplied apprentice task loss");
  add_run_flags(distill, distill_flags);
  distill->add_option("--out", out, "report path (JSON)");

  CLI::App* misalign = app.add_subcommand("misalign", "misalignment of ego-motion-only alignment per object");
  misalign->add_option("--scene", scene_dir, "scene directory")->required();
  misalign->add_option("--window", window, "temporal window N");
  misalign->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*scene_gen) return cmd_scene_gen(sg);
    if (*pipeline) return cmd_pipeline(scene_dir, role, pipeline_flags, out);
    if (*distill) return cmd_distill(scene_dir, expert_dir, apprentice_dir, l_apprentice, distill_flags, out);
    if (*misalign) return cmd_misalign(scene_dir, window, out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const bevkd::Error& e) {
    std::cerr << e.what() << "\n";
    if (e.kind() == bevkd::ErrorKind::NonFiniteInput) return kExitNumeric;
    if (e.kind() == bevkd::ErrorKind::InvalidSpec) return kExitUsage;
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
