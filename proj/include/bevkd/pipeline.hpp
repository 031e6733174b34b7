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

// End-to-end expert / apprentice pipelines over a synthetic scene.
//
// Both roles share one simulated depth predictor: the scene's reference depth
// (LiDAR depth where a LiDAR return lands in bin range, ray-cast depth
// elsewhere) degraded by the configured blur and dropout. The apprentice uses
// that prediction as is; the expert additionally fuses in the LiDAR depth map.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bevkd/depth.hpp"
#include "bevkd/loss.hpp"
#include "bevkd/occupancy.hpp"
#include "bevkd/scene_io.hpp"
#include "bevkd/synth_scene.hpp"
#include "bevkd/temporal.hpp"
#include "bevkd/trajectory_distill.hpp"
#include "bevkd/view_transform.hpp"

namespace bevkd {

enum class Role { Expert, Apprentice };

inline std::string_view to_string(Role r) { return r == Role::Expert ? "expert" : "apprentice"; }

struct RunConfig {
  DepthBinSpec bins;
  BEVSpec bev;
  VoxelSpec voxels;
  int feature_channels = 8;
  DepthStrategy depth_strategy = DepthStrategy::Fusion;
  double fusion_weight = 0.5;
  /// Frames fused into the BEV, current included.
  int temporal_window = 4;
  int trajectory_length = kDefaultTrajectoryLength;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  /// Multiplier k in sigma_p = k * |(l, w, h)|.
  double sigma_scale = 1.0 / 6.0;
  DepthNoise noise;
};

inline nlohmann::json to_json_value(const RunConfig& c) {
  return {{"bins", {{"d_min", c.bins.d_min}, {"d_max", c.bins.d_max}, {"n_bins", c.bins.n_bins}}},
          {"bev",
           {{"x_min", c.bev.x_min},
            {"x_max", c.bev.x_max},
            {"y_min", c.bev.y_min},
            {"y_max", c.bev.y_max},
            {"nx", c.bev.nx},
            {"ny", c.bev.ny}}},
          {"voxels",
           {{"x_min", c.voxels.x_min},
            {"x_max", c.voxels.x_max},
            {"y_min", c.voxels.y_min},
            {"y_max", c.voxels.y_max},
            {"z_min", c.voxels.z_min},
            {"z_max", c.voxels.z_max},
            {"nx", c.voxels.nx},
            {"ny", c.voxels.ny},
            {"nz", c.voxels.nz}}},
          {"feature_channels", c.feature_channels},
          {"depth_strategy", std::string(to_string(c.depth_strategy))},
          {"fusion_weight", c.fusion_weight},
          {"temporal_window", c.temporal_window},
          {"trajectory_length", c.trajectory_length},
          {"lambda1", c.lambda1},
          {"lambda2", c.lambda2},
          {"sigma_scale", c.sigma_scale},
          {"noise", {{"blur_width", c.noise.blur_width}, {"dropout", c.noise.dropout}}}};
}

/// Overlays values present in `j` onto `c`.
inline void merge_run_config(const nlohmann::json& j, RunConfig& c) {
  auto take = [](const nlohmann::json& obj, const char* key, auto& field) {
    if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
  };
  if (j.contains("bins")) {
    const auto& b = j.at("bins");
    take(b, "d_min", c.bins.d_min);
    take(b, "d_max", c.bins.d_max);
    take(b, "n_bins", c.bins.n_bins);
  }
  if (j.contains("bev")) {
    const auto& b = j.at("bev");
    take(b, "x_min", c.bev.x_min);
    take(b, "x_max", c.bev.x_max);
    take(b, "y_min", c.bev.y_min);
    take(b, "y_max", c.bev.y_max);
    take(b, "nx", c.bev.nx);
    take(b, "ny", c.bev.ny);
  }
  if (j.contains("voxels")) {
    const auto& v = j.at("voxels");
    take(v, "x_min", c.voxels.x_min);
    take(v, "x_max", c.voxels.x_max);
    take(v, "y_min", c.voxels.y_min);
    take(v, "y_max", c.voxels.y_max);
    take(v, "z_min", c.voxels.z_min);
    take(v, "z_max", c.voxels.z_max);
    take(v, "nx", c.voxels.nx);
    take(v, "ny", c.voxels.ny);
    take(v, "nz", c.voxels.nz);
  }
  take(j, "feature_channels", c.feature_channels);
  if (j.contains("depth_strategy")) c.depth_strategy = parse_depth_strategy(j.at("depth_strategy").get<std::string>());
  take(j, "fusion_weight", c.fusion_weight);
  take(j, "temporal_window", c.temporal_window);
  take(j, "trajectory_length", c.trajectory_length);
  take(j, "lambda1", c.lambda1);
  take(j, "lambda2", c.lambda2);
  take(j, "sigma_scale", c.sigma_scale);
  if (j.contains("noise")) {
    take(j.at("noise"), "blur_width", c.noise.blur_width);
    take(j.at("noise"), "dropout", c.noise.dropout);
  }
}

inline void validate(const RunConfig& c) {
  c.bins.validate();
  c.bev.validate();
  c.voxels.validate();
  if (c.feature_channels < 1) throw Error(ErrorKind::InvalidSpec, "feature_channels must be >= 1");
  if (!(c.fusion_weight >= 0.0 && c.fusion_weight <= 1.0)) throw Error(ErrorKind::InvalidSpec, "fusion weight outside [0, 1]");
  if (c.temporal_window < 1) throw Error(ErrorKind::InvalidSpec, "temporal window must be >= 1");
  if (c.trajectory_length < 0) throw Error(ErrorKind::InvalidSpec, "trajectory length must be >= 0");
  if (!(c.lambda1 >= 0.0) || !(c.lambda2 >= 0.0)) throw Error(ErrorKind::InvalidSpec, "lambdas must be >= 0");
  if (!(c.sigma_scale > 0.0)) throw Error(ErrorKind::InvalidSpec, "sigma_scale must be positive");
  if (c.noise.blur_width < 0 || !(c.noise.dropout >= 0.0 && c.noise.dropout <= 1.0)) {
    throw Error(ErrorKind::InvalidSpec, "invalid depth noise");
  }
}

/// Current sweep plus the previous one carried into the current ego frame.
inline DepthMap lidar_depth_for(const Scene& scene, size_t frame, size_t cam) {
  const EgoTrack track = scene.ego_track();
  std::vector<std::pair<PointCloud, RigidTransform>> clouds;
  clouds.emplace_back(scene.frames[frame].lidar, RigidTransform::identity());
  if (frame > 0) {
    clouds.emplace_back(scene.frames[frame - 1].lidar,
                        ego_motion(track, scene.frames[frame - 1].timestamp, scene.frames[frame].timestamp));
  }
  return render_lidar_depth(scene.rig[cam], clouds);
}

/// LiDAR depth where it falls in bin range, ray-cast depth elsewhere.
inline DepthMap reference_depth_for(const Scene& scene, size_t frame, size_t cam, const DepthMap& lidar,
                                    const DepthBinSpec& bins) {
  DepthMap ref = render_truth_depth(scene, static_cast<int>(frame), static_cast<int>(cam));
  for (size_t i = 0; i < ref.values.size(); ++i) {
    if (lidar.values[i] != DepthMap::kNoDepth && bins.bin_of(lidar.values[i])) ref.values[i] = lidar.values[i];
  }
  return ref;
}

inline uint64_t depth_noise_seed(uint64_t scene_seed, size_t frame, size_t cam) {
  return mix64(scene_seed ^ mix64((static_cast<uint64_t>(frame) << 16) | static_cast<uint64_t>(cam)));
}

struct FrameInputs {
  std::vector<FeatureMap> features;
  std::vector<DepthDistribution> depths;
};

/// Per-camera features and final depth distributions of one frame for a role.
inline FrameInputs frame_inputs(const Scene& scene, size_t frame, Role role, const RunConfig& cfg) {
  FrameInputs in;
  for (size_t cam = 0; cam < scene.rig.size(); ++cam) {
    const DepthMap lidar = lidar_depth_for(scene, frame, cam);
    const DepthMap reference = reference_depth_for(scene, frame, cam, lidar, cfg.bins);
    DepthDistribution predicted = degrade_depth(reference, cfg.noise, cfg.bins, depth_noise_seed(scene.seed, frame, cam));
    in.depths.push_back(role == Role::Expert
                            ? fuse_depth(lidar, predicted, cfg.depth_strategy, cfg.fusion_weight, cfg.bins)
                            : std::move(predicted));
    in.features.push_back(
        render_truth_features(scene, static_cast<int>(frame), static_cast<int>(cam), cfg.feature_channels));
  }
  return in;
}

struct PipelineOutput {
  BEVGrid bev;
  OccupancyGrid occupancy;
};

/// Temporally fused BEV (last `temporal_window` frames warped into the newest)
/// and the newest frame's occupancy.
inline PipelineOutput run_pipeline(const Scene& scene, Role role, const RunConfig& cfg) {
  validate(cfg);
  if (scene.frames.empty()) throw Error(ErrorKind::InvalidSpec, "scene has no frames");
  if (role == Role::Apprentice && cfg.depth_strategy != DepthStrategy::Predicted) {
    throw Error(ErrorKind::InvalidSpec, "the apprentice has no LiDAR; use the predicted depth strategy");
  }
  const EgoTrack track = scene.ego_track();
  const size_t current = scene.frames.size() - 1;
  const double t0 = scene.frames[current].timestamp;
  const size_t window = std::min(static_cast<size_t>(cfg.temporal_window), scene.frames.size());

  PipelineOutput out;
  std::vector<BEVGrid> aligned;
  for (size_t k = current + 1 - window; k <= current; ++k) {
    const FrameInputs in = frame_inputs(scene, k, role, cfg);
    BEVGrid bev = lift_splat_rig(in.features, in.depths, scene.rig, cfg.bev, cfg.bins);
    bev.frame_timestamp = scene.frames[k].timestamp;
    if (k != current) {
      bev = warp_bev(bev, ego_motion(track, scene.frames[k].timestamp, t0));
      bev.frame_timestamp = scene.frames[k].timestamp;
    }
    aligned.push_back(std::move(bev));
    if (k == current) {
      std::vector<DepthView> views;
      for (size_t cam = 0; cam < scene.rig.size(); ++cam) views.push_back({&in.depths[cam], &scene.rig[cam]});
      out.occupancy = build_occupancy(views, cfg.voxels, cfg.bins);
    }
  }
  out.bev = fuse_temporal(aligned);
  out.bev.frame_timestamp = t0;
  return out;
}

/// Trajectories of every object present in the newest frame.
inline std::vector<Trajectory> scene_trajectories(const Scene& scene, int length) {
  const EgoTrack track = scene.ego_track();
  const double t0 = scene.frames.back().timestamp;
  std::vector<Trajectory> out;
  for (const ObjectState& o : scene.frames.back().objects) {
    out.push_back(build_trajectory(scene.object_states(o.object_id), track, t0, length));
  }
  return out;
}

struct DistillResult {
  LossReport report;
  DistillLoss trajectory;
};

inline DistillResult compute_distill(const Scene& scene, const PipelineOutput& expert, const PipelineOutput& apprentice,
                                     const RunConfig& cfg, double l_apprentice = 0.0) {
  const std::vector<Trajectory> trajs = scene_trajectories(scene, cfg.trajectory_length);
  DistillResult r;
  r.trajectory = traj_distill_loss(apprentice.bev, expert.bev, trajs);
  const double k = cfg.sigma_scale;
  const GaussianWeightGrid g =
      gaussian_weights(scene.frames.back().objects, expert.occupancy.spec, [k](const Vec3& s) { return k * s.norm(); });
  const double l_or = occ_recon_loss(expert.occupancy, apprentice.occupancy, g);
  r.report = total_loss(l_apprentice, r.trajectory.value, l_or, cfg.lambda1, cfg.lambda2);
  return r;
}

inline nlohmann::json to_json_value(const MisalignmentReport& m) {
  nlohmann::json errors = nlohmann::json::array();
  nlohmann::json norms = nlohmann::json::array();
  for (const Vec3& e : m.errors) {
    errors.push_back(vec3_json(e));
    norms.push_back(e.norm());
  }
  return {{"object_id", m.object_id},
          {"temporal_length", m.temporal_length},
          {"current_timestamp", m.current_timestamp},
          {"timestamps", m.timestamps},
          {"errors", errors},
          {"error_norms", norms},
          {"fused_error", vec3_json(m.fused_error)},
          {"fused_error_norm", m.fused_norm()}};
}

}  // namespace bevkd
