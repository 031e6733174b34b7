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

// Deterministic synthetic driving scenes.
//
// The world is a ground plane z = 0 with yaw-oriented boxes moving at constant
// velocity. The ego vehicle drives a straight line or a circular arc. LiDAR
// and camera rays are cast exactly against the boxes and the plane.
//
// Random numbers come from std::mt19937_64 (whose output sequence is fixed by
// the C++ standard). Reals are formed from the top 53 bits of each draw:
// (x >> 11) * 2^-53, so scenes regenerate identically on any conforming
// platform. Library distributions are not used because their output is
// implementation-defined.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bevkd/depth.hpp"
#include "bevkd/error.hpp"
#include "bevkd/geometry.hpp"
#include "bevkd/object_state.hpp"
#include "bevkd/view_transform.hpp"

namespace bevkd {

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Box-Muller; one draw per call.
  double normal(double mean, double stddev) {
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive feature codes and sub-seeds.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Explicit object placement, in world coordinates at t = 0.
struct ObjectSpec {
  Vec3 position = Vec3::Zero();  // z is ignored; boxes rest on the ground
  Vec3 size{4.5, 1.9, 1.6};
  double yaw = 0.0;
  Vec3 velocity = Vec3::Zero();
  bool operator==(const ObjectSpec&) const = default;
};

struct DepthNoise {
  /// Half-width of the triangular blur, in bins.
  int blur_width = 2;
  /// Fraction of pixels replaced by a uniform distribution.
  double dropout = 0.0;
  bool operator==(const DepthNoise&) const = default;
};

struct SceneSpec {
  int n_frames = 8;
  double frame_dt = 0.5;

  int n_objects = 3;
  double object_speed_min = 0.0;
  double object_speed_max = 4.0;
  double placement_radius_min = 7.0;
  double placement_radius_max = 20.0;
  /// When non-empty, replaces random placement (n_objects is then ignored).
  std::vector<ObjectSpec> objects;

  double ego_speed = 4.0;
  /// 0 drives straight; otherwise a circular arc.
  double ego_yaw_rate = 0.0;

  int lidar_azimuth_steps = 720;
  int lidar_elevation_steps = 24;
  double lidar_elevation_min_deg = -25.0;
  double lidar_elevation_max_deg = 3.0;
  double lidar_height = 1.8;
  double lidar_max_range = 80.0;
  double lidar_range_noise = 0.0;

  int n_cameras = 2;
  int image_width = 96;
  int image_height = 48;
  double camera_hfov_deg = 90.0;
  double camera_height = 1.5;

  DepthNoise noise;

  void validate() const {
    auto bad = [](const char* what) { throw Error(ErrorKind::InvalidSpec, what); };
    if (n_frames < 1) bad("n_frames must be >= 1");
    if (!(frame_dt > 0.0)) bad("frame_dt must be positive");
    if (objects.empty() && n_objects < 1) bad("n_objects must be >= 1");
    if (!(object_speed_min >= 0.0 && object_speed_min <= object_speed_max)) bad("invalid object speed range");
    if (!(placement_radius_min > 0.0 && placement_radius_min < placement_radius_max)) bad("invalid placement radii");
    if (lidar_azimuth_steps < 1 || lidar_elevation_steps < 1) bad("lidar ray counts must be >= 1");
    if (!(lidar_elevation_min_deg <= lidar_elevation_max_deg)) bad("invalid lidar elevation range");
    if (!(lidar_max_range > 0.0) || !(lidar_height > 0.0) || lidar_range_noise < 0.0) bad("invalid lidar parameters");
    if (n_cameras < 1 || image_width < 1 || image_height < 1) bad("camera rig counts must be >= 1");
    if (!(camera_hfov_deg > 0.0 && camera_hfov_deg < 180.0) || !(camera_height > 0.0)) bad("invalid camera parameters");
    if (noise.blur_width < 0 || !(noise.dropout >= 0.0 && noise.dropout <= 1.0)) bad("invalid depth noise");
    for (const ObjectSpec& o : objects) {
      if (!(o.size.minCoeff() > 0.0)) bad("object sizes must be positive");
    }
  }

  bool operator==(const SceneSpec&) const = default;
};

struct Frame {
  double timestamp = 0.0;
  /// Global-from-ego.
  RigidTransform ego_pose;
  std::vector<ObjectState> objects;
  PointCloud lidar;
  bool operator==(const Frame&) const = default;
};

struct Scene {
  SceneSpec spec;
  uint64_t seed = 0;
  std::vector<CameraModel> rig;
  std::vector<Frame> frames;

  EgoTrack ego_track() const {
    EgoTrack track;
    for (const Frame& f : frames) track.push_back(f.timestamp, f.ego_pose);
    return track;
  }

  /// All states of one object, oldest first.
  std::vector<ObjectState> object_states(int object_id) const {
    std::vector<ObjectState> out;
    for (const Frame& f : frames)
      for (const ObjectState& o : f.objects)
        if (o.object_id == object_id) out.push_back(o);
    return out;
  }

  std::vector<int> object_ids() const {
    std::vector<int> ids;
    for (const Frame& f : frames)
      for (const ObjectState& o : f.objects)
        if (std::find(ids.begin(), ids.end(), o.object_id) == ids.end()) ids.push_back(o.object_id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  bool operator==(const Scene&) const = default;
};

// ---------------------------------------------------------------------------
// Ray casting

/// Surface ids returned by ray casts; objects use their (non-negative) ids.
inline constexpr int kGroundSurface = -1;
inline constexpr int kNoSurface = -2;

struct RayHit {
  double distance = std::numeric_limits<double>::infinity();
  int surface = kNoSurface;
  bool hit() const { return surface != kNoSurface; }
};

/// Entry distance of a ray into a yaw-oriented box, if it enters in front of the origin.
inline std::optional<double> intersect_box(const ObjectState& box, const Point3D& origin, const Vec3& dir) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const Vec3 rel = origin - box.center;
  const Vec3 o(c * rel.x() + s * rel.y(), -s * rel.x() + c * rel.y(), rel.z());
  const Vec3 d(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());
  const Vec3 half = 0.5 * box.size;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < -half[a] || o[a] > half[a]) return std::nullopt;
      continue;
    }
    double t1 = (-half[a] - o[a]) / d[a];
    double t2 = (half[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  if (t_near > t_far || t_near <= 0.0) return std::nullopt;
  return t_near;
}

/// First hit along origin + t * dir (dir need not be unit; distance is in units of t).
inline RayHit cast_ray(std::span<const ObjectState> objects, const Point3D& origin, const Vec3& dir,
                       double max_t = std::numeric_limits<double>::infinity()) {
  RayHit best;
  if (dir.z() < 0.0 && origin.z() > 0.0) {
    const double t = -origin.z() / dir.z();
    if (t <= max_t) best = {t, kGroundSurface};
  }
  for (const ObjectState& o : objects) {
    const auto t = intersect_box(o, origin, dir);
    if (t && *t < best.distance && *t <= max_t) best = {*t, o.object_id};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Generation

namespace detail {

inline RigidTransform ego_pose_at(const SceneSpec& spec, double t) {
  if (spec.ego_yaw_rate == 0.0) return RigidTransform::translation(spec.ego_speed * t, 0.0, 0.0);
  const double w = spec.ego_yaw_rate;
  const double r = spec.ego_speed / w;
  return RigidTransform::from_yaw_translation(w * t, Vec3(r * std::sin(w * t), r * (1.0 - std::cos(w * t)), 0.0));
}

inline double yaw_of(const RigidTransform& t) { return std::atan2(t.matrix()(1, 0), t.matrix()(0, 0)); }

/// Random boxes inside the camera fields of view at the last frame, where
/// distillation is evaluated; positions are then rolled back to t = 0.
inline std::vector<ObjectSpec> place_objects(const SceneSpec& spec, Rng& rng) {
  if (!spec.objects.empty()) return spec.objects;
  const double half_fov = 0.5 * spec.camera_hfov_deg * std::numbers::pi / 180.0;
  const double t_last = (spec.n_frames - 1) * spec.frame_dt;
  const RigidTransform last_pose = ego_pose_at(spec, t_last);
  std::vector<ObjectSpec> out;
  std::vector<Vec3> at_last;
  int attempts = 0;
  while (static_cast<int>(out.size()) < spec.n_objects) {
    if (++attempts > 10000) throw Error(ErrorKind::InvalidSpec, "cannot place objects without overlap");
    const int cam = static_cast<int>(rng.uniform01() * spec.n_cameras);
    const double bearing = 2.0 * std::numbers::pi * cam / spec.n_cameras + rng.uniform(-0.7, 0.7) * half_fov;
    const double radius = rng.uniform(spec.placement_radius_min, spec.placement_radius_max);
    ObjectSpec o;
    const Vec3 world = transform_point(last_pose, Point3D(radius * std::cos(bearing), radius * std::sin(bearing), 0.0));
    o.size = Vec3(rng.uniform(3.6, 4.8), rng.uniform(1.7, 2.0), rng.uniform(1.4, 1.8));
    o.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double speed = rng.uniform(spec.object_speed_min, spec.object_speed_max);
    const double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
    o.velocity = Vec3(speed * std::cos(heading), speed * std::sin(heading), 0.0);
    o.position = Vec3(world.x(), world.y(), 0.0) - o.velocity * t_last;
    bool clear = true;
    for (size_t j = 0; j < out.size(); ++j) {
      const double gap = 0.5 * (out[j].size.head<2>().norm() + o.size.head<2>().norm());
      clear = clear && (at_last[j] - world).head<2>().norm() > gap;
    }
    if (clear) {
      out.push_back(o);
      at_last.push_back(world);
    }
  }
  return out;
}

}  // namespace detail

/// Rays over the configured azimuth x elevation grid from the LiDAR origin
/// (lidar_height above the ego origin). Points are in the frame's ego coordinates.
inline PointCloud cast_lidar(const SceneSpec& spec, const Frame& frame, Rng* noise_rng = nullptr) {
  PointCloud cloud;
  const Point3D origin(0.0, 0.0, spec.lidar_height);
  const double deg = std::numbers::pi / 180.0;
  for (int e = 0; e < spec.lidar_elevation_steps; ++e) {
    const double elev =
        spec.lidar_elevation_steps == 1
            ? spec.lidar_elevation_min_deg * deg
            : (spec.lidar_elevation_min_deg +
               (spec.lidar_elevation_max_deg - spec.lidar_elevation_min_deg) * e / (spec.lidar_elevation_steps - 1)) *
                  deg;
    for (int a = 0; a < spec.lidar_azimuth_steps; ++a) {
      const double az = 2.0 * std::numbers::pi * a / spec.lidar_azimuth_steps;
      const Vec3 dir(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev));
      const RayHit hit = cast_ray(frame.objects, origin, dir, spec.lidar_max_range);
      if (!hit.hit()) continue;
      double range = hit.distance;
      if (noise_rng != nullptr && spec.lidar_range_noise > 0.0) range += noise_rng->normal(0.0, spec.lidar_range_noise);
      cloud.push_back(origin + range * dir);
    }
  }
  return cloud;
}

inline PointCloud cast_lidar(const Scene& scene, int frame_index) {
  return cast_lidar(scene.spec, scene.frames.at(static_cast<size_t>(frame_index)));
}

inline std::vector<CameraModel> make_rig(const SceneSpec& spec) {
  std::vector<CameraModel> rig;
  const double fov = spec.camera_hfov_deg * std::numbers::pi / 180.0;
  for (int i = 0; i < spec.n_cameras; ++i) {
    const double yaw = 2.0 * std::numbers::pi * i / spec.n_cameras;
    rig.push_back(make_yawed_camera(spec.image_width, spec.image_height, fov, yaw, Vec3(0.0, 0.0, spec.camera_height)));
  }
  return rig;
}

inline Scene generate_scene(const SceneSpec& spec, uint64_t seed) {
  spec.validate();
  Scene scene;
  scene.spec = spec;
  scene.seed = seed;
  scene.rig = make_rig(spec);

  Rng rng(seed);
  const std::vector<ObjectSpec> placed = detail::place_objects(spec, rng);
  Rng lidar_rng(mix64(seed ^ 0x4C494441ULL));

  for (int k = 0; k < spec.n_frames; ++k) {
    Frame f;
    f.timestamp = k * spec.frame_dt;
    f.ego_pose = detail::ego_pose_at(spec, f.timestamp);
    const RigidTransform ego_from_global = invert(f.ego_pose);
    const double ego_yaw = detail::yaw_of(f.ego_pose);
    const Eigen::Matrix3d r_inv = ego_from_global.rotation();
    for (size_t j = 0; j < placed.size(); ++j) {
      const ObjectSpec& o = placed[j];
      Vec3 world = o.position + o.velocity * f.timestamp;
      world.z() = 0.5 * o.size.z();
      ObjectState s;
      s.object_id = static_cast<int>(j);
      s.timestamp = f.timestamp;
      s.center = transform_point(ego_from_global, world);
      s.size = o.size;
      s.yaw = o.yaw - ego_yaw;
      s.velocity = r_inv * o.velocity;
      f.objects.push_back(s);
    }
    f.lidar = cast_lidar(spec, f, &lidar_rng);
    scene.frames.push_back(std::move(f));
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Camera rendering

/// Unit C-vector identifying a surface: uniform [-1, 1) values from
/// mix64(key * C + c), normalized. Objects use key = id; ground and
/// background use fixed keys 2^32 + 1 and 2^32 + 2.
inline std::vector<float> surface_code(int surface, int channels) {
  uint64_t key = 0;
  if (surface >= 0) {
    key = static_cast<uint64_t>(surface);
  } else if (surface == kGroundSurface) {
    key = (1ULL << 32) + 1;
  } else {
    key = (1ULL << 32) + 2;
  }
  std::vector<double> raw(static_cast<size_t>(channels));
  double sq = 0.0;
  for (int c = 0; c < channels; ++c) {
    const uint64_t h = mix64(key * static_cast<uint64_t>(channels) + static_cast<uint64_t>(c));
    raw[static_cast<size_t>(c)] = static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
    sq += raw[static_cast<size_t>(c)] * raw[static_cast<size_t>(c)];
  }
  const double norm = std::sqrt(sq);
  std::vector<float> out(static_cast<size_t>(channels));
  for (size_t c = 0; c < out.size(); ++c) out[c] = static_cast<float>(raw[c] / norm);
  return out;
}

/// Casts the ray through pixel (u, v). Distance is reported as camera forward depth.
inline RayHit cast_pixel(const CameraModel& cam, std::span<const ObjectState> objects, int u, int v) {
  const RigidTransform cam_to_ego = invert(cam.extrinsic);
  const Vec3 dir = cam_to_ego.rotation() * Vec3((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
  // dir has unit forward component, so the ray parameter is the forward depth.
  return cast_ray(objects, cam_to_ego.translation(), dir);
}

inline FeatureMap render_truth_features(const CameraModel& cam, std::span<const ObjectState> objects, int channels) {
  if (channels < 1) throw Error(ErrorKind::InvalidSpec, "feature channels must be >= 1");
  FeatureMap out(cam.width, cam.height, channels);
  std::vector<std::pair<int, std::vector<float>>> cache;
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const int surface = cast_pixel(cam, objects, u, v).surface;
      auto it = std::find_if(cache.begin(), cache.end(), [&](const auto& e) { return e.first == surface; });
      if (it == cache.end()) {
        cache.emplace_back(surface, surface_code(surface, channels));
        it = cache.end() - 1;
      }
      std::copy(it->second.begin(), it->second.end(), out.pixel(u, v).begin());
    }
  }
  return out;
}

inline FeatureMap render_truth_features(const Scene& scene, int frame_index, int cam_index, int channels) {
  return render_truth_features(scene.rig.at(static_cast<size_t>(cam_index)),
                               scene.frames.at(static_cast<size_t>(frame_index)).objects, channels);
}

/// Dense ray-cast depth; pixels seeing nothing hold the no-depth sentinel.
inline DepthMap render_truth_depth(const CameraModel& cam, std::span<const ObjectState> objects) {
  DepthMap out(cam.width, cam.height);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const RayHit hit = cast_pixel(cam, objects, u, v);
      if (hit.hit()) out.at(u, v) = hit.distance;
    }
  }
  return out;
}

inline DepthMap render_truth_depth(const Scene& scene, int frame_index, int cam_index) {
  return render_truth_depth(scene.rig.at(static_cast<size_t>(cam_index)),
                            scene.frames.at(static_cast<size_t>(frame_index)).objects);
}

/// Simulated depth prediction: the true bin blurred by a triangular kernel
/// with weights (w + 1 - |j|), |j| <= w, truncated at the ends and renormalized.
/// A `dropout` fraction of pixels becomes uniform. Pixels without a true depth
/// in bin range are invalid (all-zero) unless dropped out.
inline DepthDistribution degrade_depth(const DepthMap& truth, const DepthNoise& noise, const DepthBinSpec& bins,
                                       uint64_t seed) {
  bins.validate();
  if (noise.blur_width < 0 || !(noise.dropout >= 0.0 && noise.dropout <= 1.0)) {
    throw Error(ErrorKind::InvalidSpec, "invalid depth noise");
  }
  DepthDistribution out(truth.width, truth.height, bins.n_bins);
  Rng rng(seed);
  const float uniform = 1.0f / static_cast<float>(bins.n_bins);
  std::vector<double> kernel(static_cast<size_t>(bins.n_bins));
  for (int v = 0; v < truth.height; ++v) {
    for (int u = 0; u < truth.width; ++u) {
      const bool dropped = rng.uniform01() < noise.dropout;
      std::span<float> px = out.pixel(u, v);
      if (dropped) {
        std::fill(px.begin(), px.end(), uniform);
        continue;
      }
      const auto k = truth.has_depth(u, v) ? bins.bin_of(truth.at(u, v)) : std::nullopt;
      if (!k) continue;
      double sum = 0.0;
      std::fill(kernel.begin(), kernel.end(), 0.0);
      for (int j = -noise.blur_width; j <= noise.blur_width; ++j) {
        const int b = *k + j;
        if (b < 0 || b >= bins.n_bins) continue;
        kernel[static_cast<size_t>(b)] = noise.blur_width + 1 - std::abs(j);
        sum += kernel[static_cast<size_t>(b)];
      }
      for (size_t b = 0; b < kernel.size(); ++b) px[b] = static_cast<float>(kernel[b] / sum);
    }
  }
  return out;
}

}  // namespace bevkd
