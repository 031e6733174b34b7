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

// Trajectory-based feature distillation.
//
// Each object's ground-truth positions over the last N frames are carried into
// the current ego frame by ego motion. Expert and apprentice BEV grids are
// sampled bilinearly at those points, each sample is scaled to unit length, and
// the loss is the mean distance between matching unit samples.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "bevkd/bev_sampling.hpp"
#include "bevkd/error.hpp"
#include "bevkd/object_state.hpp"
#include "bevkd/temporal.hpp"
#include "bevkd/view_transform.hpp"

namespace bevkd {

inline constexpr int kDefaultTrajectoryLength = 5;

struct TrajectoryPoint {
  Point3D position = Point3D::Zero();
  double source_timestamp = 0.0;
  bool operator==(const TrajectoryPoint&) const = default;
};

/// Positions of one object in current-frame coordinates, oldest first.
struct Trajectory {
  int object_id = 0;
  std::vector<TrajectoryPoint> points;
};

/// Builds a trajectory of `length` points: the current position plus the
/// length - 1 preceding frames, each mapped through its ego motion.
/// length 0 yields an empty trajectory.
inline Trajectory build_trajectory(std::span<const ObjectState> states, const EgoTrack& track, double t_0,
                                   int length) {
  if (length < 0) throw Error(ErrorKind::InvalidSpec, "trajectory length must be >= 0");
  Trajectory traj;
  if (length == 0) return traj;

  const ObjectState* current = find_state(states, t_0);
  if (current == nullptr) throw Error(ErrorKind::MissingState, "no object state at current frame");
  traj.object_id = current->object_id;

  std::vector<double> history = track.history_before(t_0, static_cast<size_t>(length - 1));
  if (history.size() != static_cast<size_t>(length - 1)) {
    throw Error(ErrorKind::MissingState, "ego track too short for trajectory length " + std::to_string(length));
  }
  std::reverse(history.begin(), history.end());
  for (double t_i : history) {
    const ObjectState* s = find_state(states, t_i);
    if (s == nullptr) {
      throw Error(ErrorKind::MissingState, "object " + std::to_string(traj.object_id) +
                                               " has no state at t=" + std::to_string(t_i));
    }
    traj.points.push_back({transform_point(ego_motion(track, t_i, t_0), s->center), t_i});
  }
  traj.points.push_back({current->center, t_0});
  return traj;
}

struct BevSample {
  std::vector<double> features;
  bool in_extent = false;
};

/// Bilinear sample at (p.x, p.y); p.z is ignored.
inline BevSample sample_bev(const BEVGrid& grid, const Point3D& p) {
  BevSample s;
  s.features.assign(static_cast<size_t>(grid.channels), 0.0);
  s.in_extent = sample_bilinear(grid, p.x(), p.y(), s.features);
  return s;
}

inline constexpr double kDegenerateNorm = 1e-12;

struct NormalizedFeature {
  std::vector<double> unit;
  bool degenerate = false;
};

/// f / |f|; vectors with |f| <= 1e-12 map to zero and are flagged degenerate.
inline NormalizedFeature normalize_feature(std::span<const double> f) {
  NormalizedFeature out;
  out.unit.assign(f.begin(), f.end());
  double sq = 0.0;
  for (double v : f) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!(norm > kDegenerateNorm)) {
    std::fill(out.unit.begin(), out.unit.end(), 0.0);
    out.degenerate = true;
    return out;
  }
  for (double& v : out.unit) v /= norm;
  return out;
}

struct DistillOptions {
  /// Squared Euclidean distance per sample; false uses the plain distance.
  bool squared = true;
};

struct DistillLoss {
  double value = 0.0;
  size_t valid_samples = 0;
  size_t skipped_samples = 0;
  /// Set when no sample was usable; value is then 0.
  bool empty = true;
};

/// Mean distance between unit-normalized apprentice and expert samples over all
/// trajectory points. Points outside the grid extent, or where the expert
/// sample is zero, are skipped and excluded from the denominator.
inline DistillLoss traj_distill_loss(const BEVGrid& apprentice, const BEVGrid& expert,
                                     std::span<const Trajectory> trajectories, const DistillOptions& opts = {}) {
  if (!(apprentice.spec == expert.spec) || apprentice.channels != expert.channels) {
    throw Error(ErrorKind::SpecMismatch, "apprentice and expert grids differ in spec or channels");
  }
  DistillLoss loss;
  double sum = 0.0;
  for (const Trajectory& traj : trajectories) {
    for (const TrajectoryPoint& pt : traj.points) {
      const BevSample e = sample_bev(expert, pt.position);
      const NormalizedFeature en = normalize_feature(e.features);
      if (!e.in_extent || en.degenerate) {
        ++loss.skipped_samples;
        continue;
      }
      const NormalizedFeature an = normalize_feature(sample_bev(apprentice, pt.position).features);
      double d2 = 0.0;
      for (size_t c = 0; c < en.unit.size(); ++c) {
        const double diff = an.unit[c] - en.unit[c];
        d2 += diff * diff;
      }
      sum += opts.squared ? d2 : std::sqrt(d2);
      ++loss.valid_samples;
    }
  }
  loss.empty = loss.valid_samples == 0;
  loss.value = loss.empty ? 0.0 : sum / static_cast<double>(loss.valid_samples);
  return loss;
}

}  // namespace bevkd
