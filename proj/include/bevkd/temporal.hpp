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

// Ego-motion warping of BEV grids, temporal fusion, and the position error a
// moving object accumulates when history is aligned by ego motion alone.

#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bevkd/bev_sampling.hpp"
#include "bevkd/error.hpp"
#include "bevkd/geometry.hpp"
#include "bevkd/object_state.hpp"
#include "bevkd/view_transform.hpp"

namespace bevkd {

/// Maps ego-frame coordinates at t_i into ego-frame coordinates at t_0:
/// pose(t_0)^-1 * pose(t_i).
inline RigidTransform ego_motion(const EgoTrack& track, double t_i, double t_0) {
  return compose(invert(track.pose_at(t_0)), track.pose_at(t_i));
}

/// Resamples a past grid into the current frame. `motion` maps past-ego
/// coordinates to current-ego coordinates; samples outside the past extent are zero.
inline BEVGrid warp_bev(const BEVGrid& past, const RigidTransform& motion) {
  const RigidTransform current_to_past = invert(motion);
  BEVGrid out(past.spec, past.channels, past.frame_timestamp);
  std::vector<double> sample(static_cast<size_t>(past.channels));
  for (int ix = 0; ix < past.spec.nx; ++ix) {
    for (int iy = 0; iy < past.spec.ny; ++iy) {
      const Point3D src =
          transform_point(current_to_past, Point3D(past.spec.center_x(ix), past.spec.center_y(iy), 0.0));
      if (!sample_bilinear(past, src.x(), src.y(), sample)) continue;
      for (int c = 0; c < past.channels; ++c) out.at(ix, iy, c) = static_cast<float>(sample[static_cast<size_t>(c)]);
    }
  }
  return out;
}

enum class TemporalFusion { Mean, Concat };

/// Fuses a window of already-aligned grids. Mean keeps the channel count;
/// Concat stacks channels in window order.
inline BEVGrid fuse_temporal(std::span<const BEVGrid> grids, TemporalFusion mode = TemporalFusion::Mean) {
  if (grids.empty()) throw Error(ErrorKind::SpecMismatch, "empty temporal window");
  const BEVGrid& first = grids.front();
  double newest = first.frame_timestamp;
  for (const BEVGrid& g : grids) {
    if (!(g.spec == first.spec) || g.channels != first.channels) {
      throw Error(ErrorKind::SpecMismatch, "temporal window grids differ in spec or channels");
    }
    newest = std::max(newest, g.frame_timestamp);
  }

  if (mode == TemporalFusion::Concat) {
    const int total = first.channels * static_cast<int>(grids.size());
    BEVGrid out(first.spec, total, newest);
    for (int ix = 0; ix < first.spec.nx; ++ix)
      for (int iy = 0; iy < first.spec.ny; ++iy)
        for (size_t g = 0; g < grids.size(); ++g)
          for (int c = 0; c < first.channels; ++c)
            out.at(ix, iy, static_cast<int>(g) * first.channels + c) = grids[g].at(ix, iy, c);
    return out;
  }

  BEVGrid out(first.spec, first.channels, newest);
  const double n = static_cast<double>(grids.size());
  for (size_t i = 0; i < out.values.size(); ++i) {
    double sum = 0.0;
    for (const BEVGrid& g : grids) sum += g.values[i];
    out.values[i] = static_cast<float>(sum / n);
  }
  return out;
}

struct MisalignmentReport {
  int object_id = 0;
  int temporal_length = 0;
  double current_timestamp = 0.0;
  /// Source timestamps of the historical frames, most recent first.
  std::vector<double> timestamps;
  /// e_i = true current position - ego-motion-only warp of frame i's position,
  /// in current ego coordinates, i = 1..N (most recent first).
  std::vector<Vec3> errors;
  /// Mean of errors.
  Vec3 fused_error = Vec3::Zero();

  double fused_norm() const { return fused_error.norm(); }
};

/// Error incurred by warping an object's past positions with ego motion only,
/// i.e. treating it as stationary. The fused error is the mean of the per-frame errors.
inline MisalignmentReport misalignment(const EgoTrack& track, std::span<const ObjectState> states, int window,
                                       double t_0) {
  if (window < 1) throw Error(ErrorKind::InvalidSpec, "temporal window must be >= 1");
  const ObjectState* current = find_state(states, t_0);
  if (current == nullptr) throw Error(ErrorKind::MissingObservation, "object not observed at current frame");

  const std::vector<double> history = track.history_before(t_0, static_cast<size_t>(window));
  if (history.size() != static_cast<size_t>(window)) {
    throw Error(ErrorKind::MissingObservation, "ego track holds fewer than " + std::to_string(window) +
                                                   " frames before the current one");
  }

  MisalignmentReport report;
  report.object_id = current->object_id;
  report.temporal_length = window;
  report.current_timestamp = t_0;
  for (double t_i : history) {
    const ObjectState* past = find_state(states, t_i);
    if (past == nullptr) {
      throw Error(ErrorKind::MissingObservation, "object " + std::to_string(current->object_id) +
                                                     " missing at t=" + std::to_string(t_i));
    }
    const Point3D assumed_static = transform_point(ego_motion(track, t_i, t_0), past->center);
    report.timestamps.push_back(t_i);
    report.errors.push_back(current->center - assumed_static);
    report.fused_error += report.errors.back();
  }
  report.fused_error /= static_cast<double>(window);
  return report;
}

/// Uses the newest timestamp of the track as the current frame.
inline MisalignmentReport misalignment(const EgoTrack& track, std::span<const ObjectState> states, int window) {
  if (track.empty()) throw Error(ErrorKind::MissingObservation, "empty ego track");
  return misalignment(track, states, window, track.entries().back().timestamp);
}

}  // namespace bevkd
