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

#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bevkd/error.hpp"
#include "bevkd/geometry.hpp"

namespace bevkd {

/// Ground-truth box state of one object at one timestamp, expressed in the ego
/// frame of that timestamp.
struct ObjectState {
  int object_id = 0;
  double timestamp = 0.0;
  Point3D center = Point3D::Zero();
  /// (length, width, height) in meters.
  Vec3 size = Vec3::Ones();
  /// Heading in the ego frame, radians about +z.
  double yaw = 0.0;
  Vec3 velocity = Vec3::Zero();

  void validate() const {
    if (!(size.x() > 0.0 && size.y() > 0.0 && size.z() > 0.0)) {
      throw Error(ErrorKind::InvalidSpec, "object " + std::to_string(object_id) + " has non-positive size");
    }
  }

  bool operator==(const ObjectState&) const = default;
};

/// Timestamped global-from-ego poses, strictly increasing in time.
class EgoTrack {
 public:
  struct Entry {
    double timestamp = 0.0;
    RigidTransform pose;
    bool operator==(const Entry&) const = default;
  };

  EgoTrack() = default;
  explicit EgoTrack(std::vector<Entry> entries) : entries_(std::move(entries)) {
    for (size_t i = 1; i < entries_.size(); ++i) {
      if (!(entries_[i].timestamp > entries_[i - 1].timestamp)) {
        throw Error(ErrorKind::InvalidSpec, "ego track timestamps must be strictly increasing");
      }
    }
  }

  void push_back(double timestamp, const RigidTransform& pose) {
    if (!entries_.empty() && !(timestamp > entries_.back().timestamp)) {
      throw Error(ErrorKind::InvalidSpec, "ego track timestamps must be strictly increasing");
    }
    entries_.push_back({timestamp, pose});
  }

  std::span<const Entry> entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::optional<size_t> index_of(double timestamp) const {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const Entry& e) { return e.timestamp == timestamp; });
    if (it == entries_.end()) return std::nullopt;
    return static_cast<size_t>(it - entries_.begin());
  }

  const RigidTransform& pose_at(double timestamp) const {
    const auto i = index_of(timestamp);
    if (!i) throw Error(ErrorKind::UnknownTimestamp, "no ego pose at t=" + std::to_string(timestamp));
    return entries_[*i].pose;
  }

  /// The n timestamps immediately preceding t0, most recent first.
  std::vector<double> history_before(double t0, size_t n) const {
    const auto i0 = index_of(t0);
    if (!i0) throw Error(ErrorKind::UnknownTimestamp, "no ego pose at t=" + std::to_string(t0));
    std::vector<double> out;
    for (size_t k = 1; k <= n && k <= *i0; ++k) out.push_back(entries_[*i0 - k].timestamp);
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

/// Finds the state with the given timestamp.
inline const ObjectState* find_state(std::span<const ObjectState> states, double timestamp) {
  auto it = std::find_if(states.begin(), states.end(), [&](const ObjectState& s) { return s.timestamp == timestamp; });
  return it == states.end() ? nullptr : &*it;
}

}  // namespace bevkd
