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

// Sparse LiDAR depth rendering and per-pixel depth distributions.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bevkd/error.hpp"
#include "bevkd/geometry.hpp"

namespace bevkd {

using PointCloud = std::vector<Point3D>;

/// Dense H x W map of forward depths in meters. 0.0 marks "no measurement".
struct DepthMap {
  static constexpr double kNoDepth = 0.0;

  int width = 0;
  int height = 0;
  std::vector<double> values;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), values(static_cast<size_t>(w) * h, kNoDepth) {}

  double& at(int u, int v) { return values[static_cast<size_t>(v) * width + u]; }
  double at(int u, int v) const { return values[static_cast<size_t>(v) * width + u]; }
  bool has_depth(int u, int v) const { return at(u, v) != kNoDepth; }

  size_t covered_count() const {
    return static_cast<size_t>(std::count_if(values.begin(), values.end(), [](double d) { return d != kNoDepth; }));
  }

  bool operator==(const DepthMap&) const = default;
};

/// Uniform depth discretization over [d_min, d_max).
struct DepthBinSpec {
  double d_min = 1.0;
  double d_max = 60.0;
  int n_bins = 59;

  void validate() const {
    if (!(d_min > 0.0 && d_min < d_max) || n_bins < 2) {
      throw Error(ErrorKind::InvalidSpec, "depth bins need 0 < d_min < d_max and n_bins >= 2");
    }
  }

  double bin_width() const { return (d_max - d_min) / n_bins; }
  double bin_center(int k) const { return d_min + (k + 0.5) * bin_width(); }

  /// Bin containing d, or nullopt when d is outside [d_min, d_max).
  std::optional<int> bin_of(double d) const {
    if (!(d >= d_min && d < d_max)) return std::nullopt;
    const int k = static_cast<int>(std::floor((d - d_min) / bin_width()));
    return std::clamp(k, 0, n_bins - 1);
  }

  bool operator==(const DepthBinSpec&) const = default;
};

/// H x W x n_bins categorical depth; each pixel sums to 1 or is all-zero (invalid).
struct DepthDistribution {
  int width = 0;
  int height = 0;
  int n_bins = 0;
  std::vector<float> values;

  DepthDistribution() = default;
  DepthDistribution(int w, int h, int bins)
      : width(w), height(h), n_bins(bins), values(static_cast<size_t>(w) * h * bins, 0.0f) {}

  size_t offset(int u, int v) const {
    return (static_cast<size_t>(v) * width + u) * static_cast<size_t>(n_bins);
  }
  std::span<float> pixel(int u, int v) { return {values.data() + offset(u, v), static_cast<size_t>(n_bins)}; }
  std::span<const float> pixel(int u, int v) const {
    return {values.data() + offset(u, v), static_cast<size_t>(n_bins)};
  }

  /// Throws ShapeMismatch if any pixel is neither normalized nor all-zero.
  void validate(double tol = 1e-6) const {
    if (values.size() != static_cast<size_t>(width) * height * n_bins) {
      throw Error(ErrorKind::ShapeMismatch, "depth distribution payload size");
    }
    for (int v = 0; v < height; ++v) {
      for (int u = 0; u < width; ++u) {
        double sum = 0.0;
        for (float p : pixel(u, v)) {
          if (!(p >= 0.0f)) throw Error(ErrorKind::ShapeMismatch, "negative depth probability");
          sum += p;
        }
        if (sum != 0.0 && std::abs(sum - 1.0) > tol) {
          throw Error(ErrorKind::ShapeMismatch, "pixel depth distribution does not sum to 1");
        }
      }
    }
  }

  bool operator==(const DepthDistribution&) const = default;
};

/// Z-buffered projection of one or more clouds into a camera.
/// Each cloud is paired with the transform bringing it into the current ego frame.
inline DepthMap render_lidar_depth(const CameraModel& cam,
                                   std::span<const std::pair<PointCloud, RigidTransform>> clouds) {
  DepthMap out(cam.width, cam.height);
  for (const auto& [cloud, to_current] : clouds) {
    const RigidTransform ego_to_cam = compose(cam.extrinsic, to_current);
    for (const Point3D& p : cloud) {
      const Point3D pc = transform_point(ego_to_cam, p);
      if (!(pc.z() > GeometryTolerance::kBehindCamera)) continue;
      const Projection px = project_camera_frame(cam, pc);
      // Nearest pixel center, ties rounding up.
      const double ur = std::floor(px.u + 0.5);
      const double vr = std::floor(px.v + 0.5);
      if (ur < 0.0 || vr < 0.0 || ur >= cam.width || vr >= cam.height) continue;
      double& slot = out.at(static_cast<int>(ur), static_cast<int>(vr));
      if (slot == DepthMap::kNoDepth || px.depth < slot) slot = px.depth;
    }
  }
  return out;
}

inline std::vector<float> depth_to_onehot(double d, const DepthBinSpec& spec) {
  const auto k = spec.bin_of(d);
  if (!k) throw Error(ErrorKind::OutOfRange, "depth " + std::to_string(d) + " outside bin range");
  std::vector<float> out(static_cast<size_t>(spec.n_bins), 0.0f);
  out[static_cast<size_t>(*k)] = 1.0f;
  return out;
}

enum class DepthStrategy { Predicted, Lidar, Fusion, Weighted };

inline std::string_view to_string(DepthStrategy s) {
  switch (s) {
    case DepthStrategy::Predicted: return "predicted";
    case DepthStrategy::Lidar: return "lidar";
    case DepthStrategy::Fusion: return "fusion";
    case DepthStrategy::Weighted: return "weighted";
  }
  return "unknown";
}

inline DepthStrategy parse_depth_strategy(std::string_view s) {
  if (s == "predicted") return DepthStrategy::Predicted;
  if (s == "lidar") return DepthStrategy::Lidar;
  if (s == "fusion") return DepthStrategy::Fusion;
  if (s == "weighted") return DepthStrategy::Weighted;
  throw Error(ErrorKind::InvalidSpec, "unknown depth strategy '" + std::string(s) + "'");
}

/// Combines LiDAR depth with a predicted distribution.
/// LiDAR depths outside the bin range count as uncovered.
inline DepthDistribution fuse_depth(const DepthMap& lidar, const DepthDistribution& predicted,
                                    DepthStrategy strategy, double w, const DepthBinSpec& spec) {
  if (lidar.width != predicted.width || lidar.height != predicted.height || predicted.n_bins != spec.n_bins) {
    throw Error(ErrorKind::ShapeMismatch, "lidar map, predicted distribution and bin spec disagree");
  }
  if (!(w >= 0.0 && w <= 1.0)) throw Error(ErrorKind::OutOfRange, "fusion weight must be in [0, 1]");
  if (strategy == DepthStrategy::Predicted) return predicted;

  DepthDistribution out = predicted;
  for (int v = 0; v < lidar.height; ++v) {
    for (int u = 0; u < lidar.width; ++u) {
      std::span<float> px = out.pixel(u, v);
      const auto k = lidar.has_depth(u, v) ? spec.bin_of(lidar.at(u, v)) : std::nullopt;
      if (!k) {
        if (strategy == DepthStrategy::Lidar) std::fill(px.begin(), px.end(), 0.0f);
        continue;
      }
      const size_t hot = static_cast<size_t>(*k);
      if (strategy == DepthStrategy::Weighted) {
        double sum = 0.0;
        for (size_t b = 0; b < px.size(); ++b) {
          const double onehot = b == hot ? 1.0 : 0.0;
          px[b] = static_cast<float>(w * onehot + (1.0 - w) * static_cast<double>(px[b]));
          sum += px[b];
        }
        // Only an invalid (all-zero) predicted pixel can leave the mix unnormalized.
        if (sum > 0.0 && std::abs(sum - 1.0) > 1e-6) {
          for (float& p : px) p = static_cast<float>(p / sum);
        }
      } else {
        std::fill(px.begin(), px.end(), 0.0f);
        px[hot] = 1.0f;
      }
    }
  }
  return out;
}

}  // namespace bevkd
