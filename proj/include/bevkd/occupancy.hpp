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

// Soft voxel occupancy from back-projected depth, per-object 3D Gaussian
// weighting, and the weighted L1 reconstruction loss between two occupancies.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bevkd/depth.hpp"
#include "bevkd/error.hpp"
#include "bevkd/geometry.hpp"
#include "bevkd/object_state.hpp"

namespace bevkd {

struct VoxelSpec {
  double x_min = -25.6, x_max = 25.6;
  double y_min = -25.6, y_max = 25.6;
  double z_min = -1.0, z_max = 3.0;
  int nx = 64, ny = 64, nz = 8;

  void validate() const {
    if (!(x_min < x_max) || !(y_min < y_max) || !(z_min < z_max) || nx < 1 || ny < 1 || nz < 1) {
      throw Error(ErrorKind::InvalidSpec, "voxel spec needs positive extents and counts");
    }
  }

  size_t voxel_count() const { return static_cast<size_t>(nx) * ny * nz; }
  double size_x() const { return (x_max - x_min) / nx; }
  double size_y() const { return (y_max - y_min) / ny; }
  double size_z() const { return (z_max - z_min) / nz; }

  Point3D center(int ix, int iy, int iz) const {
    return {x_min + (ix + 0.5) * size_x(), y_min + (iy + 0.5) * size_y(), z_min + (iz + 0.5) * size_z()};
  }

  /// Flat index (ix * ny + iy) * nz + iz.
  size_t index(int ix, int iy, int iz) const { return (static_cast<size_t>(ix) * ny + iy) * nz + iz; }

  std::optional<size_t> voxel_of(const Point3D& p) const {
    if (!(p.x() >= x_min && p.x() < x_max && p.y() >= y_min && p.y() < y_max && p.z() >= z_min && p.z() < z_max)) {
      return std::nullopt;
    }
    const int ix = std::min(static_cast<int>(std::floor((p.x() - x_min) / size_x())), nx - 1);
    const int iy = std::min(static_cast<int>(std::floor((p.y() - y_min) / size_y())), ny - 1);
    const int iz = std::min(static_cast<int>(std::floor((p.z() - z_min) / size_z())), nz - 1);
    return index(ix, iy, iz);
  }

  bool operator==(const VoxelSpec&) const = default;
};

/// nx x ny x nz soft occupancy in [0, 1].
struct OccupancyGrid {
  VoxelSpec spec;
  std::vector<float> values;

  OccupancyGrid() = default;
  explicit OccupancyGrid(const VoxelSpec& s) : spec(s), values(s.voxel_count(), 0.0f) {}

  bool operator==(const OccupancyGrid&) const = default;
};

struct GaussianWeightGrid {
  VoxelSpec spec;
  std::vector<double> values;
  /// Set when built from an empty object list (all weights zero).
  bool empty_objects = false;
};

struct DepthView {
  const DepthDistribution* depth = nullptr;
  const CameraModel* camera = nullptr;
};

/// Scatter-adds back-projected bin probabilities from every camera into voxels.
/// Returns the raw sums, before clamping.
inline std::vector<double> accumulate_occupancy(std::span<const DepthView> views, const VoxelSpec& spec,
                                                const DepthBinSpec& bins) {
  spec.validate();
  bins.validate();
  std::vector<double> acc(spec.voxel_count(), 0.0);
  for (const DepthView& view : views) {
    const DepthDistribution& d = *view.depth;
    const CameraModel& cam = *view.camera;
    if (d.width != cam.width || d.height != cam.height || d.n_bins != bins.n_bins) {
      throw Error(ErrorKind::ShapeMismatch, "depth distribution does not match camera or bins");
    }
    const RigidTransform cam_to_ego = invert(cam.extrinsic);
    const Eigen::Matrix3d r = cam_to_ego.rotation();
    const Vec3 origin = cam_to_ego.translation();
    for (int v = 0; v < d.height; ++v) {
      for (int u = 0; u < d.width; ++u) {
        const std::span<const float> probs = d.pixel(u, v);
        const Vec3 dir = r * Vec3((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
        for (int k = 0; k < bins.n_bins; ++k) {
          const double p = probs[static_cast<size_t>(k)];
          if (p <= 0.0) continue;
          const auto vox = spec.voxel_of(origin + bins.bin_center(k) * dir);
          if (vox) acc[*vox] += p;
        }
      }
    }
  }
  return acc;
}

/// Occupancy = min(1, accumulated probability mass) per voxel.
inline OccupancyGrid build_occupancy(std::span<const DepthView> views, const VoxelSpec& spec,
                                     const DepthBinSpec& bins) {
  const std::vector<double> acc = accumulate_occupancy(views, spec, bins);
  OccupancyGrid out(spec);
  for (size_t i = 0; i < acc.size(); ++i) out.values[i] = static_cast<float>(std::min(1.0, acc[i]));
  return out;
}

/// sigma_p from an object's (l, w, h).
using SigmaRule = std::function<double(const Vec3& size)>;

/// Diagonal / 6: three standard deviations reach the box corner.
inline double default_sigma(const Vec3& size) { return size.norm() / 6.0; }

inline double gaussian_weight(const Point3D& voxel_center, const Point3D& object_center, double sigma) {
  return std::exp(-(voxel_center - object_center).squaredNorm() / (2.0 * sigma * sigma));
}

/// Per-voxel maximum over objects of exp(-|x - c|^2 / (2 sigma^2)).
inline GaussianWeightGrid gaussian_weights(std::span<const ObjectState> objects, const VoxelSpec& spec,
                                           const SigmaRule& sigma_rule = default_sigma) {
  spec.validate();
  GaussianWeightGrid out{spec, std::vector<double>(spec.voxel_count(), 0.0), objects.empty()};
  std::vector<double> sigmas;
  for (const ObjectState& o : objects) {
    o.validate();
    const double s = sigma_rule(o.size);
    if (!(s > 0.0)) throw Error(ErrorKind::InvalidSpec, "sigma must be positive");
    sigmas.push_back(s);
  }
  for (int ix = 0; ix < spec.nx; ++ix) {
    for (int iy = 0; iy < spec.ny; ++iy) {
      for (int iz = 0; iz < spec.nz; ++iz) {
        const Point3D c = spec.center(ix, iy, iz);
        double best = 0.0;
        for (size_t j = 0; j < objects.size(); ++j) best = std::max(best, gaussian_weight(c, objects[j].center, sigmas[j]));
        out.values[spec.index(ix, iy, iz)] = best;
      }
    }
  }
  return out;
}

/// mean over voxels of |G * O_e - G * O_a|.
inline double occ_recon_loss(const OccupancyGrid& expert, const OccupancyGrid& apprentice,
                             const GaussianWeightGrid& weights) {
  if (!(expert.spec == apprentice.spec) || !(expert.spec == weights.spec)) {
    throw Error(ErrorKind::SpecMismatch, "occupancy grids and weights differ in voxel spec");
  }
  const size_t n = expert.values.size();
  if (apprentice.values.size() != n || weights.values.size() != n) {
    throw Error(ErrorKind::ShapeMismatch, "occupancy payload sizes differ");
  }
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double g = weights.values[i];
    sum += std::abs(g * expert.values[i] - g * apprentice.values[i]);
  }
  return sum / static_cast<double>(n);
}

}  // namespace bevkd
