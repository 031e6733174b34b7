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

// Lift-splat view transform: image features are lifted along their depth
// distribution into frustum points and scatter-added into a BEV grid.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "bevkd/depth.hpp"
#include "bevkd/error.hpp"
#include "bevkd/geometry.hpp"

namespace bevkd {

/// H x W x C image features.
struct FeatureMap {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> values;

  FeatureMap() = default;
  FeatureMap(int w, int h, int c)
      : width(w), height(h), channels(c), values(static_cast<size_t>(w) * h * c, 0.0f) {}

  size_t offset(int u, int v) const {
    return (static_cast<size_t>(v) * width + u) * static_cast<size_t>(channels);
  }
  std::span<float> pixel(int u, int v) { return {values.data() + offset(u, v), static_cast<size_t>(channels)}; }
  std::span<const float> pixel(int u, int v) const {
    return {values.data() + offset(u, v), static_cast<size_t>(channels)};
  }

  bool operator==(const FeatureMap&) const = default;
};

/// Axis-aligned BEV extent in the ego frame.
struct BEVSpec {
  double x_min = -25.6;
  double x_max = 25.6;
  double y_min = -25.6;
  double y_max = 25.6;
  int nx = 128;
  int ny = 128;

  void validate() const {
    if (!(x_min < x_max) || !(y_min < y_max) || nx < 1 || ny < 1) {
      throw Error(ErrorKind::InvalidSpec, "BEV spec needs x_min < x_max, y_min < y_max and positive cell counts");
    }
  }

  double cell_x() const { return (x_max - x_min) / nx; }
  double cell_y() const { return (y_max - y_min) / ny; }
  double center_x(int ix) const { return x_min + (ix + 0.5) * cell_x(); }
  double center_y(int iy) const { return y_min + (iy + 0.5) * cell_y(); }

  bool contains(double x, double y) const { return x >= x_min && x < x_max && y >= y_min && y < y_max; }

  /// Flat cell index (ix * ny + iy) of the cell containing (x, y).
  std::optional<size_t> cell_of(double x, double y) const {
    if (!contains(x, y)) return std::nullopt;
    const int ix = std::min(static_cast<int>(std::floor((x - x_min) / cell_x())), nx - 1);
    const int iy = std::min(static_cast<int>(std::floor((y - y_min) / cell_y())), ny - 1);
    return static_cast<size_t>(ix) * ny + iy;
  }

  bool operator==(const BEVSpec&) const = default;
};

/// nx x ny x C features; cell (ix, iy) channel c lives at (ix * ny + iy) * C + c.
struct BEVGrid {
  BEVSpec spec;
  int channels = 0;
  std::vector<float> values;
  double frame_timestamp = 0.0;

  BEVGrid() = default;
  BEVGrid(const BEVSpec& s, int c, double t = 0.0)
      : spec(s), channels(c), values(static_cast<size_t>(s.nx) * s.ny * c, 0.0f), frame_timestamp(t) {}

  size_t offset(int ix, int iy) const {
    return (static_cast<size_t>(ix) * spec.ny + iy) * static_cast<size_t>(channels);
  }
  float& at(int ix, int iy, int c) { return values[offset(ix, iy) + static_cast<size_t>(c)]; }
  float at(int ix, int iy, int c) const { return values[offset(ix, iy) + static_cast<size_t>(c)]; }
  std::span<const float> cell(int ix, int iy) const {
    return {values.data() + offset(ix, iy), static_cast<size_t>(channels)};
  }

  bool all_finite() const {
    return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
  }

  bool operator==(const BEVGrid&) const = default;
};

/// Optional height crop applied to frustum points before splatting.
struct LiftOptions {
  double z_min = -std::numeric_limits<double>::infinity();
  double z_max = std::numeric_limits<double>::infinity();
  /// Upper bound on worker threads; 0 picks hardware concurrency.
  unsigned max_threads = 0;
};

namespace detail {

inline void check_lift_inputs(const FeatureMap& feat, const DepthDistribution& depth, const CameraModel& cam,
                              const BEVSpec& spec, const DepthBinSpec& bins) {
  if (feat.width != depth.width || feat.height != depth.height) {
    throw Error(ErrorKind::ShapeMismatch, "feature map and depth distribution sizes differ");
  }
  if (depth.n_bins != bins.n_bins) throw Error(ErrorKind::ShapeMismatch, "depth bins differ from bin spec");
  if (feat.width != cam.width || feat.height != cam.height) {
    throw Error(ErrorKind::ShapeMismatch, "feature map size differs from camera image size");
  }
  if (feat.values.size() != static_cast<size_t>(feat.width) * feat.height * feat.channels) {
    throw Error(ErrorKind::ShapeMismatch, "feature payload size");
  }
  spec.validate();
  bins.validate();
}

// Row chunks are fixed so the reduction order, and hence the result, does not
// depend on how many threads run them.
inline constexpr int kLiftChunks = 8;

inline void lift_rows(const FeatureMap& feat, const DepthDistribution& depth, const CameraModel& cam,
                      const BEVSpec& spec, const DepthBinSpec& bins, const LiftOptions& opts, int row_begin,
                      int row_end, std::vector<double>& acc) {
  const RigidTransform cam_to_ego = invert(cam.extrinsic);
  const Eigen::Matrix3d r = cam_to_ego.rotation();
  const Vec3 origin = cam_to_ego.translation();
  const size_t channels = static_cast<size_t>(feat.channels);
  std::vector<double> centers(static_cast<size_t>(bins.n_bins));
  for (int k = 0; k < bins.n_bins; ++k) centers[static_cast<size_t>(k)] = bins.bin_center(k);

  for (int v = row_begin; v < row_end; ++v) {
    for (int u = 0; u < feat.width; ++u) {
      const std::span<const float> probs = depth.pixel(u, v);
      const std::span<const float> f = feat.pixel(u, v);
      const Vec3 dir = r * Vec3((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      for (size_t k = 0; k < probs.size(); ++k) {
        const double p = probs[k];
        if (p <= 0.0) continue;
        const Vec3 pt = origin + centers[k] * dir;
        if (pt.z() < opts.z_min || pt.z() > opts.z_max) continue;
        const auto cell = spec.cell_of(pt.x(), pt.y());
        if (!cell) continue;
        double* dst = acc.data() + *cell * channels;
        for (size_t c = 0; c < channels; ++c) dst[c] += p * static_cast<double>(f[c]);
      }
    }
  }
}

/// Adds one camera's lifted features into a double-precision accumulator.
inline void accumulate_lift(const FeatureMap& feat, const DepthDistribution& depth, const CameraModel& cam,
                            const BEVSpec& spec, const DepthBinSpec& bins, const LiftOptions& opts,
                            std::vector<double>& acc) {
  check_lift_inputs(feat, depth, cam, spec, bins);
  const int chunks = std::max(1, std::min(kLiftChunks, feat.height));
  std::vector<std::vector<double>> partial(static_cast<size_t>(chunks), std::vector<double>(acc.size(), 0.0));
  auto run_chunk = [&](int i) {
    const int begin = feat.height * i / chunks;
    const int end = feat.height * (i + 1) / chunks;
    lift_rows(feat, depth, cam, spec, bins, opts, begin, end, partial[static_cast<size_t>(i)]);
  };

  unsigned workers = opts.max_threads != 0 ? opts.max_threads : std::thread::hardware_concurrency();
  workers = std::clamp(workers, 1u, static_cast<unsigned>(chunks));
  if (workers == 1) {
    for (int i = 0; i < chunks; ++i) run_chunk(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int i = static_cast<int>(w); i < chunks; i += static_cast<int>(workers)) run_chunk(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& part : partial) {
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += part[i];
  }
}

inline BEVGrid to_grid(const BEVSpec& spec, int channels, const std::vector<double>& acc, double timestamp) {
  BEVGrid out(spec, channels, timestamp);
  for (size_t i = 0; i < acc.size(); ++i) out.values[i] = static_cast<float>(acc[i]);
  return out;
}

}  // namespace detail

/// Lifts one camera into a BEV grid. Plain summation per cell, z collapsed.
inline BEVGrid lift_splat(const FeatureMap& feat, const DepthDistribution& depth, const CameraModel& cam,
                          const BEVSpec& spec, const DepthBinSpec& bins, const LiftOptions& opts = {}) {
  std::vector<double> acc(static_cast<size_t>(spec.nx) * spec.ny * feat.channels, 0.0);
  detail::accumulate_lift(feat, depth, cam, spec, bins, opts, acc);
  return detail::to_grid(spec, feat.channels, acc, 0.0);
}

/// Sum of lift_splat over a camera rig.
inline BEVGrid lift_splat_rig(std::span<const FeatureMap> feats, std::span<const DepthDistribution> depths,
                              std::span<const CameraModel> cams, const BEVSpec& spec, const DepthBinSpec& bins,
                              const LiftOptions& opts = {}) {
  if (feats.size() != depths.size() || feats.size() != cams.size() || feats.empty()) {
    throw Error(ErrorKind::ShapeMismatch, "rig inputs must be non-empty and equally sized");
  }
  const int channels = feats.front().channels;
  std::vector<double> acc(static_cast<size_t>(spec.nx) * spec.ny * channels, 0.0);
  for (size_t i = 0; i < feats.size(); ++i) {
    if (feats[i].channels != channels) throw Error(ErrorKind::ShapeMismatch, "rig channel counts differ");
    detail::accumulate_lift(feats[i], depths[i], cams[i], spec, bins, opts, acc);
  }
  return detail::to_grid(spec, channels, acc, 0.0);
}

/// Reference implementation: naive loop over (pixel, bin) via backproject().
inline BEVGrid lift_splat_oracle(const FeatureMap& feat, const DepthDistribution& depth, const CameraModel& cam,
                                 const BEVSpec& spec, const DepthBinSpec& bins, const LiftOptions& opts = {}) {
  detail::check_lift_inputs(feat, depth, cam, spec, bins);
  std::vector<double> acc(static_cast<size_t>(spec.nx) * spec.ny * feat.channels, 0.0);
  for (int v = 0; v < feat.height; ++v) {
    for (int u = 0; u < feat.width; ++u) {
      for (int k = 0; k < bins.n_bins; ++k) {
        const double p = depth.pixel(u, v)[static_cast<size_t>(k)];
        if (p <= 0.0) continue;
        const Point3D pt = backproject(cam, u, v, bins.bin_center(k));
        if (pt.z() < opts.z_min || pt.z() > opts.z_max) continue;
        const auto cell = spec.cell_of(pt.x(), pt.y());
        if (!cell) continue;
        for (int c = 0; c < feat.channels; ++c) {
          acc[*cell * feat.channels + c] += p * feat.pixel(u, v)[static_cast<size_t>(c)];
        }
      }
    }
  }
  return detail::to_grid(spec, feat.channels, acc, 0.0);
}

}  // namespace bevkd
