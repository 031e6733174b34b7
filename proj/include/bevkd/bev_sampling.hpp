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
#include <array>
#include <cmath>
#include <span>

#include "bevkd/view_transform.hpp"

namespace bevkd {

/// One bilinear tap: cell indices and weight. Taps outside the grid carry weight
/// but no cell, i.e. they read as zero.
struct BilinearTap {
  int ix = 0;
  int iy = 0;
  double weight = 0.0;
  bool inside = false;
};

/// Fractional index positions within this distance of an integer are snapped
/// so that cell-center and integer-shift samples are exact.
inline constexpr double kBilinearSnap = 1e-9;

/// Bilinear taps at metric (x, y), cell values located at cell centers.
/// Returns false when (x, y) is outside the grid extent.
inline bool bilinear_taps(const BEVSpec& spec, double x, double y, std::array<BilinearTap, 4>& taps) {
  if (!(x >= spec.x_min && x <= spec.x_max && y >= spec.y_min && y <= spec.y_max)) return false;
  auto snap = [](double f) {
    const double r = std::nearbyint(f);
    return std::abs(f - r) < kBilinearSnap ? r : f;
  };
  const double fx = snap((x - spec.x_min) / spec.cell_x() - 0.5);
  const double fy = snap((y - spec.y_min) / spec.cell_y() - 0.5);
  const int ix0 = static_cast<int>(std::floor(fx));
  const int iy0 = static_cast<int>(std::floor(fy));
  const double ax = fx - ix0;
  const double ay = fy - iy0;
  const std::array<double, 2> wx{1.0 - ax, ax};
  const std::array<double, 2> wy{1.0 - ay, ay};
  for (int dx = 0; dx < 2; ++dx) {
    for (int dy = 0; dy < 2; ++dy) {
      BilinearTap& t = taps[static_cast<size_t>(dx * 2 + dy)];
      t.ix = ix0 + dx;
      t.iy = iy0 + dy;
      t.weight = wx[static_cast<size_t>(dx)] * wy[static_cast<size_t>(dy)];
      t.inside = t.ix >= 0 && t.ix < spec.nx && t.iy >= 0 && t.iy < spec.ny;
    }
  }
  return true;
}

/// Bilinear sample with zero padding. `out` must hold grid.channels values.
/// Returns false (and zeros) when (x, y) is outside the extent.
inline bool sample_bilinear(const BEVGrid& grid, double x, double y, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  std::array<BilinearTap, 4> taps;
  if (!bilinear_taps(grid.spec, x, y, taps)) return false;
  for (const BilinearTap& t : taps) {
    if (!t.inside || t.weight == 0.0) continue;
    const std::span<const float> cell = grid.cell(t.ix, t.iy);
    for (size_t c = 0; c < out.size(); ++c) out[c] += t.weight * static_cast<double>(cell[c]);
  }
  return true;
}

}  // namespace bevkd
