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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "bevkd/view_transform.hpp"
#include "test_support.hpp"

namespace bevkd {
namespace {

// A front camera at the ego origin looking along +x.
CameraModel front_camera(int w, int h) { return make_yawed_camera(w, h, 1.4, 0.0, {0.0, 0.0, 1.5}); }

/// Per-cell enumeration: for each cell, scan every (pixel, bin) and keep those
/// whose frustum point falls inside the cell's bounds.
BEVGrid per_cell_oracle(const FeatureMap& feat, const DepthDistribution& depth, const CameraModel& cam,
                        const BEVSpec& spec, const DepthBinSpec& bins) {
  BEVGrid out(spec, feat.channels);
  const double wx = (spec.x_max - spec.x_min) / spec.nx;
  const double wy = (spec.y_max - spec.y_min) / spec.ny;
  for (int ix = 0; ix < spec.nx; ++ix) {
    for (int iy = 0; iy < spec.ny; ++iy) {
      std::vector<double> sum(static_cast<size_t>(feat.channels), 0.0);
      for (int v = 0; v < feat.height; ++v) {
        for (int u = 0; u < feat.width; ++u) {
          for (int k = 0; k < bins.n_bins; ++k) {
            const double p = depth.pixel(u, v)[static_cast<size_t>(k)];
            if (p <= 0.0) continue;
            const Point3D q = backproject(cam, u, v, bins.bin_center(k));
            const int cx = static_cast<int>(std::floor((q.x() - spec.x_min) / wx));
            const int cy = static_cast<int>(std::floor((q.y() - spec.y_min) / wy));
            if (q.x() < spec.x_min || q.y() < spec.y_min || cx != ix || cy != iy) continue;
            for (int c = 0; c < feat.channels; ++c) sum[static_cast<size_t>(c)] += p * feat.pixel(u, v)[static_cast<size_t>(c)];
          }
        }
      }
      for (int c = 0; c < feat.channels; ++c) out.at(ix, iy, c) = static_cast<float>(sum[static_cast<size_t>(c)]);
    }
  }
  return out;
}

TEST(LiftSplat, ZeroDistributionGivesZeroGrid) {
  std::mt19937_64 rng(21);
  const CameraModel cam = front_camera(8, 6);
  const DepthBinSpec bins{1.0, 20.0, 19};
  const FeatureMap feat = testing::random_features(rng, 8, 6, 3);
  const DepthDistribution depth(8, 6, bins.n_bins);
  const BEVGrid g = lift_splat(feat, depth, cam, BEVSpec{0, 20, -10, 10, 16, 16}, bins);
  EXPECT_TRUE(std::all_of(g.values.begin(), g.values.end(), [](float v) { return v == 0.0f; }));
}

TEST(LiftSplat, SingleContributionLandsInOneCell) {
  const CameraModel cam = front_camera(5, 5);
  const DepthBinSpec bins{1.0, 21.0, 20};
  FeatureMap feat(5, 5, 1);
  DepthDistribution depth(5, 5, bins.n_bins);
  feat.pixel(2, 2)[0] = 1.0f;
  depth.pixel(2, 2)[9] = 1.0f;  // center 10.5 m
  const BEVSpec spec{0, 20, -10, 10, 20, 20};
  const BEVGrid g = lift_splat(feat, depth, cam, spec, bins);
  const Point3D q = backproject(cam, 2, 2, bins.bin_center(9));
  const size_t cell = *spec.cell_of(q.x(), q.y());
  for (size_t i = 0; i < g.values.size(); ++i) EXPECT_EQ(g.values[i], i == cell ? 1.0f : 0.0f);
  EXPECT_EQ(cell, static_cast<size_t>(10) * 20 + 10);  // (10.5, 0) with 1 m cells
}

TEST(LiftSplat, MatchesPerCellOracleOnSmallInstance) {
  std::mt19937_64 rng(22);
  const CameraModel cam = front_camera(4, 4);
  const DepthBinSpec bins{1.0, 17.0, 16};
  const FeatureMap feat = testing::random_features(rng, 4, 4, 3);
  const DepthDistribution depth = testing::random_distribution(rng, 4, 4, bins.n_bins, 0.0);
  const BEVSpec spec{0.0, 16.0, -8.0, 8.0, 8, 8};
  const BEVGrid fast = lift_splat(feat, depth, cam, spec, bins);
  const BEVGrid oracle = per_cell_oracle(feat, depth, cam, spec, bins);
  EXPECT_LE(testing::max_relative_error(fast, oracle), 1e-5);
  EXPECT_GT(std::count_if(oracle.values.begin(), oracle.values.end(), [](float v) { return v != 0.0f; }), 5);
}

TEST(LiftSplat, MatchesLibraryOracleOnRandomInstances) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> size(1, 24), nb(2, 16), grid(1, 24), ch(1, 4);
  for (int trial = 0; trial < 25; ++trial) {
    const int w = size(rng), h = size(rng);
    const CameraModel cam = testing::random_camera(rng, w, h);
    const DepthBinSpec bins{0.5, 30.0, nb(rng)};
    const FeatureMap feat = testing::random_features(rng, w, h, ch(rng));
    const DepthDistribution depth = testing::random_distribution(rng, w, h, bins.n_bins);
    const BEVSpec spec{-30.0, 30.0, -30.0, 30.0, grid(rng), grid(rng)};
    EXPECT_LE(testing::max_relative_error(lift_splat(feat, depth, cam, spec, bins),
                                          lift_splat_oracle(feat, depth, cam, spec, bins)),
              1e-5);
  }
}

TEST(LiftSplat, OracleIsDeterministic) {
  std::mt19937_64 rng(24);
  const CameraModel cam = testing::random_camera(rng, 16, 12);
  const DepthBinSpec bins{0.5, 30.0, 12};
  const FeatureMap feat = testing::random_features(rng, 16, 12, 2);
  const DepthDistribution depth = testing::random_distribution(rng, 16, 12, bins.n_bins);
  const BEVSpec spec{-30, 30, -30, 30, 20, 20};
  EXPECT_EQ(lift_splat_oracle(feat, depth, cam, spec, bins), lift_splat_oracle(feat, depth, cam, spec, bins));
}

TEST(LiftSplat, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 rng(25);
  const CameraModel cam = front_camera(40, 30);
  const DepthBinSpec bins;
  const FeatureMap feat = testing::random_features(rng, 40, 30, 4);
  const DepthDistribution depth = testing::random_distribution(rng, 40, 30, bins.n_bins);
  const BEVSpec spec{-10, 60, -35, 35, 48, 48};
  LiftOptions one;
  one.max_threads = 1;
  const BEVGrid ref = lift_splat(feat, depth, cam, spec, bins, one);
  for (unsigned t : {2u, 3u, 8u}) {
    LiftOptions opts;
    opts.max_threads = t;
    EXPECT_EQ(lift_splat(feat, depth, cam, spec, bins, opts), ref);
  }
  EXPECT_LE(testing::max_relative_error(ref, lift_splat_oracle(feat, depth, cam, spec, bins)), 1e-5);
}

TEST(LiftSplat, ConservesMassWhenFrustumIsInside) {
  std::mt19937_64 rng(26);
  const CameraModel cam = front_camera(20, 10);
  const DepthBinSpec bins{1.0, 30.0, 29};
  FeatureMap ones(20, 10, 1);
  std::fill(ones.values.begin(), ones.values.end(), 1.0f);
  const DepthDistribution depth = testing::random_distribution(rng, 20, 10, bins.n_bins, 0.3);
  const BEVGrid g = lift_splat(ones, depth, cam, BEVSpec{-1, 31, -40, 40, 32, 40}, bins);
  const double bev_mass = std::accumulate(g.values.begin(), g.values.end(), 0.0);
  const double pixel_mass = std::accumulate(depth.values.begin(), depth.values.end(), 0.0);
  EXPECT_NEAR(bev_mass, pixel_mass, 1e-5 * pixel_mass);
}

TEST(LiftSplat, IsLinearInFeatures) {
  std::mt19937_64 rng(27);
  const CameraModel cam = front_camera(16, 12);
  const DepthBinSpec bins;
  FeatureMap feat = testing::random_features(rng, 16, 12, 3);
  const DepthDistribution depth = testing::random_distribution(rng, 16, 12, bins.n_bins);
  const BEVSpec spec{0, 60, -30, 30, 30, 30};
  const BEVGrid base = lift_splat(feat, depth, cam, spec, bins);
  const float alpha = 2.5f;
  for (float& v : feat.values) v *= alpha;
  const BEVGrid scaled = lift_splat(feat, depth, cam, spec, bins);
  for (size_t i = 0; i < base.values.size(); ++i) {
    EXPECT_NEAR(scaled.values[i], alpha * base.values[i], 1e-6 * std::max(1.0f, std::abs(alpha * base.values[i])));
  }
}

TEST(LiftSplat, HeightCropDropsPoints) {
  const CameraModel cam = front_camera(5, 5);
  const DepthBinSpec bins{1.0, 21.0, 20};
  FeatureMap feat(5, 5, 1);
  DepthDistribution depth(5, 5, bins.n_bins);
  feat.pixel(2, 2)[0] = 1.0f;
  depth.pixel(2, 2)[9] = 1.0f;  // z = 1.5 (camera height)
  LiftOptions crop;
  crop.z_max = 1.0;
  const BEVSpec spec{0, 20, -10, 10, 20, 20};
  const BEVGrid g = lift_splat(feat, depth, cam, spec, bins, crop);
  EXPECT_TRUE(std::all_of(g.values.begin(), g.values.end(), [](float v) { return v == 0.0f; }));
}

TEST(LiftSplat, ShapeMismatchThrows) {
  const CameraModel cam = front_camera(8, 6);
  const DepthBinSpec bins{1.0, 20.0, 19};
  try {
    lift_splat(FeatureMap(8, 6, 2), DepthDistribution(8, 5, bins.n_bins), cam, BEVSpec{}, bins);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
  EXPECT_THROW(lift_splat(FeatureMap(8, 6, 2), DepthDistribution(8, 6, 7), cam, BEVSpec{}, bins), Error);
  EXPECT_THROW(lift_splat_oracle(FeatureMap(8, 6, 2), DepthDistribution(8, 6, 7), cam, BEVSpec{}, bins), Error);
}

TEST(LiftSplat, RigSumsCameras) {
  std::mt19937_64 rng(28);
  const DepthBinSpec bins;
  const std::vector<CameraModel> cams{front_camera(12, 8),
                                      make_yawed_camera(12, 8, 1.4, 3.14159265358979, {0.0, 0.0, 1.5})};
  const std::vector<FeatureMap> feats{testing::random_features(rng, 12, 8, 2), testing::random_features(rng, 12, 8, 2)};
  const std::vector<DepthDistribution> depths{testing::random_distribution(rng, 12, 8, bins.n_bins),
                                              testing::random_distribution(rng, 12, 8, bins.n_bins)};
  const BEVSpec spec{-60, 60, -60, 60, 40, 40};
  const BEVGrid rig = lift_splat_rig(feats, depths, cams, spec, bins);
  const BEVGrid a = lift_splat(feats[0], depths[0], cams[0], spec, bins);
  const BEVGrid b = lift_splat(feats[1], depths[1], cams[1], spec, bins);
  for (size_t i = 0; i < rig.values.size(); ++i) EXPECT_NEAR(rig.values[i], a.values[i] + b.values[i], 1e-5);
}

TEST(BEVSpecTest, CellLookup) {
  const BEVSpec spec{-4, 4, -2, 2, 8, 4};
  EXPECT_EQ(spec.cell_of(-4.0, -2.0), std::optional<size_t>(0));
  EXPECT_EQ(spec.cell_of(3.999, 1.999), std::optional<size_t>(7 * 4 + 3));
  EXPECT_FALSE(spec.cell_of(4.0, 0.0));
  EXPECT_FALSE(spec.cell_of(0.0, -2.1));
  EXPECT_DOUBLE_EQ(spec.center_x(0), -3.5);
  EXPECT_THROW((BEVSpec{1, 1, 0, 1, 1, 1}.validate()), Error);
}

}  // namespace
}  // namespace bevkd
