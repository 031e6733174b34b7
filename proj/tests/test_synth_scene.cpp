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
#include <numbers>
#include <random>

#include "bevkd/synth_scene.hpp"
#include "bevkd/temporal.hpp"

namespace bevkd {
namespace {

ObjectState box(int id, const Point3D& center, const Vec3& size, double yaw = 0.0) {
  ObjectState o;
  o.object_id = id;
  o.center = center;
  o.size = size;
  o.yaw = yaw;
  return o;
}

SceneSpec small_spec() {
  SceneSpec s;
  s.n_frames = 4;
  s.lidar_azimuth_steps = 90;
  s.lidar_elevation_steps = 6;
  s.image_width = 32;
  s.image_height = 16;
  return s;
}

TEST(GenerateScene, SameSeedIsBitIdentical) {
  const Scene a = generate_scene(small_spec(), 99);
  const Scene b = generate_scene(small_spec(), 99);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == generate_scene(small_spec(), 100));
  for (size_t i = 1; i < a.frames.size(); ++i) EXPECT_GT(a.frames[i].timestamp, a.frames[i - 1].timestamp);
  EXPECT_EQ(a.rig.size(), 2u);
  EXPECT_EQ(a.object_ids(), (std::vector<int>{0, 1, 2}));
}

TEST(GenerateScene, ZeroVelocityObjectsStayPut) {
  SceneSpec spec = small_spec();
  spec.object_speed_max = 0.0;
  spec.ego_yaw_rate = 0.2;
  const Scene s = generate_scene(spec, 5);
  for (int id : s.object_ids()) {
    const auto states = s.object_states(id);
    const Point3D first = transform_point(s.frames[0].ego_pose, states[0].center);
    for (size_t k = 0; k < states.size(); ++k) {
      EXPECT_LE((transform_point(s.frames[k].ego_pose, states[k].center) - first).norm(), 1e-9);
    }
  }
}

TEST(GenerateScene, ConstantVelocityAdvance) {
  SceneSpec spec = small_spec();
  spec.objects = {ObjectSpec{Vec3(10, 3, 0), Vec3(4, 2, 1.5), 0.0, Vec3(2, 0, 0)}};
  spec.frame_dt = 0.5;
  const Scene s = generate_scene(spec, 1);
  for (size_t k = 0; k < s.frames.size(); ++k) {
    const Point3D g = transform_point(s.frames[k].ego_pose, s.frames[k].objects[0].center);
    EXPECT_NEAR(g.x(), 10.0 + 1.0 * k, 1e-9);
    EXPECT_NEAR(g.y(), 3.0, 1e-9);
    EXPECT_NEAR(g.z(), 0.75, 1e-12);
  }
}

TEST(GenerateScene, InvalidSpecThrows) {
  SceneSpec spec = small_spec();
  spec.frame_dt = 0.0;
  try {
    generate_scene(spec, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidSpec);
  }
  spec = small_spec();
  spec.n_cameras = 0;
  EXPECT_THROW(generate_scene(spec, 1), Error);
}

TEST(CastLidar, DownwardRayHitsGroundAnalytically) {
  SceneSpec spec;
  spec.lidar_azimuth_steps = 4;
  spec.lidar_elevation_steps = 1;
  spec.lidar_elevation_min_deg = spec.lidar_elevation_max_deg = -30.0;
  const Frame empty;
  const PointCloud cloud = cast_lidar(spec, empty);
  ASSERT_EQ(cloud.size(), 4u);
  const double reach = spec.lidar_height / std::tan(std::numbers::pi / 6.0);
  EXPECT_NEAR(cloud[0].x(), reach, 1e-9);
  EXPECT_NEAR(cloud[0].y(), 0.0, 1e-9);
  EXPECT_NEAR(cloud[0].z(), 0.0, 1e-12);
  EXPECT_NEAR(cloud[1].y(), reach, 1e-9);
}

TEST(CastLidar, RayThroughBoxFaceAndMiss) {
  SceneSpec spec;
  spec.lidar_azimuth_steps = 1;
  spec.lidar_elevation_steps = 1;
  spec.lidar_elevation_min_deg = spec.lidar_elevation_max_deg = 0.0;
  spec.lidar_height = 0.5;
  Frame f;
  f.objects = {box(0, {10, 0, 0.8}, {2, 2, 1.6})};
  const PointCloud hit = cast_lidar(spec, f);
  ASSERT_EQ(hit.size(), 1u);
  EXPECT_NEAR((hit[0] - Point3D(0, 0, 0.5)).norm(), 9.0, 1e-9);

  spec.lidar_elevation_min_deg = spec.lidar_elevation_max_deg = 3.0;
  spec.lidar_height = 2.0;  // above the box
  EXPECT_TRUE(cast_lidar(spec, f).empty());
}

TEST(CastLidar, RangeLimitDropsFarHits) {
  SceneSpec spec;
  spec.lidar_azimuth_steps = 8;
  spec.lidar_elevation_steps = 1;
  spec.lidar_elevation_min_deg = spec.lidar_elevation_max_deg = -1.0;
  spec.lidar_max_range = 50.0;  // ground hit at ~103 m
  EXPECT_TRUE(cast_lidar(spec, Frame{}).empty());
}

TEST(IntersectBox, HitPointLiesOnSurfaceOfYawedBox) {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const ObjectState b = box(4, {6, -2, 0.9}, {4.2, 1.8, 1.8}, 0.7);
  auto local = [&](const Point3D& p) {
    const Vec3 r = p - b.center;
    return Vec3(std::cos(b.yaw) * r.x() + std::sin(b.yaw) * r.y(), -std::sin(b.yaw) * r.x() + std::cos(b.yaw) * r.y(), r.z());
  };
  auto inside = [&](const Point3D& p, double slack) {
    const Vec3 l = local(p);
    return std::abs(l.x()) <= 0.5 * b.size.x() + slack && std::abs(l.y()) <= 0.5 * b.size.y() + slack &&
           std::abs(l.z()) <= 0.5 * b.size.z() + slack;
  };
  int hits = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const Point3D origin(u(rng) * 2, u(rng) * 2, 1.0 + u(rng) * 0.5);
    const Point3D target = b.center + Vec3(u(rng) * 3, u(rng) * 2, u(rng) * 1.2);
    const Vec3 dir = (target - origin).normalized();
    const auto t = intersect_box(b, origin, dir);
    // Dense marching as an independent oracle for whether and where the ray enters.
    double first = -1.0;
    for (double s = 0.0; s < 20.0; s += 1e-3) {
      if (inside(origin + s * dir, 0.0)) {
        first = s;
        break;
      }
    }
    if (first < 0.0) {
      if (t) {
        EXPECT_TRUE(inside(origin + *t * dir, 1e-9));  // grazing hit between march steps
      }
      continue;
    }
    ASSERT_TRUE(t.has_value());
    EXPECT_NEAR(*t, first, 1e-3);
    EXPECT_TRUE(inside(origin + *t * dir, 1e-9));
    ++hits;
  }
  EXPECT_GT(hits, 500);
}

TEST(RenderTruthFeatures, BackgroundConstantAndOcclusion) {
  const CameraModel cam = make_yawed_camera(16, 8, std::numbers::pi / 2, 0.0, {0, 0, 1.5});
  // No objects: top row sees sky, bottom row sees ground.
  const FeatureMap open = render_truth_features(cam, std::span<const ObjectState>{}, 4);
  const std::vector<float> sky = surface_code(kNoSurface, 4), ground = surface_code(kGroundSurface, 4);
  for (int c = 0; c < 4; ++c) {
    EXPECT_EQ(open.pixel(3, 0)[static_cast<size_t>(c)], sky[static_cast<size_t>(c)]);
    EXPECT_EQ(open.pixel(3, 7)[static_cast<size_t>(c)], ground[static_cast<size_t>(c)]);
  }

  const std::vector<ObjectState> wall{box(9, {3, 0, 0}, {1, 100, 100})};
  const FeatureMap filled = render_truth_features(cam, wall, 4);
  for (size_t i = 0; i < filled.values.size(); ++i) EXPECT_EQ(filled.values[i], filled.values[i % 4]);
  EXPECT_EQ(std::vector<float>(filled.values.begin(), filled.values.begin() + 4), surface_code(9, 4));

  const std::vector<ObjectState> stacked{box(2, {20, 0, 1.5}, {2, 4, 3}), box(1, {8, 0, 1.5}, {1, 1, 3})};
  const RayHit centre = cast_pixel(cam, stacked, 7, 4);
  EXPECT_EQ(centre.surface, 1);
  const FeatureMap occluded = render_truth_features(cam, stacked, 4);
  const std::vector<float> near = surface_code(1, 4);
  for (int c = 0; c < 4; ++c) EXPECT_EQ(occluded.pixel(7, 4)[static_cast<size_t>(c)], near[static_cast<size_t>(c)]);
}

TEST(SurfaceCode, UnitNormAndDistinct) {
  for (int s : {kNoSurface, kGroundSurface, 0, 1, 2, 77}) {
    const std::vector<float> v = surface_code(s, 8);
    double n = 0.0;
    for (float x : v) n += double(x) * x;
    EXPECT_NEAR(n, 1.0, 1e-6);
  }
  EXPECT_NE(surface_code(0, 8), surface_code(1, 8));
  EXPECT_NE(surface_code(kGroundSurface, 8), surface_code(kNoSurface, 8));
}

TEST(RenderTruthDepth, ForwardDepthOfWall) {
  const CameraModel cam = make_yawed_camera(16, 8, std::numbers::pi / 2, 0.0, {0, 0, 1.5});
  const std::vector<ObjectState> wall{box(0, {12.5, 0, 0}, {1, 100, 100})};
  const DepthMap d = render_truth_depth(cam, wall);
  int on_wall = 0;
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 16; ++u) {
      if (cast_pixel(cam, wall, u, v).surface != 0) continue;
      EXPECT_NEAR(d.at(u, v), 12.0, 1e-9);
      ++on_wall;
    }
  EXPECT_GE(on_wall, 64);
  EXPECT_EQ(render_truth_depth(cam, std::span<const ObjectState>{}).has_depth(0, 0), false);
}

class DegradeDepth : public ::testing::Test {
 protected:
  DepthMap truth{4, 3};
  DepthBinSpec bins{1.0, 11.0, 10};
  void SetUp() override {
    for (int v = 0; v < 3; ++v)
      for (int u = 0; u < 4; ++u) truth.at(u, v) = 1.5 + u + 2 * v;
    truth.at(3, 2) = DepthMap::kNoDepth;
  }
};

TEST_F(DegradeDepth, ZeroBlurIsOneHot) {
  const DepthDistribution d = degrade_depth(truth, DepthNoise{0, 0.0}, bins, 3);
  for (int v = 0; v < 3; ++v)
    for (int u = 0; u < 4; ++u) {
      if (!truth.has_depth(u, v)) {
        for (float p : d.pixel(u, v)) EXPECT_EQ(p, 0.0f);
        continue;
      }
      const std::vector<float> expected = depth_to_onehot(truth.at(u, v), bins);
      EXPECT_TRUE(std::equal(expected.begin(), expected.end(), d.pixel(u, v).begin()));
    }
}

TEST_F(DegradeDepth, FullDropoutIsUniform) {
  const DepthDistribution d = degrade_depth(truth, DepthNoise{2, 1.0}, bins, 3);
  for (float p : d.values) EXPECT_EQ(p, 0.1f);
}

TEST_F(DegradeDepth, TriangularBlur) {
  const DepthDistribution d = degrade_depth(truth, DepthNoise{1, 0.0}, bins, 3);
  const auto px = d.pixel(2, 1);  // depth 5.5, bin 4
  const std::vector<float> expected{0, 0, 0, 0.25f, 0.5f, 0.25f, 0, 0, 0, 0};
  EXPECT_TRUE(std::equal(expected.begin(), expected.end(), px.begin()));

  const auto edge = d.pixel(0, 0);  // bin 0: truncated kernel (2, 1) renormalized
  EXPECT_FLOAT_EQ(edge[0], 2.0f / 3.0f);
  EXPECT_FLOAT_EQ(edge[1], 1.0f / 3.0f);
  d.validate();
}

TEST_F(DegradeDepth, DeterministicUnderSeed) {
  const DepthNoise noise{2, 0.5};
  EXPECT_EQ(degrade_depth(truth, noise, bins, 11), degrade_depth(truth, noise, bins, 11));
  int dropped = 0;
  const DepthDistribution d = degrade_depth(truth, noise, bins, 11);
  for (int v = 0; v < 3; ++v)
    for (int u = 0; u < 4; ++u) dropped += d.pixel(u, v)[9] == 0.1f;
  EXPECT_GT(dropped, 0);
  EXPECT_LT(dropped, 12);
}

TEST(EndToEnd, ExpertBevSupportCentersOnObject) {
  SceneSpec spec;
  spec.n_frames = 1;
  spec.objects = {ObjectSpec{Vec3(10.0, 1.0, 0.0), Vec3(0.6, 0.6, 1.6), 0.0, Vec3::Zero()}};
  const Scene scene = generate_scene(spec, 3);
  const Frame& f = scene.frames[0];
  const DepthBinSpec bins{1.0, 41.0, 400};
  const BEVSpec bev;  // 0.4 m cells
  const CameraModel& cam = scene.rig[0];

  const std::vector<std::pair<PointCloud, RigidTransform>> clouds{{f.lidar, RigidTransform::identity()}};
  const DepthMap lidar = render_lidar_depth(cam, clouds);
  const DepthDistribution depth =
      fuse_depth(lidar, DepthDistribution(cam.width, cam.height, bins.n_bins), DepthStrategy::Lidar, 0.5, bins);

  // Features only on pixels that see the object.
  FeatureMap feat = render_truth_features(cam, f.objects, 4);
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u)
      if (cast_pixel(cam, f.objects, u, v).surface != 0) std::fill(feat.pixel(u, v).begin(), feat.pixel(u, v).end(), 0.0f);

  const BEVGrid g = lift_splat(feat, depth, cam, bev, bins);
  double sx = 0.0, sy = 0.0;
  int n = 0;
  for (int ix = 0; ix < bev.nx; ++ix)
    for (int iy = 0; iy < bev.ny; ++iy) {
      const auto c = g.cell(ix, iy);
      if (std::any_of(c.begin(), c.end(), [](float v) { return v != 0.0f; })) {
        sx += bev.center_x(ix);
        sy += bev.center_y(iy);
        ++n;
      }
    }
  ASSERT_GT(n, 0);
  const Point3D truth = f.objects[0].center;
  EXPECT_LT(std::abs(sx / n - truth.x()), bev.cell_x());
  EXPECT_LT(std::abs(sy / n - truth.y()), bev.cell_y());
}

TEST(EndToEnd, MisalignmentMatchesPositionDifferencing) {
  SceneSpec spec = small_spec();
  spec.n_frames = 6;
  spec.ego_yaw_rate = 0.15;
  spec.objects = {ObjectSpec{Vec3(12, 4, 0), Vec3(4, 2, 1.5), 0.3, Vec3(1.5, -2.0, 0)},
                  ObjectSpec{Vec3(-9, -5, 0), Vec3(4, 2, 1.5), 0.0, Vec3::Zero()}};
  const Scene s = generate_scene(spec, 8);
  const EgoTrack track = s.ego_track();
  const double t0 = s.frames.back().timestamp;
  for (int window = 1; window <= 5; ++window) {
    const MisalignmentReport moving = misalignment(track, s.object_states(0), window);
    const MisalignmentReport fixed = misalignment(track, s.object_states(1), window);
    for (int i = 1; i <= window; ++i) {
      const double ti = t0 - i * spec.frame_dt;
      const Vec3 world_delta = spec.objects[0].velocity * (t0 - ti);
      const Vec3 oracle = s.frames.back().ego_pose.rotation().transpose() * world_delta;
      EXPECT_LE((moving.errors[static_cast<size_t>(i - 1)] - oracle).norm(), 1e-12);
      EXPECT_LE(fixed.errors[static_cast<size_t>(i - 1)].norm(), 1e-12);
    }
    EXPECT_GT(moving.fused_norm(), 0.0);
  }
}

}  // namespace
}  // namespace bevkd
