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

// Rigid transforms and the pinhole camera.
//
// Frame conventions used throughout the library:
//   ego frame     right-handed, x forward, y left, z up (meters)
//   camera frame  z forward (optical axis), x right, y down
// Pixel (u, v) = (column, row); integer coordinates are pixel centers.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <string>

#include "bevkd/error.hpp"

namespace bevkd {

using Point3D = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;

struct GeometryTolerance {
  static constexpr double kOrthonormality = 1e-9;
  /// Camera-frame depth at or below this is treated as behind the camera.
  static constexpr double kBehindCamera = 1e-6;
};

/// SE(3) element stored as a 4x4 homogeneous matrix.
class RigidTransform {
 public:
  RigidTransform() : m_(Eigen::Matrix4d::Identity()) {}

  /// Validates orthonormality, det(R) = +1 and the bottom row.
  static RigidTransform from_matrix(const Eigen::Matrix4d& m,
                                    double tol = GeometryTolerance::kOrthonormality) {
    if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0) {
      throw Error(ErrorKind::InvalidSpec, "bottom row of rigid transform must be [0 0 0 1]");
    }
    const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
    const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho <= tol) || !(std::abs(r.determinant() - 1.0) <= tol)) {
      throw Error(ErrorKind::InvalidSpec, "rotation block is not a proper rotation");
    }
    if (!m.allFinite()) throw Error(ErrorKind::InvalidSpec, "non-finite transform");
    RigidTransform t;
    t.m_ = m;
    return t;
  }

  static RigidTransform from_rotation_translation(const Eigen::Matrix3d& r, const Vec3& t) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = r;
    m.topRightCorner<3, 1>() = t;
    return from_matrix(m);
  }

  static RigidTransform identity() { return {}; }

  static RigidTransform translation(double x, double y, double z) {
    RigidTransform t;
    t.m_(0, 3) = x;
    t.m_(1, 3) = y;
    t.m_(2, 3) = z;
    return t;
  }

  /// Rotation about +z (yaw), counter-clockwise seen from above.
  static RigidTransform rotation_z(double radians) {
    RigidTransform t;
    const double c = std::cos(radians);
    const double s = std::sin(radians);
    t.m_(0, 0) = c;
    t.m_(0, 1) = -s;
    t.m_(1, 0) = s;
    t.m_(1, 1) = c;
    return t;
  }

  /// Yaw rotation followed by translation: p -> Rz(yaw) p + (x, y, z).
  static RigidTransform from_yaw_translation(double yaw, const Vec3& t) {
    RigidTransform r = rotation_z(yaw);
    r.m_.topRightCorner<3, 1>() = t;
    return r;
  }

  const Eigen::Matrix4d& matrix() const { return m_; }
  Eigen::Matrix3d rotation() const { return m_.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return m_.topRightCorner<3, 1>(); }

  /// Row-major 16 values, the serialized form.
  std::array<double, 16> row_major() const {
    std::array<double, 16> out{};
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) out[static_cast<size_t>(r * 4 + c)] = m_(r, c);
    return out;
  }

  static RigidTransform from_row_major(const std::array<double, 16>& v) {
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) m(r, c) = v[static_cast<size_t>(r * 4 + c)];
    return from_matrix(m);
  }

  bool operator==(const RigidTransform& o) const { return m_ == o.m_; }

 private:
  Eigen::Matrix4d m_;
};

/// result(p) = a(b(p)).
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  Eigen::Matrix4d m = a.matrix() * b.matrix();
  m.row(3) << 0.0, 0.0, 0.0, 1.0;
  return RigidTransform::from_matrix(m, 1e-6);
}

inline RigidTransform invert(const RigidTransform& t) {
  const Eigen::Matrix3d rt = t.rotation().transpose();
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rt;
  m.topRightCorner<3, 1>() = -rt * t.translation();
  return RigidTransform::from_matrix(m, 1e-6);
}

inline Point3D transform_point(const RigidTransform& t, const Point3D& p) {
  return t.matrix().topLeftCorner<3, 3>() * p + t.matrix().topRightCorner<3, 1>();
}

struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  /// Maps ego-frame points into the camera frame.
  RigidTransform extrinsic;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorKind::InvalidSpec, "focal lengths must be positive");
    if (width < 1 || height < 1) throw Error(ErrorKind::InvalidSpec, "image size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
      throw Error(ErrorKind::InvalidSpec, "principal point outside image");
    }
  }

  bool operator==(const CameraModel&) const = default;
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Pinhole projection of a camera-frame point.
inline Projection project_camera_frame(const CameraModel& cam, const Point3D& pc,
                                       double eps = GeometryTolerance::kBehindCamera) {
  if (!(pc.z() > eps)) throw Error(ErrorKind::BehindCamera, "camera-frame depth " + std::to_string(pc.z()));
  return {cam.fx * (pc.x() / pc.z()) + cam.cx, cam.fy * (pc.y() / pc.z()) + cam.cy, pc.z()};
}

/// Projects an ego-frame point. The result may fall outside the image.
inline Projection project(const CameraModel& cam, const Point3D& p,
                          double eps = GeometryTolerance::kBehindCamera) {
  return project_camera_frame(cam, transform_point(cam.extrinsic, p), eps);
}

/// Camera-frame point at forward depth d along pixel (u, v).
inline Point3D backproject_camera_frame(const CameraModel& cam, double u, double v, double d) {
  if (!(d > 0.0)) throw Error(ErrorKind::NonPositiveDepth, "depth " + std::to_string(d));
  return {(u - cam.cx) / cam.fx * d, (v - cam.cy) / cam.fy * d, d};
}

/// Inverse of project(); returns an ego-frame point.
inline Point3D backproject(const CameraModel& cam, double u, double v, double d) {
  return transform_point(invert(cam.extrinsic), backproject_camera_frame(cam, u, v, d));
}

/// Pinhole camera looking horizontally along ego yaw `yaw`, mounted at `position`.
inline CameraModel make_yawed_camera(int width, int height, double horizontal_fov, double yaw,
                                     const Vec3& position) {
  CameraModel cam;
  cam.width = width;
  cam.height = height;
  cam.fx = (0.5 * width) / std::tan(0.5 * horizontal_fov);
  cam.fy = cam.fx;
  cam.cx = 0.5 * (width - 1);
  cam.cy = 0.5 * (height - 1);
  const Vec3 forward(std::cos(yaw), std::sin(yaw), 0.0);
  const Vec3 right(std::sin(yaw), -std::cos(yaw), 0.0);
  const Vec3 down(0.0, 0.0, -1.0);
  Eigen::Matrix3d r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  cam.extrinsic = RigidTransform::from_rotation_translation(r, -r * position);
  cam.validate();
  return cam;
}

}  // namespace bevkd
