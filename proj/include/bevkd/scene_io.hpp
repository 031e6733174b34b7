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

// File formats. See docs/FORMATS.md for the byte layout.
//
// Blob (all integers and reals little-endian):
//   magic "BEVKDBLB" | u32 version | u32 kind | u32 dtype | u32 ndims |
//   u64 dims[ndims] | u32 nmeta | f64 meta[nmeta] | payload | u32 crc32
// The trailing CRC-32 (zlib polynomial) covers every preceding byte.
//
// A scene is a directory with manifest.json plus one point-cloud blob per frame.

#pragma once

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bevkd/depth.hpp"
#include "bevkd/error.hpp"
#include "bevkd/occupancy.hpp"
#include "bevkd/synth_scene.hpp"
#include "bevkd/view_transform.hpp"

namespace bevkd {

inline constexpr uint32_t kFormatVersion = 1;
inline constexpr std::array<char, 8> kBlobMagic{'B', 'E', 'V', 'K', 'D', 'B', 'L', 'B'};

enum class BlobKind : uint32_t { BevGrid = 1, OccupancyGrid = 2, DepthDistribution = 3, PointCloud = 4 };
enum class DType : uint32_t { Float32 = 1, Float64 = 2 };

inline uint32_t crc32_of(const uint8_t* data, size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<uint32_t>(crc);
}

/// Decoded blob with the payload kept as raw little-endian bytes.
struct Blob {
  BlobKind kind = BlobKind::BevGrid;
  DType dtype = DType::Float32;
  std::vector<uint64_t> dims;
  std::vector<double> meta;
  std::vector<uint8_t> payload;

  size_t element_count() const {
    size_t n = 1;
    for (uint64_t d : dims) n *= static_cast<size_t>(d);
    return n;
  }
  size_t element_size() const { return dtype == DType::Float32 ? 4 : 8; }
};

namespace detail {

class ByteWriter {
 public:
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }

  std::vector<uint8_t> bytes;
};

class ByteReader {
 public:
  ByteReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  size_t remaining() const { return size_ - pos_; }
  size_t position() const { return pos_; }

 private:
  void need(size_t n) const {
    if (size_ - pos_ < n) throw Error(ErrorKind::CorruptHeader, "blob truncated");
  }
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

inline std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::IoFailure, "read failed: " + path.string());
  return data;
}

inline void write_file(const std::filesystem::path& path, const void* data, size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw Error(ErrorKind::IoFailure, "write failed: " + path.string());
}

}  // namespace detail

inline std::vector<uint8_t> encode_blob(const Blob& blob) {
  if (blob.payload.size() != blob.element_count() * blob.element_size()) {
    throw Error(ErrorKind::CorruptHeader, "payload size does not match dims");
  }
  detail::ByteWriter w;
  w.bytes.insert(w.bytes.end(), kBlobMagic.begin(), kBlobMagic.end());
  w.u32(kFormatVersion);
  w.u32(static_cast<uint32_t>(blob.kind));
  w.u32(static_cast<uint32_t>(blob.dtype));
  w.u32(static_cast<uint32_t>(blob.dims.size()));
  for (uint64_t d : blob.dims) w.u64(d);
  w.u32(static_cast<uint32_t>(blob.meta.size()));
  for (double m : blob.meta) w.f64(m);
  w.bytes.insert(w.bytes.end(), blob.payload.begin(), blob.payload.end());
  w.u32(crc32_of(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

inline Blob decode_blob(const std::vector<uint8_t>& data) {
  if (data.size() < kBlobMagic.size() + 8 || std::memcmp(data.data(), kBlobMagic.data(), kBlobMagic.size()) != 0) {
    throw Error(ErrorKind::CorruptHeader, "bad blob magic");
  }
  detail::ByteReader head(data.data() + kBlobMagic.size(), data.size() - kBlobMagic.size());
  const uint32_t version = head.u32();
  if (version > kFormatVersion) {
    throw Error(ErrorKind::UnsupportedVersion, "blob format version " + std::to_string(version));
  }
  const size_t body = data.size() - 4;
  detail::ByteReader tail(data.data() + body, 4);
  if (crc32_of(data.data(), body) != tail.u32()) throw Error(ErrorKind::ChecksumMismatch, "blob checksum mismatch");

  detail::ByteReader r(data.data() + kBlobMagic.size() + 4, body - kBlobMagic.size() - 4);
  Blob blob;
  const uint32_t kind = r.u32();
  const uint32_t dtype = r.u32();
  if (kind < 1 || kind > 4) throw Error(ErrorKind::CorruptHeader, "unknown blob kind");
  if (dtype < 1 || dtype > 2) throw Error(ErrorKind::CorruptHeader, "unknown dtype");
  blob.kind = static_cast<BlobKind>(kind);
  blob.dtype = static_cast<DType>(dtype);
  const uint32_t ndims = r.u32();
  if (ndims > 8) throw Error(ErrorKind::CorruptHeader, "too many dims");
  for (uint32_t i = 0; i < ndims; ++i) blob.dims.push_back(r.u64());
  const uint32_t nmeta = r.u32();
  if (nmeta > 64) throw Error(ErrorKind::CorruptHeader, "too many meta values");
  for (uint32_t i = 0; i < nmeta; ++i) blob.meta.push_back(r.f64());
  // Guard the product against overflow before comparing with the payload.
  size_t expected = blob.element_size();
  for (uint64_t d : blob.dims) {
    if (d != 0 && expected > (SIZE_MAX / d)) throw Error(ErrorKind::CorruptHeader, "dims overflow");
    expected *= static_cast<size_t>(d);
  }
  if (r.remaining() != expected) throw Error(ErrorKind::CorruptHeader, "payload size does not match header dims");
  const uint8_t* start = data.data() + kBlobMagic.size() + 4 + r.position();
  blob.payload.assign(start, start + expected);
  return blob;
}

inline void write_blob(const std::filesystem::path& path, const Blob& blob) {
  const std::vector<uint8_t> bytes = encode_blob(blob);
  detail::write_file(path, bytes.data(), bytes.size());
}

inline Blob read_blob(const std::filesystem::path& path) { return decode_blob(detail::read_file(path)); }

namespace detail {

inline std::vector<uint8_t> pack_f32(const std::vector<float>& v) {
  ByteWriter w;
  w.bytes.reserve(v.size() * 4);
  for (float x : v) w.f32(x);
  return std::move(w.bytes);
}

inline std::vector<float> unpack_f32(const Blob& b) {
  if (b.dtype != DType::Float32) throw Error(ErrorKind::CorruptHeader, "expected float32 payload");
  ByteReader r(b.payload.data(), b.payload.size());
  std::vector<float> out(b.payload.size() / 4);
  for (float& x : out) x = r.f32();
  return out;
}

inline void expect(const Blob& b, BlobKind kind, size_t ndims, size_t nmeta) {
  if (b.kind != kind || b.dims.size() != ndims || b.meta.size() != nmeta) {
    throw Error(ErrorKind::CorruptHeader, "unexpected blob kind or header layout");
  }
}

inline int dim_as_int(uint64_t d) {
  if (d > static_cast<uint64_t>(INT32_MAX)) throw Error(ErrorKind::CorruptHeader, "dimension too large");
  return static_cast<int>(d);
}

}  // namespace detail

// --- grids -----------------------------------------------------------------

inline Blob to_blob(const BEVGrid& g) {
  return {BlobKind::BevGrid,
          DType::Float32,
          {static_cast<uint64_t>(g.spec.nx), static_cast<uint64_t>(g.spec.ny), static_cast<uint64_t>(g.channels)},
          {g.spec.x_min, g.spec.x_max, g.spec.y_min, g.spec.y_max, g.frame_timestamp},
          detail::pack_f32(g.values)};
}

inline Blob to_blob(const OccupancyGrid& g) {
  const VoxelSpec& s = g.spec;
  return {BlobKind::OccupancyGrid,
          DType::Float32,
          {static_cast<uint64_t>(s.nx), static_cast<uint64_t>(s.ny), static_cast<uint64_t>(s.nz)},
          {s.x_min, s.x_max, s.y_min, s.y_max, s.z_min, s.z_max},
          detail::pack_f32(g.values)};
}

inline Blob to_blob(const DepthDistribution& d) {
  return {BlobKind::DepthDistribution,
          DType::Float32,
          {static_cast<uint64_t>(d.height), static_cast<uint64_t>(d.width), static_cast<uint64_t>(d.n_bins)},
          {},
          detail::pack_f32(d.values)};
}

inline void save_grid(const std::filesystem::path& path, const BEVGrid& g) { write_blob(path, to_blob(g)); }
inline void save_grid(const std::filesystem::path& path, const OccupancyGrid& g) { write_blob(path, to_blob(g)); }
inline void save_grid(const std::filesystem::path& path, const DepthDistribution& d) { write_blob(path, to_blob(d)); }

inline BEVGrid bev_from_blob(const Blob& b) {
  detail::expect(b, BlobKind::BevGrid, 3, 5);
  BEVGrid g;
  g.spec = {b.meta[0], b.meta[1], b.meta[2], b.meta[3], detail::dim_as_int(b.dims[0]), detail::dim_as_int(b.dims[1])};
  g.channels = detail::dim_as_int(b.dims[2]);
  g.frame_timestamp = b.meta[4];
  g.values = detail::unpack_f32(b);
  return g;
}

inline OccupancyGrid occupancy_from_blob(const Blob& b) {
  detail::expect(b, BlobKind::OccupancyGrid, 3, 6);
  OccupancyGrid g;
  g.spec = {b.meta[0], b.meta[1], b.meta[2], b.meta[3], b.meta[4], b.meta[5],
            detail::dim_as_int(b.dims[0]), detail::dim_as_int(b.dims[1]), detail::dim_as_int(b.dims[2])};
  g.values = detail::unpack_f32(b);
  return g;
}

inline DepthDistribution depth_distribution_from_blob(const Blob& b) {
  detail::expect(b, BlobKind::DepthDistribution, 3, 0);
  DepthDistribution d;
  d.height = detail::dim_as_int(b.dims[0]);
  d.width = detail::dim_as_int(b.dims[1]);
  d.n_bins = detail::dim_as_int(b.dims[2]);
  d.values = detail::unpack_f32(b);
  return d;
}

inline BEVGrid load_bev_grid(const std::filesystem::path& path) { return bev_from_blob(read_blob(path)); }
inline OccupancyGrid load_occupancy_grid(const std::filesystem::path& path) {
  return occupancy_from_blob(read_blob(path));
}
inline DepthDistribution load_depth_distribution(const std::filesystem::path& path) {
  return depth_distribution_from_blob(read_blob(path));
}

// --- point clouds ------------------------------------------------------------

inline Blob to_blob(const PointCloud& cloud) {
  detail::ByteWriter w;
  for (const Point3D& p : cloud) {
    w.f64(p.x());
    w.f64(p.y());
    w.f64(p.z());
  }
  return {BlobKind::PointCloud, DType::Float64, {cloud.size(), 3}, {}, std::move(w.bytes)};
}

inline PointCloud point_cloud_from_blob(const Blob& b) {
  detail::expect(b, BlobKind::PointCloud, 2, 0);
  if (b.dtype != DType::Float64 || b.dims[1] != 3) throw Error(ErrorKind::CorruptHeader, "point cloud must be N x 3 float64");
  detail::ByteReader r(b.payload.data(), b.payload.size());
  PointCloud cloud(static_cast<size_t>(b.dims[0]));
  for (Point3D& p : cloud) {
    const double x = r.f64();
    const double y = r.f64();
    const double z = r.f64();
    p = Point3D(x, y, z);
  }
  return cloud;
}

// --- JSON conversions ----------------------------------------------------------

inline nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::CorruptHeader, "expected 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json transform_json(const RigidTransform& t) { return t.row_major(); }

inline RigidTransform transform_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 16) throw Error(ErrorKind::CorruptHeader, "expected 16 pose values");
  return RigidTransform::from_row_major(j.get<std::array<double, 16>>());
}

inline nlohmann::json to_json_value(const ObjectSpec& o) {
  return {{"position", vec3_json(o.position)},
          {"size", vec3_json(o.size)},
          {"yaw", o.yaw},
          {"velocity", vec3_json(o.velocity)}};
}

inline ObjectSpec object_spec_from(const nlohmann::json& j) {
  return {vec3_from(j.at("position")), vec3_from(j.at("size")), j.at("yaw").get<double>(),
          vec3_from(j.at("velocity"))};
}

inline nlohmann::json to_json_value(const SceneSpec& s) {
  nlohmann::json objects = nlohmann::json::array();
  for (const ObjectSpec& o : s.objects) objects.push_back(to_json_value(o));
  return {{"n_frames", s.n_frames},
          {"frame_dt", s.frame_dt},
          {"n_objects", s.n_objects},
          {"object_speed_min", s.object_speed_min},
          {"object_speed_max", s.object_speed_max},
          {"placement_radius_min", s.placement_radius_min},
          {"placement_radius_max", s.placement_radius_max},
          {"objects", objects},
          {"ego_speed", s.ego_speed},
          {"ego_yaw_rate", s.ego_yaw_rate},
          {"lidar_azimuth_steps", s.lidar_azimuth_steps},
          {"lidar_elevation_steps", s.lidar_elevation_steps},
          {"lidar_elevation_min_deg", s.lidar_elevation_min_deg},
          {"lidar_elevation_max_deg", s.lidar_elevation_max_deg},
          {"lidar_height", s.lidar_height},
          {"lidar_max_range", s.lidar_max_range},
          {"lidar_range_noise", s.lidar_range_noise},
          {"n_cameras", s.n_cameras},
          {"image_width", s.image_width},
          {"image_height", s.image_height},
          {"camera_hfov_deg", s.camera_hfov_deg},
          {"camera_height", s.camera_height},
          {"noise", {{"blur_width", s.noise.blur_width}, {"dropout", s.noise.dropout}}}};
}

/// Fields absent from `j` keep the values already in `s`.
inline void merge_scene_spec(const nlohmann::json& j, SceneSpec& s) {
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  take("n_frames", s.n_frames);
  take("frame_dt", s.frame_dt);
  take("n_objects", s.n_objects);
  take("object_speed_min", s.object_speed_min);
  take("object_speed_max", s.object_speed_max);
  take("placement_radius_min", s.placement_radius_min);
  take("placement_radius_max", s.placement_radius_max);
  if (j.contains("objects")) {
    s.objects.clear();
    for (const auto& o : j.at("objects")) s.objects.push_back(object_spec_from(o));
  }
  take("ego_speed", s.ego_speed);
  take("ego_yaw_rate", s.ego_yaw_rate);
  take("lidar_azimuth_steps", s.lidar_azimuth_steps);
  take("lidar_elevation_steps", s.lidar_elevation_steps);
  take("lidar_elevation_min_deg", s.lidar_elevation_min_deg);
  take("lidar_elevation_max_deg", s.lidar_elevation_max_deg);
  take("lidar_height", s.lidar_height);
  take("lidar_max_range", s.lidar_max_range);
  take("lidar_range_noise", s.lidar_range_noise);
  take("n_cameras", s.n_cameras);
  take("image_width", s.image_width);
  take("image_height", s.image_height);
  take("camera_hfov_deg", s.camera_hfov_deg);
  take("camera_height", s.camera_height);
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    if (n.contains("blur_width")) s.noise.blur_width = n.at("blur_width").get<int>();
    if (n.contains("dropout")) s.noise.dropout = n.at("dropout").get<double>();
  }
}

inline SceneSpec scene_spec_from(const nlohmann::json& j) {
  SceneSpec s;
  merge_scene_spec(j, s);
  return s;
}

inline nlohmann::json to_json_value(const CameraModel& c) {
  return {{"fx", c.fx},       {"fy", c.fy},         {"cx", c.cx},
          {"cy", c.cy},       {"width", c.width},   {"height", c.height},
          {"extrinsic", transform_json(c.extrinsic)}};
}

inline CameraModel camera_from(const nlohmann::json& j) {
  CameraModel c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.extrinsic = transform_from(j.at("extrinsic"));
  c.validate();
  return c;
}

inline nlohmann::json to_json_value(const ObjectState& o) {
  return {{"object_id", o.object_id},         {"timestamp", o.timestamp}, {"center", vec3_json(o.center)},
          {"size", vec3_json(o.size)},        {"yaw", o.yaw},             {"velocity", vec3_json(o.velocity)}};
}

inline ObjectState object_state_from(const nlohmann::json& j) {
  ObjectState o;
  o.object_id = j.at("object_id").get<int>();
  o.timestamp = j.at("timestamp").get<double>();
  o.center = vec3_from(j.at("center"));
  o.size = vec3_from(j.at("size"));
  o.yaw = j.at("yaw").get<double>();
  o.velocity = vec3_from(j.at("velocity"));
  o.validate();
  return o;
}

// --- scenes ------------------------------------------------------------------

using Manifest = nlohmann::json;

inline constexpr const char* kManifestName = "manifest.json";

inline std::string frame_blob_name(size_t i) {
  std::string digits = std::to_string(i);
  return "lidar_" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits + ".bin";
}

/// Writes <dir>/manifest.json and one LiDAR blob per frame.
inline Manifest save_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + dir.string() + ": " + ec.message());

  Manifest m;
  m["format_version"] = kFormatVersion;
  m["seed"] = scene.seed;
  m["scene_spec"] = to_json_value(scene.spec);
  m["rig"] = nlohmann::json::array();
  for (const CameraModel& c : scene.rig) m["rig"].push_back(to_json_value(c));
  m["frames"] = nlohmann::json::array();
  for (size_t i = 0; i < scene.frames.size(); ++i) {
    const Frame& f = scene.frames[i];
    const std::vector<uint8_t> bytes = encode_blob(to_blob(f.lidar));
    const std::string name = frame_blob_name(i);
    detail::write_file(dir / name, bytes.data(), bytes.size());
    nlohmann::json objects = nlohmann::json::array();
    for (const ObjectState& o : f.objects) objects.push_back(to_json_value(o));
    m["frames"].push_back({{"timestamp", f.timestamp},
                           {"ego_pose", transform_json(f.ego_pose)},
                           {"objects", objects},
                           {"lidar", {{"path", name}, {"crc32", crc32_of(bytes.data(), bytes.size())}}}});
  }
  const std::string text = m.dump(2) + "\n";
  detail::write_file(dir / kManifestName, text.data(), text.size());
  return m;
}

inline Scene load_scene(const std::filesystem::path& dir) {
  const std::vector<uint8_t> raw = detail::read_file(dir / kManifestName);
  Manifest m;
  try {
    m = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptHeader, std::string("manifest: ") + e.what());
  }
  try {
    const auto version = m.at("format_version").get<uint32_t>();
    if (version > kFormatVersion) throw Error(ErrorKind::UnsupportedVersion, "scene format version " + std::to_string(version));

    Scene scene;
    scene.seed = m.at("seed").get<uint64_t>();
    scene.spec = scene_spec_from(m.at("scene_spec"));
    for (const auto& c : m.at("rig")) scene.rig.push_back(camera_from(c));
    for (const auto& jf : m.at("frames")) {
      Frame f;
      f.timestamp = jf.at("timestamp").get<double>();
      f.ego_pose = transform_from(jf.at("ego_pose"));
      for (const auto& o : jf.at("objects")) f.objects.push_back(object_state_from(o));
      const auto& ref = jf.at("lidar");
      const std::vector<uint8_t> bytes = detail::read_file(dir / ref.at("path").get<std::string>());
      if (crc32_of(bytes.data(), bytes.size()) != ref.at("crc32").get<uint32_t>()) {
        throw Error(ErrorKind::ChecksumMismatch, "blob " + ref.at("path").get<std::string>());
      }
      f.lidar = point_cloud_from_blob(decode_blob(bytes));
      if (!scene.frames.empty() && !(f.timestamp > scene.frames.back().timestamp)) {
        throw Error(ErrorKind::CorruptHeader, "frame timestamps must be strictly increasing");
      }
      scene.frames.push_back(std::move(f));
    }
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptHeader, std::string("manifest: ") + e.what());
  }
}

}  // namespace bevkd
