#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace morph3d {

// All coordinates are millimeters. Right-handed, +z points toward the sensor.
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<std::uint32_t, 3>;

/// Proper rigid motion p -> R p + t.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

  /// Throws InvalidConfig when `rotation` is not orthonormal with det +1
  /// (within 1e-9).
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_euler_deg(double yaw, double pitch, double roll, const Vec3& t);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  RigidTransform inverse() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// Returns the transform that applies `b` first, then `a`.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

/// Triangle mesh or point cloud (no faces). Invalid vertices mark missing
/// measurements; no face may reference one.
class TriMesh {
 public:
  TriMesh() = default;

  /// Validates the invariants; throws MalformedFile on index errors, EmptyMesh
  /// never (an empty mesh is representable, readers reject it).
  TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces, std::vector<std::uint8_t> valid = {});

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t face_count() const { return faces_.size(); }
  bool empty() const { return vertices_.empty(); }

  bool has_validity() const { return !valid_.empty(); }
  bool valid(std::size_t i) const { return valid_.empty() || valid_[i] != 0; }
  const std::vector<std::uint8_t>& validity() const { return valid_; }

  /// Keeps vertices with keep[i] set, reindexes faces, drops faces that
  /// reference a removed vertex.
  TriMesh subset(std::span<const std::uint8_t> keep) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<std::uint8_t> valid_;
};

TriMesh apply_transform(const TriMesh& mesh, const RigidTransform& t);

}  // namespace morph3d
