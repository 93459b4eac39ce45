#include "morph3d/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "morph3d/error.hpp"

namespace morph3d {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::EmptyRoi: return "EmptyRoi";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NoNoseFound: return "NoNoseFound";
    case ErrorCode::EmptyProjection: return "EmptyProjection";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateSurface: return "DegenerateSurface";
    case ErrorCode::InsufficientTraining: return "InsufficientTraining";
    case ErrorCode::DegenerateDescriptor: return "DegenerateDescriptor";
    case ErrorCode::EmptyScoreSet: return "EmptyScoreSet";
    case ErrorCode::MissingMatedSamples: return "MissingMatedSamples";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::NoEligiblePairs: return "NoEligiblePairs";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = rotation.determinant();
  if (!(ortho <= 1e-9) || !(std::abs(det - 1.0) <= 1e-9) || !translation.allFinite()) {
    throw Error(ErrorCode::InvalidConfig, "rotation is not a proper orthonormal matrix");
  }
}

RigidTransform RigidTransform::from_euler_deg(double yaw, double pitch, double roll, const Vec3& t) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const Mat3 r = (Eigen::AngleAxisd(roll * kDeg, Vec3::UnitZ()) *
                  Eigen::AngleAxisd(yaw * kDeg, Vec3::UnitY()) *
                  Eigen::AngleAxisd(pitch * kDeg, Vec3::UnitX()))
                     .toRotationMatrix();
  return RigidTransform(r, t);
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation_ = rotation_.transpose();
  inv.translation_ = -(inv.rotation_ * translation_);
  return inv;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return RigidTransform(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
}

TriMesh::TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces, std::vector<std::uint8_t> validity)
    : vertices_(std::move(vertices)), faces_(std::move(faces)), valid_(std::move(validity)) {
  if (!valid_.empty() && valid_.size() != vertices_.size()) {
    throw Error(ErrorCode::MalformedFile, "validity flag count differs from vertex count");
  }
  for (const auto& v : vertices_) {
    if (!v.allFinite()) throw Error(ErrorCode::MalformedFile, "non-finite vertex coordinate");
  }
  const auto n = vertices_.size();
  for (const auto& f : faces_) {
    for (auto idx : f) {
      if (idx >= n) {
        throw Error(ErrorCode::MalformedFile,
                    "face index " + std::to_string(idx) + " out of range (" + std::to_string(n) + " vertices)");
      }
      if (!valid(idx)) throw Error(ErrorCode::MalformedFile, "face references an invalid vertex");
    }
  }
}

TriMesh TriMesh::subset(std::span<const std::uint8_t> keep) const {
  constexpr auto kDropped = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> remap(vertices_.size(), kDropped);
  std::vector<Vec3> verts;
  std::vector<std::uint8_t> valid;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (!keep[i]) continue;
    remap[i] = static_cast<std::uint32_t>(verts.size());
    verts.push_back(vertices_[i]);
    if (!valid_.empty()) valid.push_back(valid_[i]);
  }
  std::vector<Face> faces;
  for (const auto& f : faces_) {
    if (remap[f[0]] == kDropped || remap[f[1]] == kDropped || remap[f[2]] == kDropped) continue;
    faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
  }
  return TriMesh(std::move(verts), std::move(faces), std::move(valid));
}

TriMesh apply_transform(const TriMesh& mesh, const RigidTransform& t) {
  std::vector<Vec3> verts;
  verts.reserve(mesh.vertex_count());
  for (const auto& v : mesh.vertices()) verts.push_back(t.apply(v));
  return TriMesh(std::move(verts), mesh.faces(), mesh.validity());
}

}  // namespace morph3d
