#pragma once

#include "morph3d/depth_map.hpp"
#include "morph3d/geometry.hpp"

namespace morph3d {

struct RegistrationConfig {
  double roi_radius_mm = 100.0;
  int min_roi_vertices = 200;

  // Symmetry-plane search: coarse-to-fine over yaw, roll and lateral offset.
  double search_angle_deg = 30.0;
  double search_offset_mm = 30.0;
  double symmetry_cell_mm = 2.5;
  int max_search_points = 5000;
  double reject_residual_mm = 5.0;

  // Nose profile.
  double profile_band_mm = 2.0;
  double prominence_window_mm = 20.0;
  double prominence_floor_mm = 5.0;
  double bridge_arc_mm = 30.0;

  void validate() const;
};

struct SymmetryPlane {
  Vec3 point;
  Vec3 normal;
  double residual_mm = 0.0;
  // Search-space coordinates of the optimum, relative to `center`.
  double yaw_deg = 0.0;
  double roll_deg = 0.0;
  double offset_mm = 0.0;
  Vec3 center;
};

struct NoseFeatures {
  Vec3 tip;             // raw frame
  Vec3 bridge_direction;  // raw frame, unit, pointing up the bridge
  double bridge_slope = 0.0;  // radians, in the symmetry plane
  double prominence_mm = 0.0;
};

/// Raw -> intrinsic (nose tip at the origin, symmetry plane x = 0, bridge
/// along +y, z toward the sensor).
struct IntrinsicRegistration {
  RigidTransform transform;
  Vec3 nose_tip;
  double symmetry_residual_mm = 0.0;
  double bridge_slope = 0.0;
};

/// Vertices inside a sphere around the dominant surface cluster (mean-shift
/// from the coordinate-wise median). Throws EmptyRoi when fewer than
/// `min_roi_vertices` survive.
TriMesh extract_roi(const TriMesh& mesh, const RegistrationConfig& cfg = {});

/// Mirror-mismatch minimization. Throws NoConvergence when the best residual
/// exceeds `reject_residual_mm`.
SymmetryPlane find_symmetry_plane(const TriMesh& roi, const RegistrationConfig& cfg = {});

/// Throws NoNoseFound when the profile has no protrusion above the floor.
NoseFeatures detect_nose_features(const TriMesh& roi, const SymmetryPlane& plane, const RegistrationConfig& cfg = {});

/// extract_roi -> find_symmetry_plane -> detect_nose_features.
IntrinsicRegistration register_face(const TriMesh& mesh, const RegistrationConfig& cfg = {});

/// Front-most triangle interpolation of the transformed mesh onto the grid.
/// Faces touching invalid vertices are skipped. Throws EmptyProjection.
DepthMap rasterize(const TriMesh& mesh, const RigidTransform& to_intrinsic, const GridSpec& grid = {});
DepthMap rasterize(const TriMesh& mesh, const IntrinsicRegistration& reg, const GridSpec& grid = {});

/// Registers, then rasterizes the ROI.
DepthMap register_and_rasterize(const TriMesh& mesh, const RegistrationConfig& cfg = {}, const GridSpec& grid = {},
                                IntrinsicRegistration* reg_out = nullptr);

}  // namespace morph3d
