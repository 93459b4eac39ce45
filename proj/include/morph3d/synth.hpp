#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "morph3d/geometry.hpp"

namespace morph3d {

/// Mirrored pair of Gaussian bumps at (+-x, y); local identity detail.
struct DetailBump {
  double x = 0.0, y = 0.0;    // x in [10, 50], y in [-30, 85]
  double sx = 8.0, sy = 8.0;  // [6, 12]
  double amplitude = 0.0;     // [-2.5, 2.5]
};

/// Identity parameters of one synthetic subject, millimeters. The canonical
/// frame has the nose apex near the origin, +y up, +z toward the sensor.
struct SubjectParams {
  int id = 0;
  double face_half_width = 70.0;   // [64, 76]
  double face_half_height = 94.0;  // [88, 100]
  double face_depth = 60.0;        // [50, 70] dome height
  double face_center_y = 10.0;     // [6, 14]
  double nose_height = 20.0;       // [15, 25] tip protrusion above the dome
  double nose_width = 9.0;         // [7, 11] lateral sigma at the tip
  double nose_tip_radius = 5.0;    // [3, 7] rounding radius of the dorsum at the tip
  double nose_length = 42.0;       // [36, 50] tip to nasion
  double nose_underside = 5.5;     // [4, 7] vertical sigma below the tip
  double bridge_width = 6.5;       // [5, 8] lateral sigma at the nasion
  double eye_spacing = 32.0;       // [28, 36] half distance between sockets
  double eye_height = 32.0;        // [28, 36]
  double eye_depth = 9.0;          // [6, 12]
  double brow_prominence = 4.0;    // [2, 6]
  double cheek_height = 4.0;       // [2, 6]
  double cheek_asymmetry = 0.0;    // [-1, 1] left minus right
  double mouth_y = -30.0;          // [-34, -26]
  double mouth_depth = 2.5;        // [1.5, 4]
  double chin_prominence = 4.0;    // [2, 6]
  std::array<DetailBump, 6> detail{};
};

/// Per-sample expression state (signed warp amplitudes, mm).
struct Expression {
  double mouth = 0.0;
  double brow = 0.0;
};

/// Per-sample acquisition variation. Named profiles: "zero", "controlled",
/// "default" (the uncontrolled profile).
struct NoiseProfile {
  double max_rotation_deg = 10.0;
  double max_translation_mm = 20.0;
  double sigma_mm = 0.4;
  double expression_mm = 3.0;
  bool eye_holes = true;

  static NoiseProfile named(const std::string& name);
  void validate() const;
};

struct PopulationConfig {
  std::uint64_t seed = 7;
  int n_subjects = 40;
  int samples_per_subject = 3;
  NoiseProfile noise;
  double mesh_spacing_mm = 1.25;

  void validate() const;
};

struct GroundTruth {
  Vec3 nose_tip;           // raw frame
  RigidTransform pose;     // canonical -> raw
};

struct FaceSample {
  int subject = 0;
  int sample = 0;
  TriMesh mesh;
  GroundTruth truth;
};

/// Mixes (seed, a, b) into an independent 64-bit stream seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

SubjectParams subject_params(std::uint64_t population_seed, int subject_id);

/// Analytic canonical-frame surface height.
double face_height(const SubjectParams& p, const Expression& e, double x, double y);
bool in_face_region(const SubjectParams& p, double x, double y);
bool in_eye_hole(const SubjectParams& p, double x, double y);

/// Canonical-frame apex of the nose ridge term (x = 0, y = 0) on the surface.
Vec3 canonical_nose_tip(const SubjectParams& p, const Expression& e);

/// Canonical, noise-free mesh of a subject (used by tests as an analytic
/// reference and by the sample generator).
TriMesh canonical_face_mesh(const SubjectParams& p, const Expression& e, bool eye_holes, double spacing_mm = 1.25);

FaceSample generate_sample(const PopulationConfig& cfg, int subject, int sample);
std::vector<FaceSample> generate_population(const PopulationConfig& cfg);
GroundTruth ground_truth(const PopulationConfig& cfg, int subject, int sample);

}  // namespace morph3d
