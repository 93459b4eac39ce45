#include "morph3d/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "morph3d/error.hpp"

namespace morph3d {

namespace {

double gauss2(double dx, double dy, double sx, double sy) {
  return std::exp(-0.5 * (dx * dx / (sx * sx) + dy * dy / (sy * sy)));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr double kFaceRegionRadius2 = 0.9;

// Relative nose protrusion along the ridge: 1 at the tip (zero slope there),
// a rounded-then-straight dorsum falling to 10% at the nasion, and a
// Gaussian underside.
double nose_profile(const SubjectParams& p, double y) {
  if (y < 0.0) return std::exp(-0.5 * y * y / (p.nose_underside * p.nose_underside));
  const double r = p.nose_tip_radius;
  const double length = p.nose_length;
  const double rate = 0.9 / (std::sqrt(length * length + r * r) - r);
  double v = 1.0 - rate * (std::sqrt(y * y + r * r) - r);
  if (y > length) {
    const double over = (y - length) / 8.0;
    v = 0.1 * std::exp(-0.5 * over * over) + (v - 0.1) * std::exp(-over);
  }
  return std::max(v, 0.0);
}

double nose_sigma_x(const SubjectParams& p, double y) {
  const double t = std::clamp(y / p.nose_length, 0.0, 1.0);
  return p.nose_width + (p.bridge_width - p.nose_width) * t;
}

Expression sample_expression(const PopulationConfig& cfg, int subject, int sample, std::mt19937_64& rng) {
  // Sample 0 is the neutral enrolment capture.
  if (sample == 0 || cfg.noise.expression_mm == 0.0) return {};
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Expression e;
  e.mouth = cfg.noise.expression_mm * u(rng);
  e.brow = 0.5 * cfg.noise.expression_mm * u(rng);
  (void)subject;
  return e;
}

RigidTransform sample_pose(const NoiseProfile& noise, std::mt19937_64& rng) {
  if (noise.max_rotation_deg == 0.0 && noise.max_translation_mm == 0.0) return RigidTransform::identity();
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double yaw = noise.max_rotation_deg * u(rng);
  const double pitch = noise.max_rotation_deg * u(rng);
  const double roll = noise.max_rotation_deg * u(rng);
  const Vec3 t(noise.max_translation_mm * u(rng), noise.max_translation_mm * u(rng), noise.max_translation_mm * u(rng));
  return RigidTransform::from_euler_deg(yaw, pitch, roll, t);
}

}  // namespace

NoiseProfile NoiseProfile::named(const std::string& name) {
  if (name == "zero") return {0.0, 0.0, 0.0, 0.0, false};
  if (name == "controlled") return {5.0, 10.0, 0.2, 1.5, true};
  if (name == "default" || name == "uncontrolled") return {};
  throw Error(ErrorCode::InvalidConfig, "unknown noise profile '" + name + "'");
}

void NoiseProfile::validate() const {
  if (!(sigma_mm >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise sigma must be >= 0");
  if (!(max_rotation_deg >= 0.0 && max_rotation_deg <= 45.0)) {
    throw Error(ErrorCode::InvalidConfig, "rotation bound must lie in [0, 45] degrees");
  }
  if (!(max_translation_mm >= 0.0)) throw Error(ErrorCode::InvalidConfig, "translation bound must be >= 0");
  if (!(expression_mm >= 0.0)) throw Error(ErrorCode::InvalidConfig, "expression magnitude must be >= 0");
}

void PopulationConfig::validate() const {
  if (n_subjects < 2) throw Error(ErrorCode::InvalidConfig, "population needs at least 2 subjects");
  if (samples_per_subject < 1) throw Error(ErrorCode::InvalidConfig, "population needs at least 1 sample per subject");
  if (!(mesh_spacing_mm > 0.1 && mesh_spacing_mm <= 5.0)) throw Error(ErrorCode::InvalidConfig, "mesh spacing must lie in (0.1, 5] mm");
  noise.validate();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0x632BE59BD9B4E019ULL));
}

SubjectParams subject_params(std::uint64_t population_seed, int subject_id) {
  std::mt19937_64 rng(derive_seed(population_seed, static_cast<std::uint64_t>(subject_id), 0xFACE));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  SubjectParams p;
  p.id = subject_id;
  p.face_half_width = in(64.0, 76.0);
  p.face_half_height = in(88.0, 100.0);
  p.face_depth = in(50.0, 70.0);
  p.face_center_y = in(6.0, 14.0);
  p.nose_height = in(15.0, 25.0);
  p.nose_width = in(7.0, 11.0);
  p.nose_tip_radius = in(3.0, 7.0);
  p.nose_length = in(36.0, 50.0);
  p.nose_underside = in(4.0, 7.0);
  p.bridge_width = in(5.0, 8.0);
  p.eye_spacing = in(28.0, 36.0);
  p.eye_height = in(28.0, 36.0);
  p.eye_depth = in(6.0, 12.0);
  p.brow_prominence = in(2.0, 6.0);
  p.cheek_height = in(2.0, 6.0);
  p.cheek_asymmetry = in(-1.0, 1.0);
  p.mouth_y = in(-34.0, -26.0);
  p.mouth_depth = in(1.5, 4.0);
  p.chin_prominence = in(2.0, 6.0);
  for (auto& b : p.detail) {
    b.x = in(10.0, 50.0);
    b.y = in(-30.0, 85.0);
    b.sx = in(6.0, 12.0);
    b.sy = in(6.0, 12.0);
    b.amplitude = in(-2.5, 2.5);
  }
  return p;
}

double face_height(const SubjectParams& p, const Expression& e, double x, double y) {
  const double sx = x / p.face_half_width;
  const double sy = (y - p.face_center_y) / p.face_half_height;
  const double s = std::min(sx * sx + sy * sy, 0.999);
  double z = p.face_depth * std::sqrt(1.0 - s);

  z += p.nose_height * nose_profile(p, y) * std::exp(-0.5 * x * x / (nose_sigma_x(p, y) * nose_sigma_x(p, y)));

  for (double side : {-1.0, 1.0}) {
    z -= p.eye_depth * gauss2(x - side * p.eye_spacing, y - p.eye_height, 11.0, 7.0);
    const double cheek = p.cheek_height + side * 0.5 * p.cheek_asymmetry;
    z += cheek * gauss2(x - side * 38.0, y + 15.0, 14.0, 14.0);
  }
  const double brow_y = p.eye_height + 14.0;
  z += p.brow_prominence * gauss2(x, y - brow_y, 40.0, 5.0);
  z -= p.mouth_depth * gauss2(x, y - p.mouth_y, 18.0, 2.5);
  z += p.chin_prominence * gauss2(x, y - (p.mouth_y - 28.0), 18.0, 8.0);
  for (const auto& b : p.detail) {
    z += b.amplitude * (gauss2(x - b.x, y - b.y, b.sx, b.sy) + gauss2(x + b.x, y - b.y, b.sx, b.sy));
  }

  z += e.mouth * gauss2(x, y - p.mouth_y, 22.0, 8.0);
  z += e.brow * gauss2(x, y - (brow_y + 2.0), 40.0, 7.0);
  return z;
}

bool in_face_region(const SubjectParams& p, double x, double y) {
  const double sx = x / p.face_half_width;
  const double sy = (y - p.face_center_y) / p.face_half_height;
  return sx * sx + sy * sy <= kFaceRegionRadius2;
}

bool in_eye_hole(const SubjectParams& p, double x, double y) {
  for (double side : {-1.0, 1.0}) {
    const double dx = (x - side * p.eye_spacing) / 9.0;
    const double dy = (y - p.eye_height) / 5.5;
    if (dx * dx + dy * dy <= 1.0) return true;
  }
  return false;
}

Vec3 canonical_nose_tip(const SubjectParams& p, const Expression& e) {
  // The ridge term peaks at y = 0 by construction.
  return {0.0, 0.0, face_height(p, e, 0.0, 0.0)};
}

namespace {

TriMesh build_face_mesh(const SubjectParams& p, const Expression& e, bool eye_holes, double spacing,
                        double noise_sigma, std::mt19937_64* rng) {
  const double half_w = p.face_half_width;
  const double y_lo = p.face_center_y - p.face_half_height;
  const double y_hi = p.face_center_y + p.face_half_height;
  const int nx = static_cast<int>(std::floor(half_w / spacing));
  const int ny_lo = static_cast<int>(std::ceil(y_lo / spacing));
  const int ny_hi = static_cast<int>(std::floor(y_hi / spacing));
  const int cols = 2 * nx + 1;
  const int rows = ny_hi - ny_lo + 1;

  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  constexpr auto kNone = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> index(static_cast<std::size_t>(cols) * rows, kNone);
  std::vector<Vec3> verts;
  std::vector<std::uint8_t> valid;
  bool any_hole = false;
  for (int r = 0; r < rows; ++r) {
    const double y = (ny_lo + r) * spacing;
    for (int c = 0; c < cols; ++c) {
      const double x = (c - nx) * spacing;
      if (!in_face_region(p, x, y)) continue;
      double z = face_height(p, e, x, y);
      if (noise_sigma > 0.0) z += noise(*rng);
      index[static_cast<std::size_t>(r) * cols + c] = static_cast<std::uint32_t>(verts.size());
      verts.emplace_back(x, y, z);
      const bool hole = eye_holes && in_eye_hole(p, x, y);
      any_hole |= hole;
      valid.push_back(hole ? 0 : 1);
    }
  }
  std::vector<Face> faces;
  auto usable = [&](std::uint32_t i) { return i != kNone && valid[i]; };
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const auto a = index[static_cast<std::size_t>(r) * cols + c];
      const auto b = index[static_cast<std::size_t>(r) * cols + c + 1];
      const auto d = index[static_cast<std::size_t>(r + 1) * cols + c];
      const auto f = index[static_cast<std::size_t>(r + 1) * cols + c + 1];
      // Counter-clockwise seen from +z.
      if (usable(a) && usable(b) && usable(f)) faces.push_back({a, b, f});
      if (usable(a) && usable(f) && usable(d)) faces.push_back({a, f, d});
    }
  }
  if (!any_hole) valid.clear();
  return TriMesh(std::move(verts), std::move(faces), std::move(valid));
}

struct SampleState {
  SubjectParams params;
  Expression expression;
  RigidTransform pose;
  std::mt19937_64 rng;
};

SampleState sample_state(const PopulationConfig& cfg, int subject, int sample) {
  if (subject < 0 || subject >= cfg.n_subjects || sample < 0 || sample >= cfg.samples_per_subject) {
    throw Error(ErrorCode::UnknownId, "no sample (" + std::to_string(subject) + ", " + std::to_string(sample) + ")");
  }
  SampleState s{subject_params(cfg.seed, subject), {}, {},
                std::mt19937_64(derive_seed(cfg.seed, static_cast<std::uint64_t>(subject), 1000u + sample))};
  s.expression = sample_expression(cfg, subject, sample, s.rng);
  s.pose = sample_pose(cfg.noise, s.rng);
  return s;
}

}  // namespace

TriMesh canonical_face_mesh(const SubjectParams& p, const Expression& e, bool eye_holes, double spacing_mm) {
  return build_face_mesh(p, e, eye_holes, spacing_mm, 0.0, nullptr);
}

GroundTruth ground_truth(const PopulationConfig& cfg, int subject, int sample) {
  auto s = sample_state(cfg, subject, sample);
  return {s.pose.apply(canonical_nose_tip(s.params, s.expression)), s.pose};
}

FaceSample generate_sample(const PopulationConfig& cfg, int subject, int sample) {
  auto s = sample_state(cfg, subject, sample);
  TriMesh canonical = build_face_mesh(s.params, s.expression, cfg.noise.eye_holes, cfg.mesh_spacing_mm,
                                      cfg.noise.sigma_mm, &s.rng);
  FaceSample out;
  out.subject = subject;
  out.sample = sample;
  out.mesh = apply_transform(canonical, s.pose);
  out.truth = {s.pose.apply(canonical_nose_tip(s.params, s.expression)), s.pose};
  return out;
}

std::vector<FaceSample> generate_population(const PopulationConfig& cfg) {
  cfg.validate();
  std::vector<FaceSample> out;
  out.reserve(static_cast<std::size_t>(cfg.n_subjects) * cfg.samples_per_subject);
  for (int s = 0; s < cfg.n_subjects; ++s)
    for (int k = 0; k < cfg.samples_per_subject; ++k) out.push_back(generate_sample(cfg, s, k));
  return out;
}

}  // namespace morph3d
