#include <cmath>
#include <random>

#include "doctest.h"
#include "morph3d/error.hpp"
#include "morph3d/morphgen.hpp"
#include "morph3d/registration.hpp"
#include "morph3d/shape_model.hpp"
#include "morph3d/synth.hpp"

using namespace morph3d;

namespace {

const GridSpec kSmall{10, 8, -7.5, -6.0, 1.5, 1.5};

DepthMap random_map(std::mt19937_64& rng, double hole_fraction, const GridSpec& g = kSmall) {
  std::uniform_real_distribution<double> z(-20.0, 20.0), u(0.0, 1.0);
  DepthMap d(g);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (u(rng) < hole_fraction) d.set_hole(i);
    else d.set(i, z(rng));
  }
  return d;
}

MorphSpec depth_spec(double alpha, HolePolicy hp = HolePolicy::Union) {
  MorphSpec s;
  s.method = MorphMethod::DepthAverage;
  s.alpha = alpha;
  s.hole_policy = hp;
  return s;
}

bool same_cells(const DepthMap& a, const DepthMap& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.is_hole(i) != b.is_hole(i)) return false;
    if (!a.is_hole(i) && a.at(i) != b.at(i)) return false;
  }
  return true;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no exception");
  return ErrorCode::UsageError;
}

}  // namespace

TEST_CASE("depth average arithmetic and hole policies") {
  GridSpec g{2, 1, -1.5, 0.0, 1.5, 1.5};
  DepthMap a(g, {4.0, 7.0}), b(g, {6.0, DepthMap::kHole});
  const DepthMap u = depth_average(a, b, depth_spec(0.5));
  CHECK(u.at(0) == 5.0);
  CHECK(u.is_hole(1));
  const DepthMap f = depth_average(a, b, depth_spec(0.5, HolePolicy::IntersectFill));
  CHECK(f.at(0) == 5.0);
  CHECK(f.at(1) == 7.0);
  const DepthMap f2 = depth_average(b, a, depth_spec(0.5, HolePolicy::IntersectFill));
  CHECK(f2.at(1) == 7.0);
}

TEST_CASE("depth average properties on random pairs") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const DepthMap a = random_map(rng, 0.1), b = random_map(rng, 0.1);
    const HolePolicy hp = trial % 2 ? HolePolicy::Union : HolePolicy::IntersectFill;
    // endpoints hand back an input verbatim, holes included
    CHECK(same_cells(depth_average(a, b, depth_spec(1.0, hp)), a));
    CHECK(same_cells(depth_average(a, b, depth_spec(0.0, hp)), b));
    const double alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const DepthMap ab = depth_average(a, b, depth_spec(alpha, hp)), ba = depth_average(b, a, depth_spec(1.0 - alpha, hp));
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(ab.is_hole(i) == ba.is_hole(i));
      if (ab.is_hole(i)) continue;
      CHECK(std::abs(ab.at(i) - ba.at(i)) <= 1e-12);
      if (!a.is_hole(i) && !b.is_hole(i)) {
        CHECK(ab.at(i) >= std::min(a.at(i), b.at(i)) - 1e-12);
        CHECK(ab.at(i) <= std::max(a.at(i), b.at(i)) + 1e-12);
      }
    }
  }
}

TEST_CASE("depth endpoints are exact on hole-free and shared-hole inputs") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    DepthMap a = random_map(rng, 0.0), b = random_map(rng, 0.0);
    for (std::size_t i = 0; i < a.size(); i += 7) {
      a.set_hole(i);
      b.set_hole(i);
    }
    for (auto hp : {HolePolicy::Union, HolePolicy::IntersectFill}) {
      CHECK(same_cells(depth_average(a, b, depth_spec(1.0, hp)), a));
      CHECK(same_cells(depth_average(a, b, depth_spec(0.0, hp)), b));
    }
  }
}

TEST_CASE("spec validation and grid checks") {
  CHECK(code_of([] { depth_spec(1.5).validate(); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { depth_spec(-0.1).validate(); }) == ErrorCode::InvalidConfig);
  std::mt19937_64 rng(3);
  const DepthMap a = random_map(rng, 0.0), other = random_map(rng, 0.0, GridSpec{});
  CHECK(code_of([&] { depth_average(a, other, depth_spec(0.5)); }) == ErrorCode::GridMismatch);
  MorphSpec wrong = depth_spec(0.5);
  wrong.method = MorphMethod::CoefficientAverage;
  CHECK(code_of([&] { depth_average(a, a, wrong); }) == ErrorCode::InvalidConfig);
  CHECK(morph_method_from_string(to_string(MorphMethod::CoefficientAverage)) == MorphMethod::CoefficientAverage);
  CHECK(hole_policy_from_string(to_string(HolePolicy::IntersectFill)) == HolePolicy::IntersectFill);
  CHECK_THROWS_AS(hole_policy_from_string("fill_everything"), Error);
}

TEST_CASE("coefficient average") {
  std::mt19937_64 rng(4);
  std::vector<DepthMap> faces;
  for (int i = 0; i < 8; ++i) faces.push_back(random_map(rng, 0.0));
  const ShapeModel m = build_model(faces, 5);
  MorphSpec spec;
  spec.method = MorphMethod::CoefficientAverage;
  for (int trial = 0; trial < 200; ++trial) {
    const DepthMap& a = faces[trial % 8];
    const DepthMap& b = faces[(trial * 3 + 1) % 8];
    spec.alpha = 1.0;
    const auto one = coefficient_average(m, a, b, spec);
    const DepthMap proj = reconstruct(m, fit_coefficients(m, a));
    for (auto i : m.support()) CHECK(std::abs(one.depth.at(i) - proj.at(i)) <= 1e-9);

    spec.alpha = 0.5;
    const auto half = coefficient_average(m, a, b, spec);
    const Eigen::VectorXd mid = 0.5 * (fit_coefficients(m, a) + fit_coefficients(m, b));
    CHECK((half.coefficients - mid).cwiseAbs().maxCoeff() <= 1e-12);

    spec.alpha = std::uniform_real_distribution<double>(0, 1)(rng);
    const auto same = coefficient_average(m, a, a, spec);
    for (auto i : m.support()) CHECK(std::abs(same.depth.at(i) - proj.at(i)) <= 1e-9);
  }
  // affine in alpha
  std::vector<Eigen::VectorXd> cs;
  for (double al : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    spec.alpha = al;
    cs.push_back(coefficient_average(m, faces[0], faces[1], spec).coefficients);
  }
  for (std::size_t i = 1; i + 1 < cs.size(); ++i) CHECK((cs[i] - 0.5 * (cs[i - 1] + cs[i + 1])).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(code_of([&] { coefficient_average(m, faces[0], faces[1], depth_spec(0.5)); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("morph_to_mesh triangulation") {
  GridSpec g{3, 3, -2.25, -2.25, 1.5, 1.5};
  DepthMap d(g);
  CHECK(code_of([&] { morph_to_mesh(d); }) == ErrorCode::DegenerateSurface);
  d.set(0, 0, 1.0);
  d.set(1, 0, 2.0);
  d.set(0, 1, 3.0);
  d.set(1, 1, 4.0);
  const TriMesh two = morph_to_mesh(d);
  CHECK(two.face_count() == 2);
  CHECK(two.vertex_count() == 4);
  d.set_hole(d.grid().index(1, 1));
  CHECK(morph_to_mesh(d).face_count() == 1);
  d.set_hole(d.grid().index(1, 0));
  CHECK(code_of([&] { morph_to_mesh(d); }) == ErrorCode::DegenerateSurface);
}

TEST_CASE("mesh round trip through the rasterizer") {
  PopulationConfig cfg;
  cfg.n_subjects = 2;
  cfg.samples_per_subject = 1;
  const DepthMap d = register_and_rasterize(generate_sample(cfg, 1, 0).mesh);
  const DepthMap back = rasterize(morph_to_mesh(d), RigidTransform::identity());
  std::size_t checked = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.is_hole(i) || back.is_hole(i)) continue;
    CHECK(std::abs(back.at(i) - d.at(i)) <= 1e-6);
    ++checked;
  }
  CHECK(checked >= 0.95 * static_cast<double>(d.valid_count()));
}

TEST_CASE("intersect-fill leaves a step at the eye socket, union leaves a hole") {
  PopulationConfig cfg;
  cfg.n_subjects = 2;
  cfg.samples_per_subject = 1;
  cfg.noise = NoiseProfile::named("controlled");
  DepthMap a = register_and_rasterize(generate_sample(cfg, 0, 0).mesh);
  cfg.noise.eye_holes = false;
  const DepthMap b = register_and_rasterize(generate_sample(cfg, 1, 0).mesh);
  const DepthMap fill = depth_average(a, b, depth_spec(0.5, HolePolicy::IntersectFill));
  const DepthMap uni = depth_average(a, b, depth_spec(0.5, HolePolicy::Union));
  // largest jump between 4-neighbours where one side came from a hole in a
  double step = 0.0;
  std::size_t socket_cells = 0;
  const auto& g = a.grid();
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c + 1 < g.width; ++c) {
      const auto i = g.index(c, r), j = g.index(c + 1, r);
      if (a.is_hole(i) == a.is_hole(j) || b.is_hole(i) || b.is_hole(j)) continue;
      step = std::max(step, std::abs(fill.at(i) - fill.at(j)));
      CHECK((uni.is_hole(i) || uni.is_hole(j)));
    }
  for (std::size_t i = 0; i < a.size(); ++i) socket_cells += a.is_hole(i) && !b.is_hole(i) && uni.is_hole(i);
  CHECK(step > 3.0);
  CHECK(socket_cells > 20);
}
