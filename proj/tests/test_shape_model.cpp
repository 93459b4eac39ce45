#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "morph3d/error.hpp"
#include "morph3d/registration.hpp"
#include "morph3d/shape_model.hpp"
#include "morph3d/synth.hpp"

using namespace morph3d;

namespace {

const GridSpec kSmall{12, 10, -9.0, -7.5, 1.5, 1.5};

std::vector<DepthMap> random_faces(std::mt19937_64& rng, int n, const GridSpec& g = kSmall) {
  std::normal_distribution<double> z(0.0, 5.0);
  std::vector<DepthMap> out;
  for (int i = 0; i < n; ++i) {
    DepthMap d(g);
    for (std::size_t c = 0; c < d.size(); ++c) d.set(c, z(rng));
    out.push_back(d);
  }
  return out;
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

double rms_on_support(const ShapeModel& m, const DepthMap& a, const DepthMap& b) {
  double ss = 0.0;
  for (auto i : m.support()) ss += (a.at(i) - b.at(i)) * (a.at(i) - b.at(i));
  return std::sqrt(ss / static_cast<double>(m.support().size()));
}

}  // namespace

TEST_CASE("identical faces have no variance") {
  std::mt19937_64 rng(1);
  const auto f = random_faces(rng, 1);
  CHECK(code_of([&] { build_model({f[0], f[0]}, 1); }) == ErrorCode::InsufficientData);
  CHECK(code_of([&] { build_model({f[0]}, 1); }) == ErrorCode::InsufficientData);
}

TEST_CASE("two faces mean +- u give one component along u") {
  std::mt19937_64 rng(2);
  const auto base = random_faces(rng, 2);
  DepthMap a(kSmall), b(kSmall);
  Eigen::VectorXd u(base[0].size());
  for (std::size_t i = 0; i < base[0].size(); ++i) {
    u[static_cast<Eigen::Index>(i)] = base[1].at(i);
    a.set(i, base[0].at(i) + base[1].at(i));
    b.set(i, base[0].at(i) - base[1].at(i));
  }
  const ShapeModel m = build_model({a, b}, 1);
  REQUIRE(m.k() == 1);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(m.mean().at(i) - base[0].at(i)) < 1e-12);
  const Eigen::VectorXd c = m.basis().col(0);
  CHECK(std::abs(std::abs(c.dot(u.normalized())) - 1.0) < 1e-9);
  CHECK(m.sigmas()[0] > 0.0);
}

TEST_CASE("grid mismatch and bad k") {
  std::mt19937_64 rng(3);
  auto faces = random_faces(rng, 3);
  faces.push_back(DepthMap(GridSpec{}));
  CHECK(code_of([&] { build_model(faces, 1); }) == ErrorCode::GridMismatch);
  faces.pop_back();
  CHECK(code_of([&] { build_model(faces, 3); }) == ErrorCode::InsufficientData);
  CHECK(code_of([&] { build_model(faces, 0); }) == ErrorCode::InsufficientData);
  const ShapeModel m = build_model(faces, 2);
  CHECK(code_of([&] { fit_coefficients(m, DepthMap(GridSpec{})); }) == ErrorCode::GridMismatch);
  CHECK(code_of([&] { reconstruct(m, Eigen::VectorXd::Zero(3)); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("model invariants over random models") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + trial % 8;
    const auto faces = random_faces(rng, n);
    const ShapeModel m = build_model(faces, n - 1);
    const Eigen::MatrixXd gram = m.basis().transpose() * m.basis();
    CHECK((gram - Eigen::MatrixXd::Identity(m.k(), m.k())).cwiseAbs().maxCoeff() < 1e-9);
    for (int i = 0; i < m.k(); ++i) {
      CHECK(m.sigmas()[i] > 0.0);
      if (i > 0) CHECK(m.sigmas()[i] <= m.sigmas()[i - 1]);
      // sign convention
      const Eigen::VectorXd col = m.basis().col(i);
      for (Eigen::Index r = 0; r < col.size(); ++r)
        if (std::abs(col[r]) > 1e-12) {
          CHECK(col[r] > 0.0);
          break;
        }
    }
    const auto ev = m.explained_variance_ratio();
    for (std::size_t i = 1; i < ev.size(); ++i) CHECK(ev[i] <= ev[i - 1]);
  }
}

TEST_CASE("fit of the mean and of a scaled component") {
  std::mt19937_64 rng(5);
  const ShapeModel m = build_model(random_faces(rng, 6), 4);
  CHECK(fit_coefficients(m, m.mean()).cwiseAbs().maxCoeff() < 1e-9);
  DepthMap f = m.mean();
  const DepthMap c1 = m.component(0);
  for (auto i : m.support()) f.set(i, m.mean().at(i) + 2.0 * m.sigmas()[0] * c1.at(i));
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(4);
  expect[0] = 2.0;
  CHECK((fit_coefficients(m, f) - expect).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(rms_on_support(m, reconstruct(m, Eigen::VectorXd::Zero(4)), m.mean()) == 0.0);
}

TEST_CASE("full-rank model reproduces its training faces") {
  std::mt19937_64 rng(6);
  const auto faces = random_faces(rng, 7);
  const ShapeModel m = build_model(faces, 6);
  for (const auto& f : faces) CHECK(rms_on_support(m, reconstruct(m, fit_coefficients(m, f)), f) <= 1e-6);
}

TEST_CASE("projector idempotence and linearity") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    const ShapeModel m = build_model(random_faces(rng, 8), 5);
    Eigen::VectorXd a(5), b(5);
    for (int i = 0; i < 5; ++i) {
      a[i] = 3.0 * n01(rng);
      b[i] = 3.0 * n01(rng);
    }
    CHECK((fit_coefficients(m, reconstruct(m, a)) - a).cwiseAbs().maxCoeff() < 1e-9);
    const DepthMap ra = reconstruct(m, a), rb = reconstruct(m, b), rab = reconstruct(m, a + b);
    for (auto i : m.support()) CHECK(std::abs(ra.at(i) + rb.at(i) - m.mean().at(i) - rab.at(i)) < 1e-9);
    // fit(face) then reconstruct twice is stable
    const DepthMap once = reconstruct(m, fit_coefficients(m, random_faces(rng, 1)[0]));
    CHECK(rms_on_support(m, reconstruct(m, fit_coefficients(m, once)), once) < 1e-9);
  }
}

TEST_CASE("training holes shrink the support; probe holes are skipped") {
  std::mt19937_64 rng(8);
  auto faces = random_faces(rng, 5);
  faces[1].set_hole(3);
  faces[4].set_hole(17);
  const ShapeModel m = build_model(faces, 3);
  CHECK(m.support().size() == kSmall.cell_count() - 2);
  const DepthMap r = reconstruct(m, Eigen::VectorXd::Ones(3));
  CHECK(r.is_hole(3));
  CHECK(r.is_hole(17));
  CHECK(r.valid_count() == m.support().size());

  // an in-span face with a few cells missing still fits exactly
  Eigen::VectorXd c(3);
  c << 0.5, -1.0, 2.0;
  DepthMap probe = reconstruct(m, c);
  probe.set_hole(40);
  probe.set_hole(41);
  CHECK((fit_coefficients(m, probe) - c).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("save and load round trip") {
  std::mt19937_64 rng(9);
  const ShapeModel m = build_model(random_faces(rng, 5), 3);
  std::stringstream ss;
  m.save(ss);
  const ShapeModel r = ShapeModel::load(ss);
  CHECK(r.grid() == m.grid());
  CHECK(r.support() == m.support());
  CHECK(r.sigmas() == m.sigmas());
  CHECK((r.basis() - m.basis()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.training_count() == m.training_count());
  std::stringstream bad("{\"format\": \"something\"}");
  CHECK_THROWS_AS(ShapeModel::load(bad), Error);
}

TEST_CASE("seed-7 population: more components reconstruct better") {
  PopulationConfig cfg;
  cfg.n_subjects = 40;
  cfg.samples_per_subject = 1;
  std::vector<DepthMap> faces;
  for (int s = 0; s < 40; ++s) faces.push_back(register_and_rasterize(generate_sample(cfg, s, 0).mesh));
  const ShapeModel m5 = build_model(faces, 5), m20 = build_model(faces, 20);
  double e5 = 0.0, e20 = 0.0;
  for (const auto& f : faces) {
    e5 += rms_on_support(m5, reconstruct(m5, fit_coefficients(m5, f)), f);
    e20 += rms_on_support(m20, reconstruct(m20, fit_coefficients(m20, f)), f);
  }
  MESSAGE("mean training RMS k=5 " << e5 / 40 << " k=20 " << e20 / 40);
  CHECK(e20 <= e5);
  CHECK(m20.support().size() > 3000);
}
