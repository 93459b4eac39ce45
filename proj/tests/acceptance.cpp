// Acceptance suite. Prints one PASS/FAIL line per criterion; exit status is
// non-zero when any criterion fails. Pass criterion numbers to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "morph3d/error.hpp"
#include "morph3d/experiment.hpp"
#include "morph3d/metrics.hpp"
#include "morph3d/morphgen.hpp"
#include "morph3d/registration.hpp"
#include "morph3d/shape_model.hpp"
#include "morph3d/synth.hpp"

using namespace morph3d;
namespace fs = std::filesystem;

namespace {

// Tolerances, pinned.
constexpr double kRmmrTol = 0.0005;
constexpr double kRigidRmsMm = 1.5;
constexpr double kTipOriginMm = 1e-6;
constexpr double kCoefficientEndpointTol = 1e-9;
constexpr double kFmrTarget = 0.001;
constexpr double kMaxFnmr = 0.20;
constexpr double kProjectorTol = 1e-9;
constexpr double kSocketStepMm = 3.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Shared across criteria so the seed-7 population is registered once.
ExperimentCache& cache() {
  static ExperimentCache c;
  return c;
}

PopulationConfig seed7(const std::string& noise = "default") {
  PopulationConfig p;
  p.seed = 7;
  p.n_subjects = 40;
  p.samples_per_subject = 3;
  p.noise = NoiseProfile::named(noise);
  return p;
}

const ExperimentResult& preset_run(const std::string& name) {
  static std::map<std::string, ExperimentResult> runs;
  auto it = runs.find(name);
  if (it == runs.end()) it = runs.emplace(name, run_experiment(preset(name), "", &cache())).first;
  return it->second;
}

// ---------------------------------------------------------------------------

Outcome c1_rmmr_identity() {
  struct Row {
    int exp;
    const char* classifier;
    double mmpmr, fnmr, rmmr;  // percent
  };
  const Row rows[] = {
      {1, "distance", 16.2, 24.76, 26.39},  {1, "likelihood", 98.23, 75.09, 123.14},
      {2, "distance", 13.48, 2.59, 16.07},  {2, "likelihood", 1.64, 1.8, 3.44},
      {3, "distance", 0.0, 35.25, 35.25},   {3, "likelihood", 0.41, 27.8, 28.17},
      {4, "distance", 2.14, 2.7, 4.79},     {4, "likelihood", 0.0, 1.48, 1.47},
      {5, "distance", 8.6, 3.64, 12.24},    {5, "likelihood", 39.97, 1.8, 41.76},
  };
  int bad = 0;
  std::string off;
  for (const auto& r : rows) {
    const double got = rmmr(r.mmpmr / 100.0, r.fnmr / 100.0);
    const double diff = std::abs(got - r.rmmr / 100.0);
    if (diff > kRmmrTol + 1e-12) {
      ++bad;
      off += fmt(" exp%d/%s %.4f vs %.4f;", r.exp, r.classifier, got, r.rmmr / 100.0);
    }
  }
  return {bad == 0, fmt("%d/10 rows within %.4f", 10 - bad, kRmmrTol) + (bad ? " | off:" + off : "")};
}

// Brute-force counting oracle, written directly from the match rule.
bool oracle_match(double s, double tau, Polarity p) { return p == Polarity::Similarity ? s >= tau : s < tau; }

Outcome c2_metric_oracle() {
  std::mt19937_64 rng(2024);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const Polarity p = t % 2 ? Polarity::Distance : Polarity::Similarity;
    const bool integer = uni(0, 1) == 1;  // integer scores force ties with tau
    auto draw = [&] { return integer ? static_cast<double>(uni(0, 60)) : std::uniform_real_distribution<double>(0, 2)(rng); };
    std::vector<double> gen(static_cast<std::size_t>(uni(1, 500))), imp(static_cast<std::size_t>(uni(1, 500)));
    for (auto& s : gen) s = draw();
    for (auto& s : imp) s = draw();
    std::vector<MorphTrial> morphs(static_cast<std::size_t>(uni(1, 50)));
    for (auto& m : morphs)
      for (auto& side : m.mated_scores) {
        side.resize(static_cast<std::size_t>(uni(1, 5)));
        for (auto& s : side) s = draw();
      }
    const double tau = uni(0, 1) ? draw() : imp[static_cast<std::size_t>(uni(0, static_cast<int>(imp.size()) - 1))];

    std::size_t fm = 0, fnm = 0, mm = 0;
    for (double s : imp) fm += oracle_match(s, tau, p);
    for (double s : gen) fnm += !oracle_match(s, tau, p);
    for (const auto& m : morphs) {
      bool both = true;
      for (const auto& side : m.mated_scores)
        both = both && std::any_of(side.begin(), side.end(), [&](double s) { return oracle_match(s, tau, p); });
      mm += both;
    }
    const double ofmr = static_cast<double>(fm) / static_cast<double>(imp.size());
    const double ofnmr = static_cast<double>(fnm) / static_cast<double>(gen.size());
    const double ommpmr = static_cast<double>(mm) / static_cast<double>(morphs.size());
    if (fmr(imp, tau, p) != ofmr || fnmr(gen, tau, p) != ofnmr || mmpmr(morphs, tau, p) != ommpmr) ++mismatches;
  }
  return {mismatches == 0, fmt("%d/1000 trial sets differ from the oracle", mismatches)};
}

Outcome c3_rigid_invariance() {
  PopulationConfig pop = seed7();
  pop.n_subjects = 50;
  pop.samples_per_subject = 1;
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> ang(-25.0, 25.0), mm(-25.0, 25.0);
  double worst_rms = 0.0, worst_tip = 0.0;
  for (int s = 0; s < 50; ++s) {
    const TriMesh mesh = generate_sample(pop, s, 0).mesh;
    const RigidTransform T = RigidTransform::from_euler_deg(ang(rng), ang(rng), ang(rng), Vec3(mm(rng), mm(rng), mm(rng)));
    IntrinsicRegistration r0, r1;
    const DepthMap d0 = register_and_rasterize(mesh, {}, {}, &r0);
    const DepthMap d1 = register_and_rasterize(apply_transform(mesh, T), {}, {}, &r1);
    const auto rms = rms_difference(d0, d1);
    if (!rms) return {false, fmt("face %d: no overlapping cells", s)};
    worst_rms = std::max(worst_rms, *rms);
    worst_tip = std::max({worst_tip, r0.transform.apply(r0.nose_tip).norm(), r1.transform.apply(r1.nose_tip).norm()});
  }
  return {worst_rms <= kRigidRmsMm && worst_tip <= kTipOriginMm,
          fmt("worst RMS %.3f mm (limit %.1f), worst tip offset %.2e mm", worst_rms, kRigidRmsMm, worst_tip)};
}

Outcome c4_endpoint_identity() {
  const PopulationConfig pop = seed7();
  std::vector<DepthMap> faces;
  for (int s = 0; s < 40; ++s) faces.push_back(cache().depth(pop, s, 0));
  const ShapeModel model = build_model(faces, 20);
  std::mt19937_64 rng(44);
  std::uniform_int_distribution<int> subj(0, 39), smp(0, 2);
  int depth_bad = 0;
  double coef_err = 0.0;
  for (int t = 0; t < 200; ++t) {
    const DepthMap& a = cache().depth(pop, subj(rng), smp(rng));
    const DepthMap& b = cache().depth(pop, subj(rng), smp(rng));
    MorphSpec spec;
    spec.hole_policy = t % 2 ? HolePolicy::Union : HolePolicy::IntersectFill;
    for (double alpha : {1.0, 0.0}) {
      spec.alpha = alpha;
      const DepthMap m = depth_average(a, b, spec);
      const DepthMap& want = alpha == 1.0 ? a : b;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m.is_hole(i) != want.is_hole(i) || (!m.is_hole(i) && m.at(i) != want.at(i))) {
          ++depth_bad;
          break;
        }
      }
    }
    spec.method = MorphMethod::CoefficientAverage;
    spec.alpha = 1.0;
    const DepthMap cm = coefficient_average(model, a, b, spec).depth;
    const DepthMap proj = reconstruct(model, fit_coefficients(model, a));
    for (std::size_t i = 0; i < cm.size(); ++i) {
      if (cm.is_hole(i) != proj.is_hole(i)) coef_err = INFINITY;
      else if (!cm.is_hole(i)) coef_err = std::max(coef_err, std::abs(cm.at(i) - proj.at(i)));
    }
  }
  return {depth_bad == 0 && coef_err <= kCoefficientEndpointTol,
          fmt("depth endpoint mismatches %d/400, coefficient endpoint max error %.2e", depth_bad, coef_err)};
}

// Next candidate threshold that accepts more impostors than tau does.
double next_less_strict(const std::vector<double>& imp, double tau, Polarity p) {
  if (p == Polarity::Similarity) {
    double best = -INFINITY;
    for (double s : imp)
      if (s < tau) best = std::max(best, s);
    return best;
  }
  double best = INFINITY;
  for (double s : imp)
    if (s >= tau) best = std::min(best, s);
  return std::nextafter(best, INFINITY);
}

Outcome c5_calibration() {
  const ExperimentResult& r = preset_run("exp2_random");
  const auto sets = assemble_trials(r.scores, r.manifest);
  bool ok = true;
  std::string detail;
  for (const auto& [name, ts] : sets) {
    const double tau = calibrate_threshold(ts.genuine, ts.impostor, kFmrTarget, ts.polarity);
    const double f = fmr(ts.impostor, tau, ts.polarity);
    const double looser = next_less_strict(ts.impostor, tau, ts.polarity);
    const double f2 = std::isfinite(looser) ? fmr(ts.impostor, looser, ts.polarity) : 1.0;
    const double fn = fnmr(ts.genuine, tau, ts.polarity);
    ok = ok && f <= kFmrTarget && f2 > kFmrTarget && fn <= kMaxFnmr;
    detail += fmt("%s tau %.6g FMR %.4f next %.4f FNMR %.4f (n_imp %zu); ", name.c_str(), tau, f, f2, fn, ts.impostor.size());
  }
  return {ok && sets.size() == 2, detail};
}

Outcome c6_vulnerability_trend() {
  auto mmpmr_of = [](const ExperimentResult& r) {
    for (const auto& rep : r.reports)
      if (rep.matcher == LikelihoodMatcher::kName) return rep.mmpmr;
    throw Error(ErrorCode::UnknownId, "no likelihood report");
  };
  const double random_pairs = mmpmr_of(preset_run("exp2_random"));
  const ExperimentResult& look = preset_run("exp5_lookalike");
  const double lookalike = mmpmr_of(look);
  return {lookalike >= random_pairs && lookalike > 0.0,
          fmt("MMPMR look-alike %.4f (%zu pairs) vs random %.4f", lookalike, look.selection.pairs.size(), random_pairs)};
}

Outcome c7_projector() {
  std::mt19937_64 rng(77);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::normal_distribution<double> n(0.0, 1.0);
  double idem = 0.0, lin = 0.0;
  int mono_bad = 0;
  for (int t = 0; t < 100; ++t) {
    const GridSpec g{uni(4, 14), uni(4, 14), -10.0, -10.0, 1.5, 1.5};
    const int nf = uni(3, 25);
    std::vector<DepthMap> faces;
    for (int f = 0; f < nf; ++f) {
      DepthMap d(g);
      const double scale = 1.0 + 4.0 * f / nf;  // uneven spread per face
      for (std::size_t i = 0; i < d.size(); ++i) d.set(i, scale * n(rng));
      faces.push_back(std::move(d));
    }
    const int k = uni(1, std::min<int>(nf - 1, static_cast<int>(g.width * g.height)));
    const ShapeModel m = build_model(faces, k);
    for (int rep = 0; rep < 5; ++rep) {
      CoefficientVector c(k);
      for (int i = 0; i < k; ++i) c[i] = 3.0 * n(rng);
      idem = std::max(idem, (fit_coefficients(m, reconstruct(m, c)) - c).cwiseAbs().maxCoeff());
      // fit is affine: fit(a + b - mean) = fit(a) + fit(b)
      const DepthMap& a = faces[static_cast<std::size_t>(uni(0, nf - 1))];
      const DepthMap& b = faces[static_cast<std::size_t>(uni(0, nf - 1))];
      DepthMap s(g);
      for (std::size_t i = 0; i < s.size(); ++i) s.set(i, a.at(i) + b.at(i) - m.mean().at(i));
      lin = std::max(lin, (fit_coefficients(m, s) - fit_coefficients(m, a) - fit_coefficients(m, b)).cwiseAbs().maxCoeff());
    }
    const auto ev = m.explained_variance_ratio();
    double cum = 0.0;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      if (ev[i] < 0.0 || (i > 0 && ev[i] > ev[i - 1])) ++mono_bad;
      cum += ev[i];
    }
    if (cum > 1.0 + 1e-12) ++mono_bad;
  }
  return {idem <= kProjectorTol && lin <= kProjectorTol && mono_bad == 0,
          fmt("idempotence %.2e, linearity %.2e, variance-order violations %d", idem, lin, mono_bad)};
}

Outcome c8_hole_policy() {
  PopulationConfig pop = seed7("controlled");
  const DepthMap a = cache().depth(pop, 0, 0);
  pop.noise.eye_holes = false;
  const DepthMap b = cache().depth(pop, 1, 0);
  MorphSpec spec;
  spec.hole_policy = HolePolicy::IntersectFill;
  const DepthMap fill = depth_average(a, b, spec);
  spec.hole_policy = HolePolicy::Union;
  const DepthMap uni = depth_average(a, b, spec);

  const GridSpec& g = a.grid();
  double fill_step = 0.0, union_step = 0.0;
  std::size_t socket = 0, socket_hole = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.is_hole(i) && !b.is_hole(i)) {
      ++socket;
      socket_hole += uni.is_hole(i);
    }
  }
  // Steps across the socket boundary: a 4-neighbour pair where one cell is a
  // socket cell of a and the other is valid in both inputs.
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c)
      for (auto [dc, dr] : {std::pair{1, 0}, std::pair{0, 1}}) {
        if (c + dc >= g.width || r + dr >= g.height) continue;
        const std::size_t i = g.index(c, r), j = g.index(c + dc, r + dr);
        if (b.is_hole(i) || b.is_hole(j) || a.is_hole(i) == a.is_hole(j)) continue;
        fill_step = std::max(fill_step, std::abs(fill.at(i) - fill.at(j)));
        if (!uni.is_hole(i) && !uni.is_hole(j)) union_step = std::max(union_step, std::abs(uni.at(i) - uni.at(j)));
      }
  const bool ok = socket > 0 && fill_step > kSocketStepMm && socket_hole == socket && union_step == 0.0;
  return {ok, fmt("intersect_fill boundary step %.2f mm; union leaves %zu/%zu socket cells as HOLE", fill_step, socket_hole,
                  socket)};
}

Outcome c9_determinism() {
  const std::string name = "exp4_depth_random";
  const fs::path root = fs::temp_directory_path() / "morph3d_acceptance";
  fs::remove_all(root);
  const ExperimentResult first = run_experiment(preset(name), (root / "a").string(), &cache());
  ExperimentCache fresh;
  const ExperimentResult second = run_experiment(preset(name), (root / "b").string(), &fresh);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string ra = slurp(root / "a" / "report.json"), rb = slurp(root / "b" / "report.json");
  const bool ok = !ra.empty() && ra == rb && first.report_json == second.report_json;
  fs::remove_all(root);
  return {ok, fmt("%s report.json %zu bytes, %s across a shared-cache and a fresh-cache run", name.c_str(), ra.size(),
                  ok ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"rmmr identity on reference rows", c1_rmmr_identity},
      {"metric oracle equivalence", c2_metric_oracle},
      {"registration rigid invariance", c3_rigid_invariance},
      {"morph endpoint identity", c4_endpoint_identity},
      {"threshold calibration contract", c5_calibration},
      {"look-alike vulnerability trend", c6_vulnerability_trend},
      {"shape-model projector properties", c7_projector},
      {"hole-policy artefact", c8_hole_policy},
      {"report determinism", c9_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t n = 0; n < criteria.size(); ++n) {
    const int id = static_cast<int>(n) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[n].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s C%d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[n].first, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
