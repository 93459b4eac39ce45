// morph3d command-line front end.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "morph3d/depth_map.hpp"
#include "morph3d/error.hpp"
#include "morph3d/experiment.hpp"
#include "morph3d/matchers.hpp"
#include "morph3d/mesh_io.hpp"
#include "morph3d/metrics.hpp"
#include "morph3d/morphgen.hpp"
#include "morph3d/registration.hpp"
#include "morph3d/shape_model.hpp"
#include "morph3d/synth.hpp"

using namespace morph3d;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

bool has_ext(const std::string& path, const char* ext) {
  std::string e = fs::path(path).extension().string();
  for (auto& ch : e) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return e == ext;
}

// Depth-map CSVs are taken as already registered; meshes are registered.
DepthMap load_depth(const std::string& path) {
  if (has_ext(path, ".csv")) return read_depth_csv(path);
  return register_and_rasterize(read_mesh(path));
}

ojson vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

ojson transform_json(const RigidTransform& t) {
  ojson r = ojson::array();
  for (int i = 0; i < 3; ++i) r.push_back({t.rotation()(i, 0), t.rotation()(i, 1), t.rotation()(i, 2)});
  return {{"rotation", r}, {"translation", vec_json(t.translation())}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

void write_surface(const DepthMap& d, const std::string& path) {
  if (has_ext(path, ".csv")) write_depth_csv(d, path);
  else write_mesh(morph_to_mesh(d), path, format_from_path(path));
}

struct SynthArgs {
  std::uint64_t seed = 7;
  int subjects = 40, samples = 3;
  std::string noise = "default", out;
  bool ascii = false;
};

void cmd_synth(const SynthArgs& a) {
  PopulationConfig cfg;
  cfg.seed = a.seed;
  cfg.n_subjects = a.subjects;
  cfg.samples_per_subject = a.samples;
  cfg.noise = NoiseProfile::named(a.noise);
  cfg.validate();
  fs::create_directories(a.out);
  ojson truth = ojson::array();
  for (int s = 0; s < a.subjects; ++s)
    for (int k = 0; k < a.samples; ++k) {
      const FaceSample f = generate_sample(cfg, s, k);
      const std::string id = sample_id(s, k);
      write_mesh(f.mesh, (fs::path(a.out) / (id + ".ply")).string(), MeshFormat::Ply,
                 a.ascii ? PlyEncoding::Ascii : PlyEncoding::BinaryLittleEndian);
      truth.push_back({{"id", id}, {"subject", subject_id(s)}, {"sample", k}, {"nose_tip", vec_json(f.truth.nose_tip)},
                       {"pose", transform_json(f.truth.pose)}});
    }
  write_text((fs::path(a.out) / "ground_truth.json").string(), truth.dump(2) + "\n");
  std::printf("wrote %d meshes to %s\n", a.subjects * a.samples, a.out.c_str());
}

struct RegisterArgs {
  std::string input, out, mesh_out;
};

void cmd_register(const RegisterArgs& a) {
  IntrinsicRegistration reg;
  const DepthMap d = register_and_rasterize(read_mesh(a.input), {}, {}, &reg);
  if (!a.out.empty()) write_depth_csv(d, a.out);
  if (!a.mesh_out.empty()) write_mesh(morph_to_mesh(d), a.mesh_out, format_from_path(a.mesh_out));
  ojson j{{"input", a.input},
          {"transform", transform_json(reg.transform)},
          {"nose_tip", vec_json(reg.nose_tip)},
          {"symmetry_residual_mm", reg.symmetry_residual_mm},
          {"bridge_slope_rad", reg.bridge_slope},
          {"valid_cells", d.valid_count()}};
  std::cout << j.dump(2) << "\n";
}

struct ModelArgs {
  int k = 20;
  std::string out;
  std::vector<std::string> inputs;
};

void cmd_build_model(const ModelArgs& a) {
  std::vector<DepthMap> faces;
  for (const auto& p : a.inputs) faces.push_back(load_depth(p));
  const ShapeModel m = build_model(faces, a.k);
  m.save(a.out);
  std::printf("model: %d components over %zu cells from %d faces -> %s\n", m.k(), m.support().size(),
              m.training_count(), a.out.c_str());
}

struct MorphArgs {
  std::string method = "depth", hole_policy = "union", model, a, b, out;
  double alpha = 0.5;
};

void cmd_morph(const MorphArgs& a) {
  MorphSpec spec;
  spec.method = morph_method_from_string(a.method);
  spec.hole_policy = hole_policy_from_string(a.hole_policy);
  spec.alpha = a.alpha;
  spec.id_a = a.a;
  spec.id_b = a.b;
  spec.validate();
  const DepthMap da = load_depth(a.a), db = load_depth(a.b);
  DepthMap out;
  if (spec.method == MorphMethod::DepthAverage) {
    out = depth_average(da, db, spec);
  } else {
    if (a.model.empty()) throw Error(ErrorCode::UsageError, "--model is required for coefficient morphs");
    out = coefficient_average(ShapeModel::load(a.model), da, db, spec).depth;
  }
  write_surface(out, a.out);
  std::printf("morph (%s, alpha %.3f) -> %s\n", a.method.c_str(), a.alpha, a.out.c_str());
}

struct TrainArgs {
  std::uint64_t seed = 7;
  int subjects = 30, samples = 3;
  std::string noise = "default", out;
};

void cmd_train_matcher(const TrainArgs& a) {
  PopulationConfig cfg;
  cfg.seed = a.seed;
  cfg.n_subjects = a.subjects;
  cfg.samples_per_subject = a.samples;
  cfg.noise = NoiseProfile::named(a.noise);
  cfg.validate();
  std::vector<LabeledDepthMap> training;
  for (int s = 0; s < a.subjects; ++s)
    for (int k = 0; k < a.samples; ++k)
      training.push_back({subject_id(s), register_and_rasterize(generate_sample(cfg, s, k).mesh)});
  const LikelihoodMatcher m = train_likelihood_matcher(training);
  m.save(a.out);
  std::printf("likelihood matcher: %d regions -> %s\n", m.region_count(), a.out.c_str());
}

struct MatchArgs {
  std::string matcher = "distance", model, probe, gallery, out;
};

void cmd_match(const MatchArgs& a) {
  const DepthMap p = load_depth(a.probe), g = load_depth(a.gallery);
  ScoreRecord r;
  if (a.matcher == LikelihoodMatcher::kName) {
    if (a.model.empty()) throw Error(ErrorCode::UsageError, "--model is required for the likelihood matcher");
    r = score_likelihood(LikelihoodMatcher::load(a.model), p, g, a.probe, a.gallery);
  } else if (a.matcher == kDistanceMatcherName) {
    r = score_distance(p, g, {}, a.probe, a.gallery);
  } else {
    throw Error(ErrorCode::UsageError, "unknown matcher '" + a.matcher + "'");
  }
  if (!a.out.empty()) write_scores_csv({r}, a.out);
  write_scores_csv({r}, std::cout);
}

struct EvalArgs {
  std::string scores, manifest, out, histograms;
  std::optional<double> tau;
  double fmr_target = 0.001;
  int bins = 30;
};

void cmd_evaluate(const EvalArgs& a) {
  const auto records = read_scores_csv(a.scores);
  if (records.empty()) throw Error(ErrorCode::EmptyScoreSet, "no scores in " + a.scores);
  const auto sets = assemble_trials(records, read_manifest(a.manifest));
  ojson reports = ojson::array();
  for (const auto& [name, ts] : sets) {
    const MetricsReport r = evaluate_trials(ts, name, a.fmr_target, a.tau, a.bins);
    reports.push_back(ojson::parse(metrics_report_to_json(r)));
    if (!a.histograms.empty()) {
      fs::create_directories(a.histograms);
      write_text((fs::path(a.histograms) / (name + ".svg")).string(), histogram_svg(r, name));
    }
    std::printf("%s: tau %.6g FMR %.4f FNMR %.4f MMPMR %.4f RMMR %.4f\n", name.c_str(), r.tau, r.fmr, r.fnmr, r.mmpmr,
                r.rmmr);
  }
  const std::string text = ojson{{"format", "morph3d.metrics"}, {"version", 1}, {"matchers", reports}}.dump(2) + "\n";
  if (!a.out.empty()) write_text(a.out, text);
}

ExperimentConfig resolve_experiment(const std::string& what) {
  if (has_ext(what, ".json") || fs::exists(what)) return load_config(what);
  return preset(what);
}

struct ExperimentArgs {
  std::string target, out;
};

void cmd_experiment_run(const ExperimentArgs& a) {
  const ExperimentConfig cfg = resolve_experiment(a.target);
  const std::string out = a.out.empty() ? (fs::path("runs") / cfg.name).string() : a.out;
  const ExperimentResult r = run_experiment(cfg, out);
  std::printf("%s: %zu morphs, outputs in %s\n", cfg.name.c_str(), r.selection.pairs.size(), out.c_str());
  for (const auto& m : r.reports) {
    std::printf("  %-10s tau %-10.6g FMR %.4f  FNMR %.4f  MMPMR %.4f  RMMR %.4f\n", m.matcher.c_str(), m.tau, m.fmr,
                m.fnmr, m.mmpmr, m.rmmr);
  }
}

void cmd_experiment_show(const ExperimentArgs& a) { std::cout << config_to_json(resolve_experiment(a.target)) << "\n"; }

void cmd_experiment_list() {
  for (const auto& p : preset_list()) std::printf("%-24s %s\n", p.name.c_str(), p.summary.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morph3d: synthetic 3D face morphing and vulnerability evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MORPH3D_VERSION);
  std::string stage;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic face population as PLY meshes");
  s->add_option("--seed", synth.seed, "population seed")->capture_default_str();
  s->add_option("--subjects", synth.subjects, "number of subjects")->capture_default_str();
  s->add_option("--samples", synth.samples, "samples per subject")->capture_default_str();
  s->add_option("--noise", synth.noise, "noise profile: zero, controlled, default")->capture_default_str();
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_flag("--ascii", synth.ascii, "write ASCII PLY");

  RegisterArgs reg;
  auto* r = app.add_subcommand("register", "register a face mesh and rasterize it to the intrinsic depth grid");
  r->add_option("input", reg.input, "input mesh (.ply/.obj)")->required();
  r->add_option("--out", reg.out, "depth map CSV");
  r->add_option("--mesh-out", reg.mesh_out, "registered surface as a mesh");

  ModelArgs model;
  auto* b = app.add_subcommand("build-model", "build a PCA shape model from registered faces");
  b->add_option("--k", model.k, "component count")->capture_default_str();
  b->add_option("--out", model.out, "model JSON")->required();
  b->add_option("inputs", model.inputs, "depth CSVs or meshes")->required()->expected(2, -1);

  MorphArgs morph;
  auto* m = app.add_subcommand("morph", "morph two faces");
  m->add_option("--method", morph.method, "depth or coefficient")->capture_default_str();
  m->add_option("--alpha", morph.alpha, "weight of the first face")->capture_default_str();
  m->add_option("--hole-policy", morph.hole_policy, "union or intersect_fill")->capture_default_str();
  m->add_option("--model", morph.model, "shape model (coefficient method)");
  m->add_option("a", morph.a, "first face (mesh or depth CSV)")->required();
  m->add_option("b", morph.b, "second face (mesh or depth CSV)")->required();
  m->add_option("--out", morph.out, "output mesh (.ply) or depth CSV (.csv)")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train-matcher", "train the likelihood matcher on a synthetic population");
  t->add_option("--seed", train.seed, "population seed")->capture_default_str();
  t->add_option("--subjects", train.subjects, "number of subjects")->capture_default_str();
  t->add_option("--samples", train.samples, "samples per subject")->capture_default_str();
  t->add_option("--noise", train.noise, "noise profile")->capture_default_str();
  t->add_option("--out", train.out, "matcher JSON")->required();

  MatchArgs match;
  auto* mt = app.add_subcommand("match", "compare two faces and print one score row");
  mt->add_option("--matcher", match.matcher, "likelihood or distance")->capture_default_str();
  mt->add_option("--model", match.model, "trained likelihood matcher JSON");
  mt->add_option("probe", match.probe, "probe face")->required();
  mt->add_option("gallery", match.gallery, "gallery face")->required();
  mt->add_option("--out", match.out, "also write the score CSV here");

  EvalArgs ev;
  auto* e = app.add_subcommand("evaluate", "metrics from a score CSV and a trial manifest");
  e->add_option("--scores", ev.scores, "score CSV")->required();
  e->add_option("--manifest", ev.manifest, "trial manifest JSON")->required();
  e->add_option("--tau", ev.tau, "fixed threshold (default: calibrate)");
  e->add_option("--fmr-target", ev.fmr_target, "calibration target FMR")->capture_default_str();
  e->add_option("--bins", ev.bins, "histogram bins")->capture_default_str();
  e->add_option("--out", ev.out, "metrics JSON");
  e->add_option("--histograms", ev.histograms, "directory for SVG histograms");

  auto* x = app.add_subcommand("experiment", "run or list experiment presets");
  x->require_subcommand(1);
  ExperimentArgs xr;
  auto* xrun = x->add_subcommand("run", "run a preset or a config JSON");
  xrun->add_option("target", xr.target, "preset name or config path")->required();
  xrun->add_option("--out", xr.out, "output directory (default runs/<name>)");
  auto* xlist = x->add_subcommand("list", "list built-in presets");
  ExperimentArgs xs;
  auto* xshow = x->add_subcommand("show", "print the resolved config JSON of a preset or config file");
  xshow->add_option("target", xs.target, "preset name or config path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (s->parsed()) stage = "synth", cmd_synth(synth);
    else if (r->parsed()) stage = "register", cmd_register(reg);
    else if (b->parsed()) stage = "build-model", cmd_build_model(model);
    else if (m->parsed()) stage = "morph", cmd_morph(morph);
    else if (t->parsed()) stage = "train-matcher", cmd_train_matcher(train);
    else if (mt->parsed()) stage = "match", cmd_match(match);
    else if (e->parsed()) stage = "evaluate", cmd_evaluate(ev);
    else if (xrun->parsed()) stage = "experiment run", cmd_experiment_run(xr);
    else if (xlist->parsed()) stage = "experiment list", cmd_experiment_list();
    else if (xshow->parsed()) stage = "experiment show", cmd_experiment_show(xs);
  } catch (const Error& err) {
    std::fprintf(stderr, "morph3d %s: %s\n", stage.c_str(), err.what());
    return err.code() == ErrorCode::UsageError ? 2 : 1;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "morph3d %s: %s\n", stage.c_str(), err.what());
    return 1;
  }
  return 0;
}
