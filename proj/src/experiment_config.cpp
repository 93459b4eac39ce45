#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "morph3d/error.hpp"
#include "morph3d/experiment.hpp"

namespace morph3d {

using ojson = nlohmann::ordered_json;

std::string to_string(SelectionMode m) { return m == SelectionMode::Random ? "random" : "lookalike"; }

SelectionMode selection_mode_from_string(const std::string& s) {
  if (s == "random") return SelectionMode::Random;
  if (s == "lookalike") return SelectionMode::Lookalike;
  throw Error(ErrorCode::InvalidConfig, "unknown selection mode '" + s + "'");
}

namespace {

bool known_matcher(const std::string& m) { return m == LikelihoodMatcher::kName || m == kDistanceMatcherName; }

void check_population(const PopulationSpec& p, const char* what) {
  if (p.subjects < 2) throw Error(ErrorCode::InvalidConfig, std::string(what) + ": at least 2 subjects required");
  if (p.samples < 2) {
    throw Error(ErrorCode::InvalidConfig, std::string(what) + ": at least 2 samples per subject required");
  }
  (void)NoiseProfile::named(p.noise);
}

ojson population_json(const PopulationSpec& p) {
  return {{"subjects", p.subjects}, {"samples", p.samples}, {"noise", p.noise}};
}

ojson optional_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

template <class F>
void for_keys(const nlohmann::json& j, const char* section, F&& f) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, std::string(section) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!f(key, value)) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "' in " + section);
  }
}

PopulationSpec population_from(const nlohmann::json& j, PopulationSpec p, const char* section) {
  for_keys(j, section, [&](const std::string& k, const nlohmann::json& v) {
    if (k == "subjects") p.subjects = v.get<int>();
    else if (k == "samples") p.samples = v.get<int>();
    else if (k == "noise") p.noise = v.get<std::string>();
    else return false;
    return true;
  });
  return p;
}

std::optional<double> optional_from(const nlohmann::json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty()) throw Error(ErrorCode::InvalidConfig, "experiment name must not be empty");
  check_population(population, "population");
  check_population(training, "training");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidConfig, "alpha must lie in [0, 1]");
  const bool needs_model = method == MorphMethod::CoefficientAverage || reconstruct_bona_fide;
  if (needs_model && (model_k < 1 || model_k > population.subjects - 1)) {
    throw Error(ErrorCode::InvalidConfig, "model_k must lie in [1, subjects - 1]");
  }
  if (!known_matcher(selection.matcher)) {
    throw Error(ErrorCode::InvalidConfig, "unknown selection matcher '" + selection.matcher + "'");
  }
  if (selection.mode == SelectionMode::Random) {
    if (selection.n_pairs < 1) throw Error(ErrorCode::InvalidConfig, "n_pairs must be >= 1");
  } else {
    if (selection.band_lo.has_value() != selection.band_hi.has_value()) {
      throw Error(ErrorCode::InvalidConfig, "band_lo and band_hi must be given together");
    }
    if (selection.band_lo && !(*selection.band_lo < *selection.band_hi)) {
      throw Error(ErrorCode::InvalidConfig, "look-alike band needs lo < hi");
    }
    if (!selection.band_lo) {
      if (selection.matcher != LikelihoodMatcher::kName) {
        throw Error(ErrorCode::InvalidConfig, "a relative band needs a similarity selection matcher; give band_lo/band_hi");
      }
      if (!(selection.rel_lo >= 0.0 && selection.rel_lo < selection.rel_hi && selection.rel_hi <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "relative band needs 0 <= rel_lo < rel_hi <= 1");
      }
    }
  }
  if (matchers.empty()) throw Error(ErrorCode::InvalidConfig, "at least one matcher required");
  std::set<std::string> seen;
  for (const auto& m : matchers) {
    if (!known_matcher(m)) throw Error(ErrorCode::InvalidConfig, "unknown matcher '" + m + "'");
    if (!seen.insert(m).second) throw Error(ErrorCode::InvalidConfig, "matcher '" + m + "' listed twice");
  }
  if (!(fmr_target > 0.0 && fmr_target < 1.0)) throw Error(ErrorCode::InvalidConfig, "fmr_target must lie in (0, 1)");
  if (histogram_bins < 1) throw Error(ErrorCode::InvalidConfig, "histogram_bins must be >= 1");
}

std::string config_to_json(const ExperimentConfig& c) {
  ojson j;
  j["version"] = ExperimentConfig::kVersion;
  j["name"] = c.name;
  j["description"] = c.description;
  j["seed"] = c.seed;
  j["population"] = population_json(c.population);
  j["training"] = population_json(c.training);
  j["morph"] = {{"method", to_string(c.method)},
                {"alpha", c.alpha},
                {"hole_policy", to_string(c.hole_policy)},
                {"model_k", c.model_k},
                {"reconstruct_bona_fide", c.reconstruct_bona_fide}};
  j["selection"] = {{"mode", to_string(c.selection.mode)},
                    {"n_pairs", c.selection.n_pairs},
                    {"band_lo", optional_json(c.selection.band_lo)},
                    {"band_hi", optional_json(c.selection.band_hi)},
                    {"rel_lo", c.selection.rel_lo},
                    {"rel_hi", c.selection.rel_hi},
                    {"matcher", c.selection.matcher}};
  j["matchers"] = c.matchers;
  j["fmr_target"] = c.fmr_target;
  j["histogram_bins"] = c.histogram_bins;
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("version")) throw Error(ErrorCode::InvalidConfig, "config needs a version field");
  ExperimentConfig c;
  try {
    if (j.at("version").get<int>() != ExperimentConfig::kVersion) {
      throw Error(ErrorCode::InvalidConfig, "unsupported config version " + j.at("version").dump());
    }
    for_keys(j, "config", [&](const std::string& k, const nlohmann::json& v) {
      if (k == "version") return true;
      if (k == "name") c.name = v.get<std::string>();
      else if (k == "description") c.description = v.get<std::string>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "population") c.population = population_from(v, c.population, "population");
      else if (k == "training") c.training = population_from(v, c.training, "training");
      else if (k == "morph") {
        for_keys(v, "morph", [&](const std::string& mk, const nlohmann::json& mv) {
          if (mk == "method") c.method = morph_method_from_string(mv.get<std::string>());
          else if (mk == "alpha") c.alpha = mv.get<double>();
          else if (mk == "hole_policy") c.hole_policy = hole_policy_from_string(mv.get<std::string>());
          else if (mk == "model_k") c.model_k = mv.get<int>();
          else if (mk == "reconstruct_bona_fide") c.reconstruct_bona_fide = mv.get<bool>();
          else return false;
          return true;
        });
      } else if (k == "selection") {
        for_keys(v, "selection", [&](const std::string& sk, const nlohmann::json& sv) {
          if (sk == "mode") c.selection.mode = selection_mode_from_string(sv.get<std::string>());
          else if (sk == "n_pairs") c.selection.n_pairs = sv.get<int>();
          else if (sk == "band_lo") c.selection.band_lo = optional_from(sv);
          else if (sk == "band_hi") c.selection.band_hi = optional_from(sv);
          else if (sk == "rel_lo") c.selection.rel_lo = sv.get<double>();
          else if (sk == "rel_hi") c.selection.rel_hi = sv.get<double>();
          else if (sk == "matcher") c.selection.matcher = sv.get<std::string>();
          else return false;
          return true;
        });
      } else if (k == "matchers") c.matchers = v.get<std::vector<std::string>>();
      else if (k == "fmr_target") c.fmr_target = v.get<double>();
      else if (k == "histogram_bins") c.histogram_bins = v.get<int>();
      else return false;
      return true;
    });
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config field has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

// Built-in presets. All use the seed-7 population of 40 subjects x 3 samples;
// morphs are built from each subject's neutral sample 0 and compared with the
// remaining samples.
//
// exp1_pca_qualitative  Coefficient averaging in the in-repo shape model with
//                       model-reconstructed bona fide samples: every compared
//                       face is model generated, so the numbers are
//                       qualitative only. Random pairs, both matchers.
// exp2_random           Shape-model morphs of real (registered) scans under the
//                       uncontrolled noise profile, random pairs.
// exp3_controlled_random  As exp2 with the controlled acquisition profile for
//                       both evaluation and training populations.
// exp4_depth_random     Depth averaging of registered scans (union holes),
//                       random pairs.
// exp5_lookalike        As exp2, but pairs are those whose neutral-vs-neutral
//                       likelihood score lies strictly inside
//                       (0.375 tau, 0.875 tau) of the calibrated threshold.
const std::vector<PresetInfo>& preset_list() {
  static const std::vector<PresetInfo> list = {
      {"exp1_pca_qualitative", "shape-model coefficient morphs, model-reconstructed bona fide, random pairs"},
      {"exp2_random", "shape-model morphs of uncontrolled scans, random pairs"},
      {"exp3_controlled_random", "shape-model morphs of controlled scans, random pairs"},
      {"exp4_depth_random", "depth-average morphs (union holes), random pairs"},
      {"exp5_lookalike", "shape-model morphs of look-alike pairs chosen by the likelihood matcher"},
  };
  return list;
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "exp1_pca_qualitative") {
    c.method = MorphMethod::CoefficientAverage;
    c.reconstruct_bona_fide = true;
    c.selection.n_pairs = 200;
  } else if (name == "exp2_random") {
    c.method = MorphMethod::CoefficientAverage;
  } else if (name == "exp3_controlled_random") {
    c.method = MorphMethod::CoefficientAverage;
    c.population.noise = "controlled";
    c.training.noise = "controlled";
  } else if (name == "exp4_depth_random") {
    c.method = MorphMethod::DepthAverage;
    c.hole_policy = HolePolicy::Union;
  } else if (name == "exp5_lookalike") {
    c.method = MorphMethod::CoefficientAverage;
    c.selection.mode = SelectionMode::Lookalike;
    c.selection.matcher = LikelihoodMatcher::kName;
  } else {
    throw Error(ErrorCode::UnknownId, "unknown preset '" + name + "'");
  }
  for (const auto& p : preset_list())
    if (p.name == name) c.description = p.summary;
  c.validate();
  return c;
}

}  // namespace morph3d
