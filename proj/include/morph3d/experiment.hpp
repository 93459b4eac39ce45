#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "morph3d/depth_map.hpp"
#include "morph3d/matchers.hpp"
#include "morph3d/metrics.hpp"
#include "morph3d/morphgen.hpp"
#include "morph3d/registration.hpp"
#include "morph3d/synth.hpp"

namespace morph3d {

enum class SelectionMode { Random, Lookalike };
std::string to_string(SelectionMode m);
SelectionMode selection_mode_from_string(const std::string& s);

struct PopulationSpec {
  int subjects = 40;
  int samples = 3;
  std::string noise = "default";  // named NoiseProfile
};

struct SelectionSpec {
  SelectionMode mode = SelectionMode::Random;
  int n_pairs = 100;  // RANDOM only
  /// LOOKALIKE: explicit band; when absent the band is
  /// (rel_lo * tau_cal, rel_hi * tau_cal) of the selection matcher.
  std::optional<double> band_lo, band_hi;
  double rel_lo = 0.375, rel_hi = 0.875;
  std::string matcher = "likelihood";
};

struct ExperimentConfig {
  static constexpr int kVersion = 1;

  std::string name = "custom";
  std::string description;
  std::uint64_t seed = 7;
  PopulationSpec population;
  /// Likelihood-matcher training population; its seed is derived from `seed`
  /// so its subjects never coincide with the evaluation subjects.
  PopulationSpec training{30, 3, "default"};
  MorphMethod method = MorphMethod::CoefficientAverage;
  double alpha = 0.5;
  HolePolicy hole_policy = HolePolicy::Union;
  int model_k = 20;  // coefficient morphs; model built from evaluation neutrals
  /// Replace every bona fide sample by reconstruct(fit(sample)).
  bool reconstruct_bona_fide = false;
  SelectionSpec selection;
  std::vector<std::string> matchers{"likelihood", "distance"};
  double fmr_target = 0.001;
  int histogram_bins = 30;

  void validate() const;
};

/// Canonical JSON (fixed key order, every field present).
std::string config_to_json(const ExperimentConfig& cfg);
/// Throws InvalidConfig on unknown keys, a wrong version or bad values.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct PresetInfo {
  std::string name;
  std::string summary;
};
const std::vector<PresetInfo>& preset_list();
/// Throws UnknownId.
ExperimentConfig preset(const std::string& name);

// Pair selection -------------------------------------------------------------

struct SubjectPair {
  int a = 0, b = 0;  // a < b
  bool operator==(const SubjectPair&) const = default;
};

struct PairScore {
  SubjectPair pair;
  double score = 0.0;
};

/// n distinct pairs drawn uniformly from all subject pairs, deterministic in
/// seed, returned sorted. Throws NoEligiblePairs when n exceeds the pair count.
std::vector<SubjectPair> select_pairs_random(int n_subjects, int n_pairs, std::uint64_t seed);

/// Pairs with lo < score < hi, in input order. Throws NoEligiblePairs when
/// none qualify, InvalidRange unless lo < hi.
std::vector<SubjectPair> select_pairs_lookalike(const std::vector<PairScore>& scores, double lo, double hi);

// Trial manifest ---------------------------------------------------------------

struct ManifestMorph {
  std::string id;
  std::array<std::string, 2> subjects;
  std::array<std::string, 2> sources;
  std::array<std::vector<std::string>, 2> mated;
};

struct Manifest {
  static constexpr int kVersion = 1;
  std::string experiment;
  std::vector<std::pair<std::string, std::string>> genuine;
  std::vector<std::pair<std::string, std::string>> impostor;
  std::vector<ManifestMorph> morphs;
};

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);
Manifest read_manifest(const std::string& path);

/// Groups score records per matcher (sorted by name) into trial sets.
/// Throws MalformedFile on a score the manifest does not describe, or on a
/// matcher whose records disagree on polarity.
std::vector<std::pair<std::string, TrialSet>> assemble_trials(const std::vector<ScoreRecord>& records,
                                                              const Manifest& manifest);

// Reports -------------------------------------------------------------------------

/// Calibrate at `fmr_target` (or use `tau` when given) and evaluate with the
/// default histogram range of the matcher.
MetricsReport evaluate_trials(const TrialSet& trials, const std::string& matcher, double fmr_target,
                              std::optional<double> tau, int bins);

std::string metrics_report_to_json(const MetricsReport& r);
/// Standalone 600x400 SVG of the three score distributions with tau marked.
std::string histogram_svg(const MetricsReport& r, const std::string& title);

// Runner ------------------------------------------------------------------------------

/// Registered depth maps and trained matchers shared across runs in one
/// process. Keys cover every input that affects the cached value.
class ExperimentCache {
 public:
  const DepthMap& depth(const PopulationConfig& pop, int subject, int sample);
  const LikelihoodMatcher& likelihood(const PopulationConfig& pop);
  std::size_t depth_entries() const { return depths_.size(); }

 private:
  std::map<std::string, DepthMap> depths_;
  std::map<std::string, LikelihoodMatcher> matchers_;
};

struct SelectionSummary {
  SelectionMode mode = SelectionMode::Random;
  std::optional<double> band_lo, band_hi;
  std::size_t candidates = 0;  // pairs scored (lookalike) or available (random)
  std::vector<SubjectPair> pairs;
};

struct ExperimentResult {
  ExperimentConfig config;
  SelectionSummary selection;
  std::vector<MetricsReport> reports;  // one per matcher, config order
  std::vector<ScoreRecord> scores;
  Manifest manifest;
  std::string report_json;             // byte-exact content of report.json
  std::vector<std::pair<std::string, double>> stage_seconds;
};

/// Runs the pipeline. When `out_dir` is non-empty writes scores.csv,
/// manifest.json, report.json, histograms/<matcher>.svg and run-sidecar.json.
/// Stage failures are rethrown with the stage name prefixed.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir = "",
                                ExperimentCache* cache = nullptr);

std::string sample_id(int subject, int sample);
std::string subject_id(int subject);

}  // namespace morph3d
