#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>

#include <json.hpp>

#include "morph3d/error.hpp"
#include "morph3d/experiment.hpp"
#include "morph3d/shape_model.hpp"

#ifndef MORPH3D_VERSION
#define MORPH3D_VERSION "unknown"
#endif

namespace morph3d {

namespace {

constexpr std::uint64_t kTrainSalt = 0x747261696eULL;  // "train"
constexpr std::uint64_t kPairSalt = 0x7061697273ULL;   // "pairs"

// Unbiased integer in [0, n) from a fully specified engine, so the draw does
// not depend on the standard library's distribution implementation.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do x = rng();
  while (x >= limit);
  return x % n;
}

PopulationConfig population_config(std::uint64_t seed, const PopulationSpec& p) {
  PopulationConfig c;
  c.seed = seed;
  c.n_subjects = p.subjects;
  c.samples_per_subject = p.samples;
  c.noise = NoiseProfile::named(p.noise);
  return c;
}

std::string population_key(const PopulationConfig& p) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu|%.17g|%.17g|%.17g|%.17g|%d|%.17g",
                static_cast<unsigned long long>(p.seed), p.noise.max_rotation_deg, p.noise.max_translation_mm,
                p.noise.sigma_mm, p.noise.expression_mm, p.noise.eye_holes ? 1 : 0, p.mesh_spacing_mm);
  return buf;
}

[[noreturn]] void rethrow_stage(const char* stage, const Error& e) {
  std::string msg = e.what();
  const std::string prefix = std::string(to_string(e.code())) + ": ";
  if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
  throw Error(e.code(), std::string("[") + stage + "] " + msg);
}

// One matcher's per-sample features and pairwise score.
class FeatureScorer {
 public:
  virtual ~FeatureScorer() = default;
  virtual Polarity polarity() const = 0;
  virtual std::size_t add(const DepthMap& d) = 0;
  virtual double score(std::size_t probe, std::size_t gallery) const = 0;
};

class LikelihoodScorer final : public FeatureScorer {
 public:
  explicit LikelihoodScorer(const LikelihoodMatcher& m) : m_(m) {}
  Polarity polarity() const override { return Polarity::Similarity; }
  std::size_t add(const DepthMap& d) override {
    f_.push_back(m_.features(d));
    return f_.size() - 1;
  }
  double score(std::size_t a, std::size_t b) const override { return m_.score(f_[a], f_[b]); }

 private:
  const LikelihoodMatcher& m_;
  std::vector<LikelihoodMatcher::Features> f_;
};

class DistanceScorer final : public FeatureScorer {
 public:
  Polarity polarity() const override { return Polarity::Distance; }
  std::size_t add(const DepthMap& d) override {
    f_.push_back(distance_descriptor(d, cfg_));
    return f_.size() - 1;
  }
  double score(std::size_t a, std::size_t b) const override { return cosine_distance(f_[a], f_[b]); }

 private:
  DistanceConfig cfg_;
  std::vector<Eigen::VectorXd> f_;
};

std::string morph_id(const SubjectPair& p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "m%03d_%03d", p.a, p.b);
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + p.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + p.string());
}

}  // namespace

std::string subject_id(int subject) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%03d", subject);
  return buf;
}

std::string sample_id(int subject, int sample) { return subject_id(subject) + "_" + std::to_string(sample); }

std::vector<SubjectPair> select_pairs_random(int n_subjects, int n_pairs, std::uint64_t seed) {
  std::vector<SubjectPair> all;
  for (int a = 0; a < n_subjects; ++a)
    for (int b = a + 1; b < n_subjects; ++b) all.push_back({a, b});
  if (n_pairs < 1 || static_cast<std::size_t>(n_pairs) > all.size()) {
    throw Error(ErrorCode::NoEligiblePairs, "cannot draw " + std::to_string(n_pairs) + " pairs from " +
                                                std::to_string(all.size()));
  }
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < static_cast<std::size_t>(n_pairs); ++i) {
    const std::size_t j = i + bounded(rng, all.size() - i);
    std::swap(all[i], all[j]);
  }
  all.resize(static_cast<std::size_t>(n_pairs));
  std::sort(all.begin(), all.end(), [](const SubjectPair& x, const SubjectPair& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  return all;
}

std::vector<SubjectPair> select_pairs_lookalike(const std::vector<PairScore>& scores, double lo, double hi) {
  if (!(lo < hi)) throw Error(ErrorCode::InvalidRange, "look-alike band needs lo < hi");
  std::vector<SubjectPair> out;
  for (const auto& s : scores)
    if (s.score > lo && s.score < hi) out.push_back(s.pair);
  if (out.empty()) throw Error(ErrorCode::NoEligiblePairs, "no subject pair scores inside the look-alike band");
  return out;
}

const DepthMap& ExperimentCache::depth(const PopulationConfig& pop, int subject, int sample) {
  const std::string key = population_key(pop) + "|" + std::to_string(subject) + "|" + std::to_string(sample);
  auto it = depths_.find(key);
  if (it != depths_.end()) return it->second;
  const FaceSample f = generate_sample(pop, subject, sample);
  DepthMap d;
  try {
    d = register_and_rasterize(f.mesh);
  } catch (const Error& e) {
    std::string msg = e.what();
    const std::string prefix = std::string(to_string(e.code())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    throw Error(e.code(), "sample " + sample_id(subject, sample) + ": " + msg);
  }
  return depths_.emplace(key, std::move(d)).first->second;
}

const LikelihoodMatcher& ExperimentCache::likelihood(const PopulationConfig& pop) {
  const std::string key = population_key(pop) + "|" + std::to_string(pop.n_subjects) + "|" +
                          std::to_string(pop.samples_per_subject);
  auto it = matchers_.find(key);
  if (it != matchers_.end()) return it->second;
  std::vector<LabeledDepthMap> training;
  for (int s = 0; s < pop.n_subjects; ++s)
    for (int k = 0; k < pop.samples_per_subject; ++k) training.push_back({subject_id(s), depth(pop, s, k)});
  return matchers_.emplace(key, train_likelihood_matcher(training)).first->second;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, ExperimentCache* cache) {
  cfg.validate();
  ExperimentCache local;
  ExperimentCache& cc = cache ? *cache : local;
  ExperimentResult res;
  res.config = cfg;
  const std::string started = utc_now();
  auto clock = std::chrono::steady_clock::now();
  auto lap = [&](const char* stage) {
    const auto now = std::chrono::steady_clock::now();
    res.stage_seconds.emplace_back(stage, std::chrono::duration<double>(now - clock).count());
    clock = now;
  };

  const PopulationConfig pop = population_config(cfg.seed, cfg.population);
  const PopulationConfig train_pop = population_config(derive_seed(cfg.seed, kTrainSalt), cfg.training);
  const int ns = cfg.population.subjects, nk = cfg.population.samples;
  auto at = [nk](int s, int k) { return static_cast<std::size_t>(s) * static_cast<std::size_t>(nk) + static_cast<std::size_t>(k); };

  // register
  std::vector<const DepthMap*> scans;
  try {
    for (int s = 0; s < ns; ++s)
      for (int k = 0; k < nk; ++k) scans.push_back(&cc.depth(pop, s, k));
  } catch (const Error& e) {
    rethrow_stage("register", e);
  }
  lap("register");

  // model
  std::unique_ptr<ShapeModel> model;
  if (cfg.method == MorphMethod::CoefficientAverage || cfg.reconstruct_bona_fide) {
    try {
      std::vector<DepthMap> neutrals;
      for (int s = 0; s < ns; ++s) neutrals.push_back(*scans[at(s, 0)]);
      model = std::make_unique<ShapeModel>(build_model(neutrals, cfg.model_k));
    } catch (const Error& e) {
      rethrow_stage("model", e);
    }
  }
  std::vector<DepthMap> bona;
  bona.reserve(scans.size());
  for (const DepthMap* d : scans) bona.push_back(cfg.reconstruct_bona_fide ? reconstruct(*model, fit_coefficients(*model, *d)) : *d);
  lap("model");

  // train
  const bool need_likelihood =
      std::find(cfg.matchers.begin(), cfg.matchers.end(), LikelihoodMatcher::kName) != cfg.matchers.end() ||
      (cfg.selection.mode == SelectionMode::Lookalike && cfg.selection.matcher == LikelihoodMatcher::kName);
  const LikelihoodMatcher* lik = nullptr;
  if (need_likelihood) {
    try {
      lik = &cc.likelihood(train_pop);
    } catch (const Error& e) {
      rethrow_stage("train", e);
    }
  }
  lap("train");

  auto make_scorer = [&](const std::string& name) -> std::unique_ptr<FeatureScorer> {
    if (name == LikelihoodMatcher::kName) return std::make_unique<LikelihoodScorer>(*lik);
    return std::make_unique<DistanceScorer>();
  };
  // Genuine and impostor comparisons over the bona fide set, i < j.
  Manifest& man = res.manifest;
  man.experiment = cfg.name;
  for (std::size_t i = 0; i < bona.size(); ++i)
    for (std::size_t j = i + 1; j < bona.size(); ++j) {
      const int si = static_cast<int>(i) / nk, sj = static_cast<int>(j) / nk;
      auto& list = si == sj ? man.genuine : man.impostor;
      list.emplace_back(sample_id(si, static_cast<int>(i) % nk), sample_id(sj, static_cast<int>(j) % nk));
    }

  // select
  SelectionSummary& sel = res.selection;
  sel.mode = cfg.selection.mode;
  try {
    if (cfg.selection.mode == SelectionMode::Random) {
      sel.candidates = static_cast<std::size_t>(ns) * static_cast<std::size_t>(ns - 1) / 2;
      sel.pairs = select_pairs_random(ns, cfg.selection.n_pairs, derive_seed(cfg.seed, kPairSalt));
    } else {
      auto scorer = make_scorer(cfg.selection.matcher);
      for (const auto& d : bona) scorer->add(d);
      const Polarity pol = scorer->polarity();
      std::vector<double> gen, imp;
      for (std::size_t i = 0; i < bona.size(); ++i)
        for (std::size_t j = i + 1; j < bona.size(); ++j)
          (i / static_cast<std::size_t>(nk) == j / static_cast<std::size_t>(nk) ? gen : imp).push_back(scorer->score(i, j));
      const double tau = calibrate_threshold(gen, imp, cfg.fmr_target, pol);
      double lo = cfg.selection.rel_lo * tau, hi = cfg.selection.rel_hi * tau;
      if (cfg.selection.band_lo) {
        lo = *cfg.selection.band_lo;
        hi = *cfg.selection.band_hi;
      }
      // Look-alike pairs must not already match each other.
      if (pol == Polarity::Similarity ? hi > tau : lo < tau) {
        throw Error(ErrorCode::InvalidConfig, "look-alike band reaches the match region of tau = " + std::to_string(tau));
      }
      sel.band_lo = lo;
      sel.band_hi = hi;
      std::vector<PairScore> ps;
      for (int a = 0; a < ns; ++a)
        for (int b = a + 1; b < ns; ++b) ps.push_back({{a, b}, scorer->score(at(a, 0), at(b, 0))});
      sel.candidates = ps.size();
      sel.pairs = select_pairs_lookalike(ps, lo, hi);
    }
  } catch (const Error& e) {
    rethrow_stage("select", e);
  }
  lap("select");

  // morph
  std::vector<DepthMap> morphs;
  try {
    for (const auto& p : sel.pairs) {
      MorphSpec spec;
      spec.method = cfg.method;
      spec.alpha = cfg.alpha;
      spec.hole_policy = cfg.hole_policy;
      spec.id_a = sample_id(p.a, 0);
      spec.id_b = sample_id(p.b, 0);
      const DepthMap& da = *scans[at(p.a, 0)];
      const DepthMap& db = *scans[at(p.b, 0)];
      morphs.push_back(cfg.method == MorphMethod::DepthAverage ? depth_average(da, db, spec)
                                                               : coefficient_average(*model, da, db, spec).depth);
      ManifestMorph mm;
      mm.id = morph_id(p);
      mm.subjects = {subject_id(p.a), subject_id(p.b)};
      mm.sources = {spec.id_a, spec.id_b};
      for (int k = 1; k < nk; ++k) {
        mm.mated[0].push_back(sample_id(p.a, k));
        mm.mated[1].push_back(sample_id(p.b, k));
      }
      man.morphs.push_back(std::move(mm));
    }
  } catch (const Error& e) {
    rethrow_stage("morph", e);
  }
  lap("morph");

  // score + evaluate
  nlohmann::ordered_json reports = nlohmann::ordered_json::array();
  try {
    for (const auto& name : cfg.matchers) {
      auto scorer = make_scorer(name);
      for (const auto& d : bona) scorer->add(d);
      const std::size_t first_morph = bona.size();
      for (const auto& d : morphs) scorer->add(d);
      const Polarity pol = scorer->polarity();
      TrialSet ts;
      ts.polarity = pol;
      auto record = [&](const std::string& p, const std::string& g, double s) {
        res.scores.push_back({p, g, name, pol, s});
      };
      for (std::size_t i = 0; i < bona.size(); ++i)
        for (std::size_t j = i + 1; j < bona.size(); ++j) {
          const double s = scorer->score(i, j);
          const bool same = i / static_cast<std::size_t>(nk) == j / static_cast<std::size_t>(nk);
          (same ? ts.genuine : ts.impostor).push_back(s);
          const int si = static_cast<int>(i) / nk, sj = static_cast<int>(j) / nk;
          record(sample_id(si, static_cast<int>(i) % nk), sample_id(sj, static_cast<int>(j) % nk), s);
        }
      for (std::size_t m = 0; m < sel.pairs.size(); ++m) {
        const auto& p = sel.pairs[m];
        MorphTrial t{man.morphs[m].id, man.morphs[m].subjects, {}};
        const int subj[2] = {p.a, p.b};
        for (int side = 0; side < 2; ++side)
          for (int k = 1; k < nk; ++k) {
            const double s = scorer->score(first_morph + m, at(subj[side], k));
            t.mated_scores[side].push_back(s);
            record(man.morphs[m].id, sample_id(subj[side], k), s);
          }
        ts.morphs.push_back(std::move(t));
      }
      MetricsReport r = evaluate_trials(ts, name, cfg.fmr_target, std::nullopt, cfg.histogram_bins);
      reports.push_back(nlohmann::ordered_json::parse(metrics_report_to_json(r)));
      res.reports.push_back(std::move(r));
    }
  } catch (const Error& e) {
    rethrow_stage("score", e);
  }
  lap("score");

  nlohmann::ordered_json rep;
  rep["format"] = "morph3d.report";
  rep["version"] = 1;
  rep["experiment"] = cfg.name;
  rep["config"] = nlohmann::ordered_json::parse(config_to_json(cfg));
  nlohmann::ordered_json s;
  s["mode"] = to_string(sel.mode);
  s["band"] = sel.band_lo ? nlohmann::ordered_json({*sel.band_lo, *sel.band_hi}) : nlohmann::ordered_json(nullptr);
  s["candidates"] = sel.candidates;
  s["n_pairs"] = sel.pairs.size();
  nlohmann::ordered_json plist = nlohmann::ordered_json::array();
  for (const auto& p : sel.pairs) plist.push_back({subject_id(p.a), subject_id(p.b)});
  s["pairs"] = std::move(plist);
  rep["selection"] = std::move(s);
  rep["matchers"] = std::move(reports);
  res.report_json = rep.dump(2) + "\n";

  if (!out_dir.empty()) {
    try {
      namespace fs = std::filesystem;
      const fs::path dir(out_dir);
      fs::create_directories(dir / "histograms");
      write_scores_csv(res.scores, (dir / "scores.csv").string());
      write_text(dir / "manifest.json", manifest_to_json(man) + "\n");
      write_text(dir / "report.json", res.report_json);
      for (const auto& r : res.reports)
        write_text(dir / "histograms" / (r.matcher + ".svg"), histogram_svg(r, cfg.name + ": " + r.matcher));
      lap("write");
      nlohmann::ordered_json side;
      side["format"] = "morph3d.run_sidecar";
      side["version"] = 1;
      side["tool_version"] = MORPH3D_VERSION;
      side["experiment"] = cfg.name;
      side["started_utc"] = started;
      side["finished_utc"] = utc_now();
      nlohmann::ordered_json st;
      double total = 0.0;
      for (const auto& [k, v] : res.stage_seconds) {
        st[k] = v;
        total += v;
      }
      side["stage_seconds"] = std::move(st);
      side["total_seconds"] = total;
      write_text(dir / "run-sidecar.json", side.dump(2) + "\n");
    } catch (const Error& e) {
      rethrow_stage("write", e);
    } catch (const std::filesystem::filesystem_error& e) {
      throw Error(ErrorCode::IoFailure, std::string("[write] ") + e.what());
    }
  }
  return res;
}

}  // namespace morph3d
