#include "morph3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "morph3d/error.hpp"

namespace morph3d {

std::string to_string(Polarity p) { return p == Polarity::Similarity ? "similarity" : "distance"; }

Polarity polarity_from_string(const std::string& s) {
  if (s == "similarity") return Polarity::Similarity;
  if (s == "distance") return Polarity::Distance;
  throw Error(ErrorCode::InvalidConfig, "unknown polarity '" + s + "'");
}

namespace {

std::size_t count_matches(std::span<const double> scores, double tau, Polarity p) {
  std::size_t n = 0;
  for (double s : scores) n += is_match(s, tau, p) ? 1 : 0;
  return n;
}

}  // namespace

double fmr(std::span<const double> impostor, double tau, Polarity p) {
  if (impostor.empty()) throw Error(ErrorCode::EmptyScoreSet, "fmr: no impostor scores");
  return static_cast<double>(count_matches(impostor, tau, p)) / static_cast<double>(impostor.size());
}

double fnmr(std::span<const double> genuine, double tau, Polarity p) {
  if (genuine.empty()) throw Error(ErrorCode::EmptyScoreSet, "fnmr: no genuine scores");
  return static_cast<double>(genuine.size() - count_matches(genuine, tau, p)) / static_cast<double>(genuine.size());
}

double mmpmr(std::span<const MorphTrial> morphs, double tau, Polarity p) {
  if (morphs.empty()) throw Error(ErrorCode::EmptyScoreSet, "mmpmr: no morph trials");
  std::size_t ok = 0;
  for (const auto& m : morphs) {
    bool all = true;
    for (int s = 0; s < 2; ++s) {
      const auto& sc = m.mated_scores[static_cast<std::size_t>(s)];
      if (sc.empty()) {
        throw Error(ErrorCode::MissingMatedSamples,
                    "morph " + m.morph_id + " has no mated score for subject " + m.subjects[static_cast<std::size_t>(s)]);
      }
      const double best = p == Polarity::Similarity ? *std::max_element(sc.begin(), sc.end())
                                                    : *std::min_element(sc.begin(), sc.end());
      all = all && is_match(best, tau, p);
    }
    ok += all ? 1 : 0;
  }
  return static_cast<double>(ok) / static_cast<double>(morphs.size());
}

double rmmr(double mmpmr_value, double fnmr_value) { return mmpmr_value + fnmr_value; }

double calibrate_threshold(std::span<const double> genuine, std::span<const double> impostor, double target_fmr,
                           Polarity p) {
  (void)genuine;
  if (impostor.empty()) throw Error(ErrorCode::EmptyScoreSet, "calibrate_threshold: no impostor scores");
  if (!(target_fmr >= 0.0 && target_fmr <= 1.0)) throw Error(ErrorCode::InvalidConfig, "target FMR must lie in [0, 1]");
  const std::size_t n = impostor.size();
  // Largest number of impostor matches the target allows.
  auto allowed = static_cast<std::size_t>(std::floor(target_fmr * static_cast<double>(n) + 1e-9));
  while (allowed > 0 && static_cast<double>(allowed) / static_cast<double>(n) > target_fmr) --allowed;
  std::vector<double> s(impostor.begin(), impostor.end());
  if (p == Polarity::Similarity) {
    std::sort(s.begin(), s.end(), std::greater<>());
    if (allowed >= n) return s.back();
    // Anything strictly above the (allowed+1)-th largest admits <= allowed.
    return std::nextafter(s[allowed], std::numeric_limits<double>::infinity());
  }
  std::sort(s.begin(), s.end());
  if (allowed >= n) return std::nextafter(s.back(), std::numeric_limits<double>::infinity());
  // Matches are strictly below tau, so the (allowed+1)-th smallest is the largest valid tau.
  return s[allowed];
}

Histogram histogram(std::span<const double> scores, int bins, double lo, double hi) {
  if (bins < 1) throw Error(ErrorCode::InvalidRange, "histogram needs at least one bin");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorCode::InvalidRange, "histogram range must satisfy lo < hi");
  }
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double s : scores) {
    if (s < lo) {
      ++h.underflow;
    } else if (!(s <= hi)) {
      ++h.overflow;
    } else {
      auto b = static_cast<std::size_t>((s - lo) / (hi - lo) * bins);
      ++h.counts[std::min(b, h.counts.size() - 1)];
    }
  }
  return h;
}

MetricsReport evaluate(const TrialSet& trials, double tau, int bins, double lo, double hi, const std::string& matcher) {
  MetricsReport r;
  r.matcher = matcher;
  r.polarity = trials.polarity;
  r.tau = tau;
  r.fmr = fmr(trials.impostor, tau, trials.polarity);
  r.fnmr = fnmr(trials.genuine, tau, trials.polarity);
  r.mmpmr = mmpmr(trials.morphs, tau, trials.polarity);
  r.rmmr = rmmr(r.mmpmr, r.fnmr);
  r.n_genuine = trials.genuine.size();
  r.n_impostor = trials.impostor.size();
  r.n_morphs = trials.morphs.size();
  r.n_successful_morphs = static_cast<std::size_t>(std::llround(r.mmpmr * static_cast<double>(r.n_morphs)));
  r.genuine_hist = histogram(trials.genuine, bins, lo, hi);
  r.impostor_hist = histogram(trials.impostor, bins, lo, hi);
  std::vector<double> pooled;
  for (const auto& m : trials.morphs)
    for (const auto& v : m.mated_scores) pooled.insert(pooled.end(), v.begin(), v.end());
  r.morph_hist = histogram(pooled, bins, lo, hi);
  return r;
}

}  // namespace morph3d
