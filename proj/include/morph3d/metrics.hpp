#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace morph3d {

/// SIMILARITY: larger is more alike, match iff score >= tau.
/// DISTANCE: smaller is more alike, match iff score < tau.
enum class Polarity { Similarity, Distance };

std::string to_string(Polarity p);
Polarity polarity_from_string(const std::string& s);

inline bool is_match(double score, double tau, Polarity p) {
  return p == Polarity::Similarity ? score >= tau : score < tau;
}

/// Scores of one morph against the mated samples of each contributing subject.
struct MorphTrial {
  std::string morph_id;
  std::array<std::string, 2> subjects;
  std::array<std::vector<double>, 2> mated_scores;
};

struct TrialSet {
  Polarity polarity = Polarity::Similarity;
  std::vector<double> genuine;
  std::vector<double> impostor;
  std::vector<MorphTrial> morphs;
};

double fmr(std::span<const double> impostor, double tau, Polarity p);
double fnmr(std::span<const double> genuine, double tau, Polarity p);
/// MinMax variant: a morph succeeds iff every contributing subject has at
/// least one matching mated score.
double mmpmr(std::span<const MorphTrial> morphs, double tau, Polarity p);
double rmmr(double mmpmr_value, double fnmr_value);

/// SIMILARITY: smallest tau with FMR <= target. DISTANCE: largest tau with
/// FMR <= target. The next less strict double always exceeds the target
/// (unless every impostor is allowed).
double calibrate_threshold(std::span<const double> genuine, std::span<const double> impostor, double target_fmr,
                           Polarity p);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;  // above hi, or NaN

  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
};

/// Uniform bins over [lo, hi]; the top edge is included in the last bin.
Histogram histogram(std::span<const double> scores, int bins, double lo, double hi);

struct MetricsReport {
  std::string matcher;
  Polarity polarity = Polarity::Similarity;
  double tau = 0.0;
  double fmr = 0.0;
  double fnmr = 0.0;
  double mmpmr = 0.0;
  double rmmr = 0.0;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
  std::size_t n_morphs = 0;
  std::size_t n_successful_morphs = 0;
  Histogram genuine_hist;
  Histogram impostor_hist;
  Histogram morph_hist;
};

/// Rates at tau plus histograms over [lo, hi] (morph histogram pools every
/// mated score).
MetricsReport evaluate(const TrialSet& trials, double tau, int bins, double lo, double hi,
                       const std::string& matcher = "");

}  // namespace morph3d
