#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "morph3d/depth_map.hpp"
#include "morph3d/metrics.hpp"

namespace morph3d {

struct ScoreRecord {
  std::string probe_id;
  std::string gallery_id;
  std::string matcher;
  Polarity polarity = Polarity::Similarity;
  double score = 0.0;
};

void write_scores_csv(const std::vector<ScoreRecord>& records, std::ostream& out);
void write_scores_csv(const std::vector<ScoreRecord>& records, const std::string& path);
/// Throws MalformedFile on a bad header or row.
std::vector<ScoreRecord> read_scores_csv(std::istream& in);
std::vector<ScoreRecord> read_scores_csv(const std::string& path);

// ---------------------------------------------------------------------------
// Likelihood-ratio region classifier (similarity, score = vote count).

/// Axis-aligned rectangle in intrinsic-frame millimetres, [x0, x1) x [y0, y1).
struct Region {
  std::string name;
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

/// The built-in 60-region layout.
const std::vector<Region>& default_regions();

struct LikelihoodConfig {
  std::vector<Region> regions = default_regions();
  int pca_dim = 30;
  int lda_dim = 5;
  double region_fmr = 0.25;
  /// Every n-th training subject (in sorted id order) is held out for the
  /// per-region thresholds.
  int holdout_every = 3;

  void validate() const;
};

struct LabeledDepthMap {
  std::string subject;
  DepthMap depth;
};

class LikelihoodMatcher {
 public:
  static constexpr int kFormatVersion = 1;
  static constexpr const char* kName = "likelihood";

  struct RegionModel {
    std::string name;
    int col0 = 0, row0 = 0, col1 = 0, row1 = 0;  // cell rectangle, half open
    bool degenerate = false;                      // always votes
    Eigen::VectorXd fill;                         // imputation value per cell
    Eigen::VectorXd mu;
    Eigen::MatrixXd proj;                         // whitened LLR projection, q x cells
    double llr_max = 0.0;                         // LLR at zero difference
    double threshold = 0.0;
  };

  /// Per-sample projected features, one block per region.
  using Features = std::vector<Eigen::VectorXd>;

  LikelihoodMatcher() = default;

  const GridSpec& grid() const { return grid_; }
  const std::vector<RegionModel>& regions() const { return regions_; }
  int region_count() const { return static_cast<int>(regions_.size()); }

  Features features(const DepthMap& d) const;
  double region_llr(int region, const Features& a, const Features& b) const;
  double score(const Features& a, const Features& b) const;
  double score(const DepthMap& probe, const DepthMap& gallery) const;

  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static LikelihoodMatcher load(std::istream& in);
  static LikelihoodMatcher load(const std::string& path);

 private:
  friend LikelihoodMatcher train_likelihood_matcher(const std::vector<LabeledDepthMap>&, const LikelihoodConfig&);
  GridSpec grid_;
  std::vector<RegionModel> regions_;
};

/// Throws InsufficientTraining unless >= 2 subjects have >= 2 samples.
LikelihoodMatcher train_likelihood_matcher(const std::vector<LabeledDepthMap>& training,
                                           const LikelihoodConfig& cfg = {});

ScoreRecord score_likelihood(const LikelihoodMatcher& model, const DepthMap& probe, const DepthMap& gallery,
                             const std::string& probe_id = "", const std::string& gallery_id = "");

// ---------------------------------------------------------------------------
// Local shape-descriptor matcher (distance, 1 - cosine).

struct DistanceConfig {
  int patches = 6;        // P x P tiling of the window
  int bins = 8;           // per histogram
  double smooth_sigma_mm = 3.0;
  double window_x0 = -60.0, window_x1 = 60.0;
  double window_y0 = -45.0, window_y1 = 105.0;

  void validate() const;
};

/// l2-normalised concatenation of per-patch shape-index and normal-direction
/// histograms. Throws DegenerateDescriptor when no patch has data.
Eigen::VectorXd distance_descriptor(const DepthMap& d, const DistanceConfig& cfg = {});

/// 1 - cos(u, v), clamped to [0, 2]. Throws DegenerateDescriptor on a zero vector.
double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

ScoreRecord score_distance(const DepthMap& probe, const DepthMap& gallery, const DistanceConfig& cfg = {},
                           const std::string& probe_id = "", const std::string& gallery_id = "");

inline constexpr const char* kDistanceMatcherName = "distance";

/// Reference thresholds of the original systems (documentation only; always
/// recalibrate for these re-implementations).
inline constexpr double kReferenceLikelihoodThreshold = 8.0;
inline constexpr double kReferenceDistanceThreshold = 0.71565;

}  // namespace morph3d
