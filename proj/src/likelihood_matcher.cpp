#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <json.hpp>

#include "morph3d/error.hpp"
#include "morph3d/matchers.hpp"
#include "serialize.hpp"

namespace morph3d {

using nlohmann::json;

void LikelihoodConfig::validate() const {
  if (regions.empty()) throw Error(ErrorCode::InvalidConfig, "likelihood matcher needs at least one region");
  for (const auto& r : regions) {
    if (!(r.x0 < r.x1 && r.y0 < r.y1)) throw Error(ErrorCode::InvalidConfig, "region " + r.name + " is empty");
  }
  if (pca_dim < 1 || lda_dim < 1) throw Error(ErrorCode::InvalidConfig, "pca_dim and lda_dim must be >= 1");
  if (!(region_fmr > 0.0 && region_fmr < 1.0)) throw Error(ErrorCode::InvalidConfig, "region_fmr must lie in (0, 1)");
  if (holdout_every < 0) throw Error(ErrorCode::InvalidConfig, "holdout_every must be >= 0");
}

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct CellRect {
  int col0, row0, col1, row1;
  int cols() const { return col1 - col0; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(col1 - col0) * (row1 - row0); }
};

CellRect cells_of(const Region& r, const GridSpec& g) {
  auto first = [](double v, double o, double s) { return static_cast<int>(std::ceil((v - o) / s - 0.5)); };
  CellRect c{first(r.x0, g.origin_x, g.spacing_x), first(r.y0, g.origin_y, g.spacing_y),
             first(r.x1, g.origin_x, g.spacing_x), first(r.y1, g.origin_y, g.spacing_y)};
  c.col0 = std::clamp(c.col0, 0, g.width);
  c.col1 = std::clamp(c.col1, 0, g.width);
  c.row0 = std::clamp(c.row0, 0, g.height);
  c.row1 = std::clamp(c.row1, 0, g.height);
  if (c.col1 <= c.col0 || c.row1 <= c.row0) throw Error(ErrorCode::InvalidConfig, "region " + r.name + " lies outside the grid");
  return c;
}

// Raw region values, NaN for holes.
Vec region_values(const DepthMap& d, const CellRect& c) {
  Vec v(c.size());
  Eigen::Index k = 0;
  for (int r = c.row0; r < c.row1; ++r)
    for (int col = c.col0; col < c.col1; ++col) v[k++] = d.at(col, r);
  return v;
}

Vec imputed(const DepthMap& d, const CellRect& c, const Vec& fill) {
  Vec v = region_values(d, c);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::isnan(v[i])) v[i] = fill[i];
  return v;
}

// Columns of the generalized eigenproblem a v = l b v, largest l first.
void generalized_eig(const Mat& a, const Mat& b, Vec& values, Mat& vectors) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(a, b);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::InsufficientTraining, "generalized eigenproblem failed");
  values = es.eigenvalues().reverse();
  vectors = es.eigenvectors().rowwise().reverse();
}

Mat regularized(Mat s) {
  const double ridge = 1e-6 * std::max(s.trace() / static_cast<double>(s.rows()), 1e-12);
  s.diagonal().array() += ridge;
  return s;
}

struct Sample {
  int subject;  // index into the sorted subject list
  const DepthMap* depth;
};

LikelihoodMatcher::RegionModel train_region(const Region& region, const CellRect& rect, const std::vector<Sample>& fit,
                                            const std::vector<Sample>& held, const LikelihoodConfig& cfg) {
  LikelihoodMatcher::RegionModel m;
  m.name = region.name;
  m.col0 = rect.col0;
  m.row0 = rect.row0;
  m.col1 = rect.col1;
  m.row1 = rect.row1;
  const Eigen::Index dim = rect.size();
  const auto n = static_cast<Eigen::Index>(fit.size());

  // Per-cell imputation value: mean over fit samples that observe the cell.
  Mat raw(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) raw.row(i) = region_values(*fit[static_cast<std::size_t>(i)].depth, rect).transpose();
  m.fill = Vec::Constant(dim, std::numeric_limits<double>::quiet_NaN());
  double fill_sum = 0.0;
  int fill_n = 0;
  for (Eigen::Index j = 0; j < dim; ++j) {
    double s = 0.0;
    int k = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isnan(raw(i, j))) {
        s += raw(i, j);
        ++k;
      }
    }
    if (k > 0) {
      m.fill[j] = s / k;
      fill_sum += m.fill[j];
      ++fill_n;
    }
  }
  m.mu = Vec::Zero(dim);
  m.proj = Mat::Zero(0, dim);
  if (fill_n == 0) {
    m.fill.setZero();
    m.degenerate = true;
    return m;
  }
  for (Eigen::Index j = 0; j < dim; ++j)
    if (std::isnan(m.fill[j])) m.fill[j] = fill_sum / fill_n;

  Mat x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) x(i, j) = std::isnan(raw(i, j)) ? m.fill[j] : raw(i, j);
  m.mu = x.colwise().mean().transpose();
  x.rowwise() -= m.mu.transpose();

  // PCA.
  Eigen::BDCSVD<Mat> svd(x, Eigen::ComputeThinV);
  const Vec sv = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > 1e-9 * std::max(sv[0], 1e-300)) ++rank;
  const Eigen::Index p = std::min<Eigen::Index>({cfg.pca_dim, rank, n - 1});
  if (p < 1) {
    m.degenerate = true;
    return m;
  }
  const Mat pca = svd.matrixV().leftCols(p);
  const Mat y = x * pca;

  // LDA.
  std::map<int, std::vector<Eigen::Index>> classes;
  for (Eigen::Index i = 0; i < n; ++i) classes[fit[static_cast<std::size_t>(i)].subject].push_back(i);
  Mat sw = Mat::Zero(p, p), sb = Mat::Zero(p, p);
  const Vec grand = y.colwise().mean().transpose();
  for (const auto& [cls, rows] : classes) {
    Vec mc = Vec::Zero(p);
    for (auto r : rows) mc += y.row(r).transpose();
    mc /= static_cast<double>(rows.size());
    for (auto r : rows) {
      const Vec d = y.row(r).transpose() - mc;
      sw += d * d.transpose();
    }
    sb += static_cast<double>(rows.size()) * (mc - grand) * (mc - grand).transpose();
  }
  const Eigen::Index l =
      std::min<Eigen::Index>({cfg.lda_dim, static_cast<Eigen::Index>(classes.size()) - 1, p});
  Vec lda_vals;
  Mat lda_vecs;
  generalized_eig(sb, regularized(sw), lda_vals, lda_vecs);
  const Mat lda = lda_vecs.leftCols(l);
  const Mat f = y * lda;  // n x l

  // Zero-mean Gaussian models of feature differences.
  Mat cw = Mat::Zero(l, l), cb = Mat::Zero(l, l);
  std::size_t nw = 0, nb = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Vec d = (f.row(i) - f.row(j)).transpose();
      if (fit[static_cast<std::size_t>(i)].subject == fit[static_cast<std::size_t>(j)].subject) {
        cw += d * d.transpose();
        ++nw;
      } else {
        cb += d * d.transpose();
        ++nb;
      }
    }
  }
  if (nw == 0 || nb == 0) throw Error(ErrorCode::InsufficientTraining, "need genuine and impostor training pairs");
  cw /= static_cast<double>(nw);
  cb /= static_cast<double>(nb);
  Vec lambda;
  Mat joint;
  generalized_eig(cb, regularized(cw), lambda, joint);

  // LLR(d) = sum over lambda > 1 of 0.5 log(lambda) - 0.5 (1 - 1/lambda) u^2,
  // maximal at d = 0.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    if (lambda[i] > 1.0 + 1e-9) keep.push_back(i);
  if (keep.empty()) {
    m.degenerate = true;
    return m;
  }
  Mat out(static_cast<Eigen::Index>(keep.size()), l);
  m.llr_max = 0.0;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const double lam = lambda[keep[k]];
    m.llr_max += 0.5 * std::log(lam);
    out.row(static_cast<Eigen::Index>(k)) = std::sqrt(0.5 * (1.0 - 1.0 / lam)) * joint.col(keep[k]).transpose();
  }
  m.proj = out * lda.transpose() * pca.transpose();

  // Vote threshold from held-out impostor pairs.
  std::vector<Vec> g;
  for (const auto& s : held) g.push_back(m.proj * (imputed(*s.depth, rect, m.fill) - m.mu));
  std::vector<double> llr;
  for (std::size_t i = 0; i < held.size(); ++i)
    for (std::size_t j = i + 1; j < held.size(); ++j)
      if (held[i].subject != held[j].subject) llr.push_back(m.llr_max - (g[i] - g[j]).squaredNorm());
  if (llr.empty()) throw Error(ErrorCode::InsufficientTraining, "no held-out impostor pairs");
  std::sort(llr.begin(), llr.end(), std::greater<>());
  const auto allowed = static_cast<std::size_t>(std::floor(cfg.region_fmr * static_cast<double>(llr.size())));
  m.threshold = allowed < llr.size() ? llr[allowed] : -std::numeric_limits<double>::max();
  return m;
}

}  // namespace

LikelihoodMatcher train_likelihood_matcher(const std::vector<LabeledDepthMap>& training, const LikelihoodConfig& cfg) {
  cfg.validate();
  if (training.empty()) throw Error(ErrorCode::InsufficientTraining, "empty training set");
  for (std::size_t i = 1; i < training.size(); ++i) require_same_grid(training[0].depth, training[i].depth, "training");

  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < training.size(); ++i) by_subject[training[i].subject].push_back(i);
  int multi = 0;
  for (const auto& [id, idx] : by_subject) multi += idx.size() >= 2 ? 1 : 0;
  if (multi < 2) throw Error(ErrorCode::InsufficientTraining, "need >= 2 subjects with >= 2 samples each");

  std::vector<Sample> fit, held;
  int s = 0, fit_multi = 0;
  std::vector<int> held_subjects;
  for (const auto& [id, idx] : by_subject) {
    const bool hold = cfg.holdout_every > 0 && s % cfg.holdout_every == cfg.holdout_every - 1;
    for (auto i : idx) (hold ? held : fit).push_back({s, &training[i].depth});
    if (hold) held_subjects.push_back(s);
    else fit_multi += idx.size() >= 2 ? 1 : 0;
    ++s;
  }
  // Too few subjects to split: fit and threshold on the full set.
  if (fit_multi < 2 || held_subjects.size() < 2) {
    fit.clear();
    s = 0;
    for (const auto& [id, idx] : by_subject) {
      for (auto i : idx) fit.push_back({s, &training[i].depth});
      ++s;
    }
    held = fit;
  }

  LikelihoodMatcher m;
  m.grid_ = training[0].depth.grid();
  for (const auto& r : cfg.regions) m.regions_.push_back(train_region(r, cells_of(r, m.grid_), fit, held, cfg));
  return m;
}

LikelihoodMatcher::Features LikelihoodMatcher::features(const DepthMap& d) const {
  if (!(d.grid() == grid_)) throw Error(ErrorCode::GridMismatch, "likelihood matcher: depth map is on a different grid");
  Features f;
  f.reserve(regions_.size());
  for (const auto& r : regions_) {
    if (r.degenerate) {
      f.emplace_back();
      continue;
    }
    const CellRect rect{r.col0, r.row0, r.col1, r.row1};
    f.push_back(r.proj * (imputed(d, rect, r.fill) - r.mu));
  }
  return f;
}

double LikelihoodMatcher::region_llr(int region, const Features& a, const Features& b) const {
  const auto& r = regions_.at(static_cast<std::size_t>(region));
  if (r.degenerate) return 0.0;
  return r.llr_max - (a[static_cast<std::size_t>(region)] - b[static_cast<std::size_t>(region)]).squaredNorm();
}

double LikelihoodMatcher::score(const Features& a, const Features& b) const {
  if (a.size() != regions_.size() || b.size() != regions_.size()) {
    throw Error(ErrorCode::LengthMismatch, "feature blocks do not match the region count");
  }
  int votes = 0;
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    const auto& r = regions_[i];
    if (r.degenerate || r.llr_max - (a[i] - b[i]).squaredNorm() > r.threshold) ++votes;
  }
  return votes;
}

double LikelihoodMatcher::score(const DepthMap& probe, const DepthMap& gallery) const {
  return score(features(probe), features(gallery));
}

ScoreRecord score_likelihood(const LikelihoodMatcher& model, const DepthMap& probe, const DepthMap& gallery,
                             const std::string& probe_id, const std::string& gallery_id) {
  return {probe_id, gallery_id, LikelihoodMatcher::kName, Polarity::Similarity, model.score(probe, gallery)};
}

namespace {

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void LikelihoodMatcher::save(std::ostream& out) const {
  json j;
  j["format"] = "morph3d.likelihood_matcher";
  j["version"] = kFormatVersion;
  j["grid"] = detail::grid_to_json(grid_);
  json regions = json::array();
  for (const auto& r : regions_) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < r.proj.rows(); ++i) rows.push_back(vec_json(r.proj.row(i).transpose()));
    regions.push_back({{"name", r.name},
                       {"cells", {r.col0, r.row0, r.col1, r.row1}},
                       {"degenerate", r.degenerate},
                       {"fill", vec_json(r.fill)},
                       {"mu", vec_json(r.mu)},
                       {"proj", std::move(rows)},
                       {"llr_max", r.llr_max},
                       {"threshold", r.threshold}});
  }
  j["regions"] = std::move(regions);
  out << j.dump() << '\n';
}

void LikelihoodMatcher::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  save(out);
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

LikelihoodMatcher LikelihoodMatcher::load(std::istream& in) {
  LikelihoodMatcher m;
  try {
    const json j = json::parse(in);
    if (j.at("format") != "morph3d.likelihood_matcher") throw Error(ErrorCode::MalformedFile, "not a likelihood matcher file");
    if (j.at("version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::UnsupportedFormat, "unsupported likelihood matcher version " + j.at("version").dump());
    }
    m.grid_ = detail::grid_from_json(j.at("grid"));
    for (const auto& jr : j.at("regions")) {
      RegionModel r;
      r.name = jr.at("name").get<std::string>();
      const auto cells = jr.at("cells").get<std::vector<int>>();
      if (cells.size() != 4) throw Error(ErrorCode::MalformedFile, "region cells must have 4 entries");
      r.col0 = cells[0];
      r.row0 = cells[1];
      r.col1 = cells[2];
      r.row1 = cells[3];
      if (r.col0 < 0 || r.row0 < 0 || r.col1 > m.grid_.width || r.row1 > m.grid_.height || r.col0 >= r.col1 ||
          r.row0 >= r.row1) {
        throw Error(ErrorCode::MalformedFile, "region " + r.name + " lies outside the grid");
      }
      const Eigen::Index dim = static_cast<Eigen::Index>(r.col1 - r.col0) * (r.row1 - r.row0);
      r.degenerate = jr.at("degenerate").get<bool>();
      r.fill = json_vec(jr.at("fill"));
      r.mu = json_vec(jr.at("mu"));
      const auto& rows = jr.at("proj");
      r.proj.resize(static_cast<Eigen::Index>(rows.size()), dim);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const Vec row = json_vec(rows[i]);
        if (row.size() != dim) throw Error(ErrorCode::MalformedFile, "projection row length mismatch");
        r.proj.row(static_cast<Eigen::Index>(i)) = row.transpose();
      }
      if (r.fill.size() != dim || r.mu.size() != dim) throw Error(ErrorCode::MalformedFile, "region vector length mismatch");
      r.llr_max = jr.at("llr_max").get<double>();
      r.threshold = jr.at("threshold").get<double>();
      m.regions_.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("likelihood matcher: ") + e.what());
  }
  return m;
}

LikelihoodMatcher LikelihoodMatcher::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  return load(in);
}

}  // namespace morph3d
