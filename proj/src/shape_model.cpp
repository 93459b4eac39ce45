#include "morph3d/shape_model.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <json.hpp>

#include "morph3d/error.hpp"
#include "serialize.hpp"

namespace morph3d {

using nlohmann::json;

ShapeModel build_model(const std::vector<DepthMap>& faces, int k) {
  if (faces.size() < 2) throw Error(ErrorCode::InsufficientData, "build_model needs at least 2 faces");
  for (std::size_t i = 1; i < faces.size(); ++i) require_same_grid(faces[0], faces[i], "build_model");
  const auto n = static_cast<int>(faces.size());
  if (k < 1 || k > n - 1) {
    throw Error(ErrorCode::InsufficientData,
                "k=" + std::to_string(k) + " outside [1, " + std::to_string(n - 1) + "]");
  }

  ShapeModel m;
  m.grid_ = faces[0].grid();
  for (std::size_t c = 0; c < faces[0].size(); ++c) {
    bool all = true;
    for (const auto& f : faces) all = all && !f.is_hole(c);
    if (all) m.support_.push_back(c);
  }
  if (m.support_.empty()) throw Error(ErrorCode::InsufficientData, "training faces share no valid cell");
  const auto s = static_cast<Eigen::Index>(m.support_.size());

  Eigen::MatrixXd x(n, s);
  for (int i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < s; ++j) x(i, j) = faces[i].at(m.support_[j]);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double scale = std::sqrt(static_cast<double>(n - 1));
  m.total_variance_ = sv.squaredNorm() / (n - 1);
  const double floor = 1e-9 * std::max(1.0, sv.size() > 0 ? sv[0] : 0.0);
  if (sv.size() < k || !(sv[k - 1] > floor)) {
    throw Error(ErrorCode::InsufficientData, "training set has fewer than k non-degenerate components");
  }

  m.basis_ = svd.matrixV().leftCols(k);
  for (int i = 0; i < k; ++i) {
    auto col = m.basis_.col(i);
    for (Eigen::Index j = 0; j < s; ++j) {
      if (std::abs(col[j]) > 1e-12) {
        if (col[j] < 0) col = -col;
        break;
      }
    }
    m.sigmas_.push_back(sv[i] / scale);
  }

  m.mean_ = DepthMap(m.grid_);
  for (Eigen::Index j = 0; j < s; ++j) m.mean_.set(m.support_[j], mu[j]);
  m.training_count_ = n;
  return m;
}

DepthMap ShapeModel::component(int i) const {
  if (i < 0 || i >= k()) throw Error(ErrorCode::LengthMismatch, "component index out of range");
  DepthMap d(grid_);
  for (std::size_t j = 0; j < support_.size(); ++j) d.set(support_[j], basis_(static_cast<Eigen::Index>(j), i));
  return d;
}

std::vector<double> ShapeModel::explained_variance_ratio() const {
  std::vector<double> out;
  for (double s : sigmas_) out.push_back(total_variance_ > 0.0 ? s * s / total_variance_ : 0.0);
  return out;
}

CoefficientVector fit_coefficients(const ShapeModel& model, const DepthMap& face) {
  require_same_grid(model.mean(), face, "fit_coefficients");
  const auto& sup = model.support();
  const auto s = static_cast<Eigen::Index>(sup.size());
  Eigen::VectorXd r(s);
  std::vector<Eigen::Index> observed;
  observed.reserve(sup.size());
  for (Eigen::Index j = 0; j < s; ++j) {
    const auto c = sup[static_cast<std::size_t>(j)];
    if (face.is_hole(c)) continue;
    r[j] = face.at(c) - model.mean().at(c);
    observed.push_back(j);
  }

  Eigen::VectorXd y;
  if (static_cast<Eigen::Index>(observed.size()) == s) {
    y = model.basis().transpose() * r;
  } else {
    const auto o = static_cast<Eigen::Index>(observed.size());
    Eigen::MatrixXd b(o, model.k());
    Eigen::VectorXd ro(o);
    for (Eigen::Index i = 0; i < o; ++i) {
      b.row(i) = model.basis().row(observed[static_cast<std::size_t>(i)]);
      ro[i] = r[observed[static_cast<std::size_t>(i)]];
    }
    y = o > 0 ? Eigen::VectorXd(b.completeOrthogonalDecomposition().solve(ro)) : Eigen::VectorXd::Zero(model.k());
  }
  for (int i = 0; i < model.k(); ++i) y[i] /= model.sigmas()[static_cast<std::size_t>(i)];
  return y;
}

DepthMap reconstruct(const ShapeModel& model, const CoefficientVector& c) {
  if (c.size() != model.k()) {
    throw Error(ErrorCode::LengthMismatch,
                "expected " + std::to_string(model.k()) + " coefficients, got " + std::to_string(c.size()));
  }
  if (!c.allFinite()) throw Error(ErrorCode::InvalidConfig, "coefficients must be finite");
  Eigen::VectorXd w(model.k());
  for (int i = 0; i < model.k(); ++i) w[i] = c[i] * model.sigmas()[static_cast<std::size_t>(i)];
  const Eigen::VectorXd delta = model.basis() * w;
  DepthMap out(model.grid());
  const auto& sup = model.support();
  for (std::size_t j = 0; j < sup.size(); ++j) {
    out.set(sup[j], model.mean().at(sup[j]) + delta[static_cast<Eigen::Index>(j)]);
  }
  return out;
}

void ShapeModel::save(std::ostream& out) const {
  json j;
  j["format"] = "morph3d.shape_model";
  j["version"] = kFormatVersion;
  j["grid"] = detail::grid_to_json(grid_);
  j["hole_policy"] = "union_exclusion";
  j["training_count"] = training_count_;
  j["total_variance"] = total_variance_;
  j["support"] = support_;
  std::vector<double> mean;
  for (auto c : support_) mean.push_back(mean_.at(c));
  j["mean"] = mean;
  j["sigmas"] = sigmas_;
  json comps = json::array();
  for (int i = 0; i < k(); ++i) {
    const Eigen::VectorXd col = basis_.col(i);
    comps.push_back(std::vector<double>(col.data(), col.data() + col.size()));
  }
  j["components"] = std::move(comps);
  out << j.dump() << '\n';
}

void ShapeModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  save(out);
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

ShapeModel ShapeModel::load(std::istream& in) {
  ShapeModel m;
  try {
    const json j = json::parse(in);
    if (j.at("format") != "morph3d.shape_model") throw Error(ErrorCode::MalformedFile, "not a shape model file");
    if (j.at("version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::UnsupportedFormat, "unsupported shape model version " + j.at("version").dump());
    }
    m.grid_ = detail::grid_from_json(j.at("grid"));
    m.training_count_ = j.at("training_count").get<int>();
    m.total_variance_ = j.at("total_variance").get<double>();
    m.support_ = j.at("support").get<std::vector<std::size_t>>();
    const auto mean = j.at("mean").get<std::vector<double>>();
    m.sigmas_ = j.at("sigmas").get<std::vector<double>>();
    const auto& comps = j.at("components");
    if (mean.size() != m.support_.size() || comps.size() != m.sigmas_.size()) {
      throw Error(ErrorCode::MalformedFile, "shape model arrays have inconsistent lengths");
    }
    m.mean_ = DepthMap(m.grid_);
    for (std::size_t i = 0; i < m.support_.size(); ++i) {
      if (m.support_[i] >= m.grid_.cell_count()) throw Error(ErrorCode::MalformedFile, "support index out of range");
      m.mean_.set(m.support_[i], mean[i]);
    }
    m.basis_.resize(static_cast<Eigen::Index>(m.support_.size()), static_cast<Eigen::Index>(m.sigmas_.size()));
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const auto col = comps[i].get<std::vector<double>>();
      if (col.size() != m.support_.size()) throw Error(ErrorCode::MalformedFile, "component length mismatch");
      for (std::size_t r = 0; r < col.size(); ++r) {
        m.basis_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = col[r];
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("shape model: ") + e.what());
  }
  return m;
}

ShapeModel ShapeModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  return load(in);
}

}  // namespace morph3d
