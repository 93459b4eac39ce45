#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "morph3d/depth_map.hpp"

namespace morph3d {

/// Model coefficients in units of per-component standard deviations.
using CoefficientVector = Eigen::VectorXd;

/// Linear PCA model over registered depth maps. Correspondence is the shared
/// grid; cells that are HOLE in any training face are outside the support.
class ShapeModel {
 public:
  static constexpr int kFormatVersion = 1;

  ShapeModel() = default;

  const GridSpec& grid() const { return grid_; }
  int k() const { return static_cast<int>(sigmas_.size()); }
  /// Mean face; HOLE outside the support.
  const DepthMap& mean() const { return mean_; }
  /// Grid indices of the support cells, ascending.
  const std::vector<std::size_t>& support() const { return support_; }
  /// support().size() x k, orthonormal columns.
  const Eigen::MatrixXd& basis() const { return basis_; }
  const std::vector<double>& sigmas() const { return sigmas_; }
  double total_variance() const { return total_variance_; }
  int training_count() const { return training_count_; }

  /// Component i as a depth map (HOLE outside the support).
  DepthMap component(int i) const;
  /// sigma_i^2 / total variance of the training set.
  std::vector<double> explained_variance_ratio() const;

  void save(const std::string& path) const;
  void save(std::ostream& out) const;
  static ShapeModel load(const std::string& path);
  static ShapeModel load(std::istream& in);

 private:
  friend ShapeModel build_model(const std::vector<DepthMap>& faces, int k);

  GridSpec grid_;
  DepthMap mean_;
  std::vector<std::size_t> support_;
  Eigen::MatrixXd basis_;
  std::vector<double> sigmas_;
  double total_variance_ = 0.0;
  int training_count_ = 0;
};

/// PCA of the mean-centred faces over the joint support. Requires >= 2 faces
/// on one grid and 1 <= k <= faces - 1 with k non-degenerate components.
/// Component signs: the first entry of magnitude > 1e-12 is positive.
ShapeModel build_model(const std::vector<DepthMap>& faces, int k);

/// Least-squares projection of (face - mean) onto the basis over the support
/// cells the face observes.
CoefficientVector fit_coefficients(const ShapeModel& model, const DepthMap& face);

/// mean + sum c_i sigma_i component_i on the support; HOLE elsewhere.
DepthMap reconstruct(const ShapeModel& model, const CoefficientVector& c);

}  // namespace morph3d
