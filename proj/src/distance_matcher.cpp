#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "morph3d/error.hpp"
#include "morph3d/matchers.hpp"

namespace morph3d {

void DistanceConfig::validate() const {
  if (patches < 1 || bins < 2) throw Error(ErrorCode::InvalidConfig, "distance matcher needs patches >= 1 and bins >= 2");
  if (!(smooth_sigma_mm >= 0.0)) throw Error(ErrorCode::InvalidConfig, "smoothing sigma must be >= 0");
  if (!(window_x0 < window_x1 && window_y0 < window_y1)) throw Error(ErrorCode::InvalidConfig, "empty descriptor window");
}

namespace {

constexpr double kPi = std::numbers::pi;

// Hole-aware separable Gaussian; holes stay holes.
std::vector<double> smooth(const DepthMap& d, double sigma_mm) {
  const auto& g = d.grid();
  std::vector<double> z(d.cells());
  if (sigma_mm <= 0.0) return z;
  auto pass = [&](const std::vector<double>& in, bool along_x) {
    const double sigma = sigma_mm / (along_x ? g.spacing_x : g.spacing_y);
    const int rad = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> w(static_cast<std::size_t>(2 * rad + 1));
    for (int k = -rad; k <= rad; ++k) w[static_cast<std::size_t>(k + rad)] = std::exp(-0.5 * k * k / (sigma * sigma));
    std::vector<double> out(in.size(), DepthMap::kHole);
    for (int r = 0; r < g.height; ++r) {
      for (int c = 0; c < g.width; ++c) {
        const double center = in[g.index(c, r)];
        if (std::isnan(center)) continue;
        double s = 0.0, ws = 0.0;
        for (int k = -rad; k <= rad; ++k) {
          const int cc = along_x ? c + k : c, rr = along_x ? r : r + k;
          if (cc < 0 || cc >= g.width || rr < 0 || rr >= g.height) continue;
          const double v = in[g.index(cc, rr)];
          if (std::isnan(v)) continue;
          s += w[static_cast<std::size_t>(k + rad)] * v;
          ws += w[static_cast<std::size_t>(k + rad)];
        }
        out[g.index(c, r)] = s / ws;
      }
    }
    return out;
  };
  return pass(pass(z, true), false);
}

// Linear vote split between the two nearest bin centres.
void vote_linear(double* hist, int bins, double t, double weight) {
  const double f = std::clamp(t, 0.0, 1.0) * bins - 0.5;
  const int b0 = static_cast<int>(std::floor(f));
  const double frac = f - b0;
  if (b0 >= 0) hist[b0] += weight * (1.0 - frac);
  else hist[0] += weight * (1.0 - frac);
  if (b0 + 1 < bins) hist[b0 + 1] += weight * frac;
  else hist[bins - 1] += weight * frac;
}

void vote_circular(double* hist, int bins, double angle, double weight) {
  double f = (angle + kPi) / (2.0 * kPi) * bins - 0.5;
  f = std::fmod(f + bins, static_cast<double>(bins));
  const int b0 = static_cast<int>(std::floor(f));
  const double frac = f - b0;
  hist[b0 % bins] += weight * (1.0 - frac);
  hist[(b0 + 1) % bins] += weight * frac;
}

}  // namespace

Eigen::VectorXd distance_descriptor(const DepthMap& d, const DistanceConfig& cfg) {
  cfg.validate();
  const auto& g = d.grid();
  const std::vector<double> z = smooth(d, cfg.smooth_sigma_mm);
  const double hx = g.spacing_x, hy = g.spacing_y;
  const int p = cfg.patches, nb = cfg.bins;
  const int per_patch = 2 * nb;
  Eigen::MatrixXd hist = Eigen::MatrixXd::Zero(per_patch, p * p);
  std::vector<int> count(static_cast<std::size_t>(p * p), 0);

  auto at = [&](int c, int r) { return z[g.index(c, r)]; };
  for (int r = 1; r + 1 < g.height; ++r) {
    const double y = g.center_y(r);
    if (y < cfg.window_y0 || y >= cfg.window_y1) continue;
    const int pr = std::min(p - 1, static_cast<int>((y - cfg.window_y0) / (cfg.window_y1 - cfg.window_y0) * p));
    for (int c = 1; c + 1 < g.width; ++c) {
      const double x = g.center_x(c);
      if (x < cfg.window_x0 || x >= cfg.window_x1) continue;
      bool ok = true;
      for (int dr = -1; dr <= 1 && ok; ++dr)
        for (int dc = -1; dc <= 1 && ok; ++dc) ok = !std::isnan(at(c + dc, r + dr));
      if (!ok) continue;
      const int pc = std::min(p - 1, static_cast<int>((x - cfg.window_x0) / (cfg.window_x1 - cfg.window_x0) * p));

      const double z0 = at(c, r);
      const double zx = (at(c + 1, r) - at(c - 1, r)) / (2 * hx);
      const double zy = (at(c, r + 1) - at(c, r - 1)) / (2 * hy);
      const double zxx = (at(c + 1, r) - 2 * z0 + at(c - 1, r)) / (hx * hx);
      const double zyy = (at(c, r + 1) - 2 * z0 + at(c, r - 1)) / (hy * hy);
      const double zxy = (at(c + 1, r + 1) - at(c + 1, r - 1) - at(c - 1, r + 1) + at(c - 1, r - 1)) / (4 * hx * hy);

      // Principal curvatures of the Monge patch z(x, y).
      const double q = 1.0 + zx * zx + zy * zy;
      const double sq = std::sqrt(q);
      const double e = 1.0 + zx * zx, f = zx * zy, gg = 1.0 + zy * zy;
      const double l = zxx / sq, m = zxy / sq, n = zyy / sq;
      const double det = e * gg - f * f;
      const double h = (e * n - 2 * f * m + gg * l) / (2 * det);
      const double k = (l * n - m * m) / det;
      const double disc = std::sqrt(std::max(h * h - k, 0.0));
      const double k1 = h + disc, k2 = h - disc;
      // Shape index in [0, 1]: 0 cup, 0.5 saddle, 1 cap.
      const double si = 0.5 - std::atan2(k1 + k2, k1 - k2) / kPi;

      const double nx = -zx / sq, ny = -zy / sq;
      const double tilt = std::hypot(nx, ny);

      const int patch = pr * p + pc;
      double* col = hist.col(patch).data();
      vote_linear(col, nb, si, 1.0);
      if (tilt > 0.0) vote_circular(col + nb, nb, std::atan2(ny, nx), tilt);
      ++count[static_cast<std::size_t>(patch)];
    }
  }

  // Per-patch normalisation; empty patches take the mean of the others.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(per_patch);
  int filled = 0;
  for (int i = 0; i < p * p; ++i) {
    if (count[static_cast<std::size_t>(i)] == 0) continue;
    hist.col(i) /= count[static_cast<std::size_t>(i)];
    mean += hist.col(i);
    ++filled;
  }
  if (filled == 0) throw Error(ErrorCode::DegenerateDescriptor, "no descriptor patch has valid data");
  mean /= filled;
  for (int i = 0; i < p * p; ++i)
    if (count[static_cast<std::size_t>(i)] == 0) hist.col(i) = mean;

  Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(hist.data(), hist.size());
  const double norm = v.norm();
  if (!(norm > 0.0)) throw Error(ErrorCode::DegenerateDescriptor, "descriptor is the zero vector");
  return v / norm;
}

double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) throw Error(ErrorCode::LengthMismatch, "descriptor lengths differ");
  const double nu = u.norm(), nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0)) throw Error(ErrorCode::DegenerateDescriptor, "zero descriptor");
  const double c = u.dot(v) / (nu * nv);
  return std::clamp(1.0 - c, 0.0, 2.0);
}

ScoreRecord score_distance(const DepthMap& probe, const DepthMap& gallery, const DistanceConfig& cfg,
                           const std::string& probe_id, const std::string& gallery_id) {
  require_same_grid(probe, gallery, "score_distance");
  return {probe_id, gallery_id, kDistanceMatcherName, Polarity::Distance,
          cosine_distance(distance_descriptor(probe, cfg), distance_descriptor(gallery, cfg))};
}

}  // namespace morph3d
