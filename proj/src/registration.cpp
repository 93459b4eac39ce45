#include "morph3d/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "morph3d/error.hpp"

namespace morph3d {

void RegistrationConfig::validate() const {
  if (!(roi_radius_mm > 0.0)) throw Error(ErrorCode::InvalidConfig, "roi radius must be positive");
  if (!(search_angle_deg > 0.0 && search_angle_deg <= 60.0)) throw Error(ErrorCode::InvalidConfig, "search angle must lie in (0, 60]");
  if (!(search_offset_mm > 0.0)) throw Error(ErrorCode::InvalidConfig, "search offset must be positive");
  if (!(symmetry_cell_mm > 0.0)) throw Error(ErrorCode::InvalidConfig, "symmetry cell size must be positive");
  if (max_search_points < 100) throw Error(ErrorCode::InvalidConfig, "max_search_points must be >= 100");
  if (!(profile_band_mm > 0.0 && prominence_window_mm > 0.0 && bridge_arc_mm > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "profile parameters must be positive");
  }
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<Vec3> valid_points(const TriMesh& mesh) {
  std::vector<Vec3> pts;
  pts.reserve(mesh.vertex_count());
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i)
    if (mesh.valid(i)) pts.push_back(mesh.vertices()[i]);
  return pts;
}

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

double median_of(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Rotation whose first column is the candidate plane normal.
Mat3 candidate_rotation(double yaw_deg, double roll_deg) {
  return (Eigen::AngleAxisd(roll_deg * kDeg, Vec3::UnitZ()) * Eigen::AngleAxisd(yaw_deg * kDeg, Vec3::UnitY()))
      .toRotationMatrix();
}

// Mirror-mismatch objective on a coarse depth grid symmetric about x' = 0.
class MirrorScorer {
 public:
  MirrorScorer(std::vector<Vec3> centered, double cell) : pts_(std::move(centered)), cell_(cell) {
    half_x_ = static_cast<int>(std::ceil(110.0 / cell_));
    half_y_ = static_cast<int>(std::ceil(140.0 / cell_));
    nx_ = 2 * half_x_;
    ny_ = 2 * half_y_;
    cells_.assign(static_cast<std::size_t>(nx_) * ny_, Cell{});
    x_hi_ = nx_ - 1;
    y_hi_ = ny_ - 1;
  }

  double operator()(double yaw, double roll, double offset) {
    const Mat3 rt = candidate_rotation(yaw, roll).transpose();
    // Only the box touched by the previous call needs clearing.
    for (int r = y_lo_; r <= y_hi_; ++r) {
      const auto row = static_cast<std::size_t>(r) * nx_;
      std::fill(cells_.begin() + row + x_lo_, cells_.begin() + row + x_hi_ + 1, Cell{});
    }
    x_lo_ = nx_;
    y_lo_ = ny_;
    x_hi_ = y_hi_ = -1;
    // Bilinear splat onto cell centers so the estimate does not depend on
    // where the samples happen to fall inside a cell.
    for (const auto& p : pts_) {
      const Vec3 q = rt * p;
      const double fx = (q.x() - offset) / cell_ + half_x_ - 0.5;
      const double fy = q.y() / cell_ + half_y_ - 0.5;
      const double x0 = std::floor(fx), y0 = std::floor(fy);
      if (x0 < 0 || x0 + 1 >= nx_ || y0 < 0 || y0 + 1 >= ny_) continue;
      const int ix = static_cast<int>(x0), iy = static_cast<int>(y0);
      x_lo_ = std::min(x_lo_, ix);
      x_hi_ = std::max(x_hi_, ix + 1);
      y_lo_ = std::min(y_lo_, iy);
      y_hi_ = std::max(y_hi_, iy + 1);
      const double tx = fx - x0, ty = fy - y0;
      Cell* k = &cells_[static_cast<std::size_t>(iy) * nx_ + static_cast<std::size_t>(ix)];
      const double w00 = (1 - tx) * (1 - ty), w10 = tx * (1 - ty), w01 = (1 - tx) * ty, w11 = tx * ty;
      k[0].add(w00, q.z());
      k[1].add(w10, q.z());
      k[nx_].add(w01, q.z());
      k[nx_ + 1].add(w11, q.z());
    }
    if (x_hi_ < 0) return std::numeric_limits<double>::infinity();
    // Unpaired cells cost the cap, so sliding the cloud off its mirror
    // image is never cheaper than a poor overlap.
    constexpr double kCap2 = 10.0 * 10.0;
    const int c_lo = std::min(x_lo_, nx_ - 1 - x_hi_);
    double acc = 0.0;
    std::size_t joint = 0, unpaired = 0;
    for (int r = y_lo_; r <= y_hi_; ++r) {
      const std::size_t row = static_cast<std::size_t>(r) * nx_;
      for (int c = c_lo; c < half_x_; ++c) {
        const Cell& a = cells_[row + c];
        const Cell& b = cells_[row + (nx_ - 1 - c)];
        const bool va = a.w > 0.25, vb = b.w > 0.25;
        if (va != vb) ++unpaired;
        if (!va || !vb) continue;
        const double d = a.z / a.w - b.z / b.w;
        acc += std::min(d * d, kCap2);
        ++joint;
      }
    }
    if (joint == 0) return std::numeric_limits<double>::infinity();
    return std::sqrt((acc + kCap2 * static_cast<double>(unpaired)) / static_cast<double>(joint + unpaired));
  }

 private:
  std::vector<Vec3> pts_;
  double cell_;
  struct Cell {
    double w = 0.0, z = 0.0;
    void add(double weight, double depth) {
      w += weight;
      z += weight * depth;
    }
  };
  int half_x_ = 0, half_y_ = 0, nx_ = 0, ny_ = 0;
  int x_lo_ = 0, x_hi_ = 0, y_lo_ = 0, y_hi_ = 0;
  std::vector<Cell> cells_;
};

struct Candidate {
  double yaw = 0.0, roll = 0.0, offset = 0.0, score = std::numeric_limits<double>::infinity();
};

Candidate grid_search(MirrorScorer& score, const Candidate& around, double angle_span, double angle_step,
                      double offset_span, double offset_step) {
  Candidate best;
  const int na = static_cast<int>(std::lround(angle_span / angle_step));
  const int no = static_cast<int>(std::lround(offset_span / offset_step));
  // Sequential scan; strict improvement keeps the lowest-index candidate on ties.
  for (int i = -na; i <= na; ++i) {
    for (int j = -na; j <= na; ++j) {
      for (int k = -no; k <= no; ++k) {
        const double yaw = around.yaw + i * angle_step;
        const double roll = around.roll + j * angle_step;
        const double off = around.offset + k * offset_step;
        const double s = score(yaw, roll, off);
        if (s < best.score) best = {yaw, roll, off, s};
      }
    }
  }
  return best;
}

struct ProfilePoint {
  double y, z;
  double x = 0.0;  // lateral offset from the plane
};

// Points of the cloud within the band |x'| <= band of the symmetry plane,
// expressed in the plane frame (x' across, y' up, z' toward the sensor).
std::vector<ProfilePoint> band_points(const TriMesh& roi, const SymmetryPlane& plane, double band, const Mat3& rt) {
  std::vector<ProfilePoint> out;
  for (std::size_t i = 0; i < roi.vertex_count(); ++i) {
    if (!roi.valid(i)) continue;
    const Vec3 q = rt * (roi.vertices()[i] - plane.center);
    if (std::abs(q.x() - plane.offset_mm) <= band) out.push_back({q.y(), q.z(), q.x() - plane.offset_mm});
  }
  return out;
}

// Under strong pitch the nose underside can overhang, putting two layers in
// one profile bin. Keep points within `depth` of the bin's front-most point.
std::vector<ProfilePoint> front_layer(const std::vector<ProfilePoint>& pts, double step, double depth) {
  if (pts.empty()) return pts;
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) lo = std::min(lo, p.y);
  auto bin = [&](double y) { return static_cast<std::size_t>(std::floor((y - lo) / step)); };
  std::vector<double> top;
  for (const auto& p : pts) {
    const std::size_t b = bin(p.y);
    if (b >= top.size()) top.resize(b + 1, -std::numeric_limits<double>::infinity());
    top[b] = std::max(top[b], p.z);
  }
  std::vector<ProfilePoint> out;
  out.reserve(pts.size());
  for (const auto& p : pts)
    if (p.z >= top[bin(p.y)] - depth) out.push_back(p);
  return out;
}

// Binned and Gaussian-smoothed profile z(y); NaN where no data.
struct Profile {
  double y0 = 0.0;
  double step = 1.0;
  std::vector<double> z;

  double y_at(std::size_t i) const { return y0 + (static_cast<double>(i) + 0.5) * step; }
  double interp(double y) const {
    const double f = (y - y0) / step - 0.5;
    if (f < 0.0 || f > static_cast<double>(z.size() - 1)) return std::nan("");
    const auto i = static_cast<std::size_t>(std::floor(f));
    const double t = f - static_cast<double>(i);
    if (i + 1 >= z.size()) return z[i];
    return (1.0 - t) * z[i] + t * z[i + 1];
  }
};

Profile build_profile(const std::vector<ProfilePoint>& pts, double step, double sigma) {
  Profile prof;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : pts) {
    lo = std::min(lo, p.y);
    hi = std::max(hi, p.y);
  }
  prof.y0 = std::floor(lo / step) * step;
  prof.step = step;
  const auto n = static_cast<std::size_t>(std::floor((hi - prof.y0) / step)) + 1;
  std::vector<double> sum(n, 0.0), cnt(n, 0.0);
  for (const auto& p : pts) {
    const auto i = std::min(n - 1, static_cast<std::size_t>(std::floor((p.y - prof.y0) / step)));
    sum[i] += p.z;
    cnt[i] += 1.0;
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma / step));
  prof.z.assign(n, std::nan(""));
  // Empty bins inside the kernel support are filled by the smoother.
  for (std::size_t i = 0; i < n; ++i) {
    double ws = 0.0, zs = 0.0;
    for (int d = -radius; d <= radius; ++d) {
      const auto j = static_cast<std::ptrdiff_t>(i) + d;
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(n) || cnt[j] == 0.0) continue;
      const double w = std::exp(-0.5 * (d * step / sigma) * (d * step / sigma));
      ws += w * cnt[j];
      zs += w * sum[j];
    }
    if (ws > 1e-6) prof.z[i] = zs / ws;
  }
  return prof;
}

// Signed distance of (y, z) above the chord through the profile at
// y_c - w and y_c + w.
struct Chord {
  double ya, za, yb, zb;
  bool ok;
  double distance(double y, double z) const {
    const double dy = yb - ya, dz = zb - za;
    const double len = std::hypot(dy, dz);
    return (dy * (z - za) - dz * (y - ya)) / len;
  }
};

constexpr double kLocalChordMm = 6.0;
constexpr double kBridgeBandScale = 2.0;

Chord chord_at(const Profile& prof, double yc, double w) {
  const double za = prof.interp(yc - w);
  const double zb = prof.interp(yc + w);
  return {yc - w, za, yc + w, zb, !std::isnan(za) && !std::isnan(zb)};
}

}  // namespace

TriMesh extract_roi(const TriMesh& mesh, const RegistrationConfig& cfg) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "extract_roi: empty mesh");
  const auto pts = valid_points(mesh);
  if (pts.empty()) throw Error(ErrorCode::EmptyRoi, "mesh has no valid vertices");

  std::vector<double> xs, ys, zs;
  for (const auto& p : pts) {
    xs.push_back(p.x());
    ys.push_back(p.y());
    zs.push_back(p.z());
  }
  Vec3 center(median_of(xs), median_of(ys), median_of(zs));
  const double r2 = cfg.roi_radius_mm * cfg.roi_radius_mm;
  for (int it = 0; it < 50; ++it) {
    Vec3 acc = Vec3::Zero();
    std::size_t n = 0;
    for (const auto& p : pts) {
      if ((p - center).squaredNorm() <= r2) {
        acc += p;
        ++n;
      }
    }
    if (n == 0) break;
    const Vec3 next = acc / static_cast<double>(n);
    const double shift = (next - center).norm();
    center = next;
    if (shift < 1e-4) break;
  }

  std::vector<std::uint8_t> keep(mesh.vertex_count(), 0);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    if ((mesh.vertices()[i] - center).squaredNorm() <= r2) {
      keep[i] = 1;
      kept += mesh.valid(i) ? 1 : 0;
    }
  }
  if (kept < static_cast<std::size_t>(std::max(1, cfg.min_roi_vertices))) {
    throw Error(ErrorCode::EmptyRoi, "only " + std::to_string(kept) + " vertices near the dominant cluster");
  }
  return mesh.subset(keep);
}

SymmetryPlane find_symmetry_plane(const TriMesh& roi, const RegistrationConfig& cfg) {
  cfg.validate();
  const auto all = valid_points(roi);
  if (all.size() < 10) throw Error(ErrorCode::EmptyRoi, "find_symmetry_plane: ROI is empty");
  const Vec3 center = centroid(all);
  auto subsample = [&](std::size_t limit) {
    const std::size_t stride = (all.size() + limit - 1) / limit;
    std::vector<Vec3> out;
    for (std::size_t i = 0; i < all.size(); i += stride) out.push_back(all[i] - center);
    return out;
  };
  const auto n_search = static_cast<std::size_t>(cfg.max_search_points);

  // The coarse level only has to land in the basin: a sparse sample on
  // cells sized to keep several points per cell.
  MirrorScorer coarse(subsample(std::max<std::size_t>(100, n_search / 4)), 3.0 * cfg.symmetry_cell_mm);
  MirrorScorer score(subsample(n_search), cfg.symmetry_cell_mm);
  const double a = cfg.search_angle_deg, o = cfg.search_offset_mm;
  Candidate best = grid_search(coarse, {}, a, 5.0, o, 3.0);
  best = grid_search(score, best, 4.0, 1.0, 3.0, 0.5);
  // Finest level on every ROI point; a strided subsample is not mirror
  // symmetric and biases the plane by a few tenths of a degree.
  MirrorScorer fine(subsample(all.size()), cfg.symmetry_cell_mm);
  best = grid_search(fine, best, 0.8, 0.2, 0.5, 0.1);
  if (!(best.score <= cfg.reject_residual_mm)) {
    throw Error(ErrorCode::NoConvergence, "mirror residual " + std::to_string(best.score) + " mm exceeds bound");
  }

  SymmetryPlane plane;
  const Mat3 r = candidate_rotation(best.yaw, best.roll);
  plane.normal = r.col(0);
  plane.center = center;
  plane.point = center + best.offset * plane.normal;
  plane.residual_mm = best.score;
  plane.yaw_deg = best.yaw;
  plane.roll_deg = best.roll;
  plane.offset_mm = best.offset;
  return plane;
}

NoseFeatures detect_nose_features(const TriMesh& roi, const SymmetryPlane& plane, const RegistrationConfig& cfg) {
  const Mat3 r = candidate_rotation(plane.yaw_deg, plane.roll_deg);
  const Mat3 rt = r.transpose();
  const auto pts = front_layer(band_points(roi, plane, cfg.profile_band_mm, rt), 1.0, 3.0);
  if (pts.size() < 10) throw Error(ErrorCode::NoNoseFound, "too few points on the symmetry profile");
  const Profile prof = build_profile(pts, 1.0, 1.5);
  const double w = cfg.prominence_window_mm;

  // Coarse tip: bin with the largest protrusion above its local chord.
  double best_prom = -std::numeric_limits<double>::infinity();
  double tip_y = 0.0;
  for (std::size_t i = 0; i < prof.z.size(); ++i) {
    if (std::isnan(prof.z[i])) continue;
    const Chord ch = chord_at(prof, prof.y_at(i), w);
    if (!ch.ok) continue;
    const double d = ch.distance(prof.y_at(i), prof.z[i]);
    if (d > best_prom) {
      best_prom = d;
      tip_y = prof.y_at(i);
    }
  }
  if (!(best_prom >= cfg.prominence_floor_mm)) {
    throw Error(ErrorCode::NoNoseFound, "profile prominence " + std::to_string(best_prom) + " mm below floor");
  }

  // The wide chord plateaus along a flat dorsum; a short chord around the
  // coarse pick peaks on the rounded tip instead.
  {
    const double coarse_y = tip_y;
    double best_local = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < prof.z.size(); ++i) {
      const double y = prof.y_at(i);
      if (std::isnan(prof.z[i]) || std::abs(y - coarse_y) > 12.0) continue;
      const Chord ch = chord_at(prof, y, kLocalChordMm);
      if (!ch.ok) continue;
      const double d = ch.distance(y, prof.z[i]);
      if (d > best_local) {
        best_local = d;
        tip_y = y;
      }
    }
  }

  // Refine: cubic fit of the raw band points in chord-aligned coordinates.
  double tip_z = prof.interp(tip_y);
  if (std::isnan(tip_z)) throw Error(ErrorCode::NoNoseFound, "profile has a gap at the nose tip");
  for (int it = 0; it < 3; ++it) {
    const Chord ch = chord_at(prof, tip_y, w);
    if (!ch.ok) break;
    const double len = std::hypot(ch.yb - ch.ya, ch.zb - ch.za);
    const double cu = (ch.yb - ch.ya) / len, cv = (ch.zb - ch.za) / len;
    // u along the chord, v perpendicular (toward the sensor side).
    auto to_u = [&](double y, double z) { return cu * (y - tip_y) + cv * (z - tip_z); };
    auto to_v = [&](double y, double z) { return -cv * (y - tip_y) + cu * (z - tip_z); };
    // x^2 term absorbs the lateral fall-off across the band.
    // The cubic term covers the steep underside against the shallow dorsum.
    Eigen::Matrix<double, 5, 5> ata = Eigen::Matrix<double, 5, 5>::Zero();
    Eigen::Matrix<double, 5, 1> atb = Eigen::Matrix<double, 5, 1>::Zero();
    int n = 0;
    for (const auto& p : pts) {
      if (std::abs(p.y - tip_y) > 4.0) continue;
      const double u = to_u(p.y, p.z), v = to_v(p.y, p.z);
      Eigen::Matrix<double, 5, 1> row;
      row << 1.0, u, u * u, p.x * p.x, u * u * u;
      ata += row * row.transpose();
      atb += row * v;
      ++n;
    }
    if (n < 6) break;
    const Eigen::Matrix<double, 5, 1> coef = ata.ldlt().solve(atb);
    // Stationary point of c0 + c1 u + c2 u^2 + c4 u^3 nearest u = 0 with v'' < 0.
    const double c1 = coef[1], c2 = coef[2], c3 = coef[4];
    double us = std::numeric_limits<double>::quiet_NaN();
    if (std::abs(c3) < 1e-9) {
      if (c2 < 0.0) us = -c1 / (2.0 * c2);
    } else {
      const double disc = 4.0 * c2 * c2 - 12.0 * c3 * c1;
      if (disc >= 0.0) {
        for (double sgn : {-1.0, 1.0}) {
          const double root = (-2.0 * c2 + sgn * std::sqrt(disc)) / (6.0 * c3);
          if (2.0 * c2 + 6.0 * c3 * root < 0.0 && (std::isnan(us) || std::abs(root) < std::abs(us))) us = root;
        }
      }
    }
    if (std::isnan(us)) break;
    us = std::clamp(us, -3.0, 3.0);
    const double vs = coef[0] + us * (c1 + us * (c2 + us * c3));
    const double ny = tip_y + cu * us - cv * vs;
    const double nz = tip_z + cv * us + cu * vs;
    const bool done = std::abs(ny - tip_y) < 1e-4;
    tip_y = ny;
    tip_z = nz;
    if (done) break;
  }

  // Bridge: principal direction of the raw band points between 2 mm and
  // `bridge_arc_mm` from the tip on the upper side, then one correction
  // step in that frame with an x^2 term for the lateral fall-off of the
  // ridge. Uses the mesh samples directly so the fit moves with the surface
  // under a rigid change of pose.
  const auto wide = front_layer(band_points(roi, plane, kBridgeBandScale * cfg.profile_band_mm, rt), 1.0, 3.0);
  std::vector<ProfilePoint> seg;
  for (const auto& p : wide) {
    const double d = std::hypot(p.y - tip_y, p.z - tip_z);
    if (p.y > tip_y && d >= 2.0 && d <= cfg.bridge_arc_mm) seg.push_back(p);
  }
  if (seg.size() < 10) throw Error(ErrorCode::NoNoseFound, "nose bridge profile too short");
  double my = 0.0, mz = 0.0;
  for (const auto& p : seg) {
    my += p.y;
    mz += p.z;
  }
  my /= static_cast<double>(seg.size());
  mz /= static_cast<double>(seg.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : seg) {
    const Eigen::Vector2d d(p.y - my, p.z - mz);
    cov += d * d.transpose();
  }
  Eigen::Vector2d dir = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(cov).eigenvectors().col(1);
  if (dir.x() < 0.0) dir = -dir;
  {
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atb = Eigen::Vector3d::Zero();
    for (const auto& p : seg) {
      const double u = dir.x() * (p.y - my) + dir.y() * (p.z - mz);
      const double v = -dir.y() * (p.y - my) + dir.x() * (p.z - mz);
      const Eigen::Vector3d row(1.0, u, p.x * p.x);
      ata += row * row.transpose();
      atb += row * v;
    }
    const double b = ata.ldlt().solve(atb)[1];
    const double c = std::cos(std::atan(b)), s = std::sin(std::atan(b));
    dir = Eigen::Vector2d(c * dir.x() - s * dir.y(), s * dir.x() + c * dir.y());
  }
  if (!(dir.x() > 1e-6)) throw Error(ErrorCode::NoNoseFound, "nose bridge is parallel to the depth axis");
  const double slope = dir.y() / dir.x();

  NoseFeatures nf;
  nf.tip = plane.center + r * Vec3(plane.offset_mm, tip_y, tip_z);
  nf.bridge_direction = r * Vec3(0.0, 1.0, slope).normalized();
  nf.bridge_slope = std::atan(slope);
  nf.prominence_mm = best_prom;
  return nf;
}

namespace {

IntrinsicRegistration register_roi(const TriMesh& roi, const RegistrationConfig& cfg) {
  const SymmetryPlane plane = find_symmetry_plane(roi, cfg);
  const NoseFeatures nose = detect_nose_features(roi, plane, cfg);

  const Vec3 x_axis = plane.normal.normalized();
  Vec3 y_axis = nose.bridge_direction - nose.bridge_direction.dot(x_axis) * x_axis;
  y_axis.normalize();
  const Vec3 z_axis = x_axis.cross(y_axis);
  Mat3 frame;
  frame.col(0) = x_axis;
  frame.col(1) = y_axis;
  frame.col(2) = z_axis;
  // Re-orthonormalize to keep the rotation exact to machine precision.
  Eigen::JacobiSVD<Mat3> svd(frame, Eigen::ComputeFullU | Eigen::ComputeFullV);
  frame = svd.matrixU() * svd.matrixV().transpose();

  const Mat3 rot = frame.transpose();
  IntrinsicRegistration reg;
  reg.transform = RigidTransform(rot, -(rot * nose.tip));
  reg.nose_tip = nose.tip;
  reg.symmetry_residual_mm = plane.residual_mm;
  reg.bridge_slope = nose.bridge_slope;
  return reg;
}

}  // namespace

IntrinsicRegistration register_face(const TriMesh& mesh, const RegistrationConfig& cfg) {
  return register_roi(extract_roi(mesh, cfg), cfg);
}

DepthMap rasterize(const TriMesh& mesh, const RigidTransform& to_intrinsic, const GridSpec& grid) {
  grid.validate();
  DepthMap out(grid);
  std::vector<double> zbuf(grid.cell_count(), -std::numeric_limits<double>::infinity());
  std::vector<Vec3> v;
  v.reserve(mesh.vertex_count());
  for (const auto& p : mesh.vertices()) v.push_back(to_intrinsic.apply(p));

  for (const auto& f : mesh.faces()) {
    if (!mesh.valid(f[0]) || !mesh.valid(f[1]) || !mesh.valid(f[2])) continue;
    const Vec3& a = v[f[0]];
    const Vec3& b = v[f[1]];
    const Vec3& c = v[f[2]];
    const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
    if (std::abs(det) < 1e-12) continue;
    const double minx = std::min({a.x(), b.x(), c.x()}), maxx = std::max({a.x(), b.x(), c.x()});
    const double miny = std::min({a.y(), b.y(), c.y()}), maxy = std::max({a.y(), b.y(), c.y()});
    const int c0 = std::max(0, static_cast<int>(std::ceil((minx - grid.origin_x) / grid.spacing_x - 0.5)));
    const int c1 = std::min(grid.width - 1, static_cast<int>(std::floor((maxx - grid.origin_x) / grid.spacing_x - 0.5)));
    const int r0 = std::max(0, static_cast<int>(std::ceil((miny - grid.origin_y) / grid.spacing_y - 0.5)));
    const int r1 = std::min(grid.height - 1, static_cast<int>(std::floor((maxy - grid.origin_y) / grid.spacing_y - 0.5)));
    for (int row = r0; row <= r1; ++row) {
      const double py = grid.center_y(row);
      for (int col = c0; col <= c1; ++col) {
        const double px = grid.center_x(col);
        const double w1 = ((px - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (py - a.y())) / det;
        const double w2 = ((b.x() - a.x()) * (py - a.y()) - (px - a.x()) * (b.y() - a.y())) / det;
        const double w0 = 1.0 - w1 - w2;
        constexpr double eps = -1e-9;
        if (w0 < eps || w1 < eps || w2 < eps) continue;
        const double z = a.z() + w1 * (b.z() - a.z()) + w2 * (c.z() - a.z());
        auto& slot = zbuf[grid.index(col, row)];
        if (z > slot) slot = z;
      }
    }
  }
  bool any = false;
  for (std::size_t i = 0; i < zbuf.size(); ++i) {
    if (std::isfinite(zbuf[i])) {
      out.set(i, zbuf[i]);
      any = true;
    }
  }
  if (!any) throw Error(ErrorCode::EmptyProjection, "no grid cell is covered by the surface");
  return out;
}

DepthMap rasterize(const TriMesh& mesh, const IntrinsicRegistration& reg, const GridSpec& grid) {
  return rasterize(mesh, reg.transform, grid);
}

DepthMap register_and_rasterize(const TriMesh& mesh, const RegistrationConfig& cfg, const GridSpec& grid,
                                IntrinsicRegistration* reg_out) {
  const TriMesh roi = extract_roi(mesh, cfg);
  const IntrinsicRegistration reg = register_roi(roi, cfg);
  if (reg_out) *reg_out = reg;
  return rasterize(roi, reg, grid);
}

}  // namespace morph3d
