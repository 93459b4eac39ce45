#include "morph3d/morphgen.hpp"

#include <cmath>
#include <vector>

#include "morph3d/error.hpp"

namespace morph3d {

std::string to_string(MorphMethod m) {
  return m == MorphMethod::DepthAverage ? "depth" : "coefficient";
}

std::string to_string(HolePolicy p) {
  return p == HolePolicy::Union ? "union" : "intersect_fill";
}

MorphMethod morph_method_from_string(const std::string& s) {
  if (s == "depth") return MorphMethod::DepthAverage;
  if (s == "coefficient") return MorphMethod::CoefficientAverage;
  throw Error(ErrorCode::InvalidConfig, "unknown morph method '" + s + "' (depth|coefficient)");
}

HolePolicy hole_policy_from_string(const std::string& s) {
  if (s == "union") return HolePolicy::Union;
  if (s == "intersect_fill") return HolePolicy::IntersectFill;
  throw Error(ErrorCode::InvalidConfig, "unknown hole policy '" + s + "' (union|intersect_fill)");
}

void MorphSpec::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidConfig, "alpha must lie in [0, 1]");
}

DepthMap depth_average(const DepthMap& a, const DepthMap& b, const MorphSpec& spec) {
  spec.validate();
  if (spec.method != MorphMethod::DepthAverage) throw Error(ErrorCode::InvalidConfig, "depth_average needs method depth");
  require_same_grid(a, b, "depth_average");
  DepthMap out(a.grid());
  const double al = spec.alpha;
  // Endpoints return an input verbatim, holes included, under either policy.
  if (al == 1.0) return a;
  if (al == 0.0) return b;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ha = a.is_hole(i), hb = b.is_hole(i);
    if (!ha && !hb) {
      out.set(i, al * a.at(i) + (1.0 - al) * b.at(i));
    } else if (spec.hole_policy == HolePolicy::IntersectFill && !(ha && hb)) {
      out.set(i, ha ? b.at(i) : a.at(i));
    }
  }
  return out;
}

CoefficientMorph coefficient_average(const ShapeModel& model, const DepthMap& a, const DepthMap& b,
                                     const MorphSpec& spec) {
  spec.validate();
  if (spec.method != MorphMethod::CoefficientAverage) {
    throw Error(ErrorCode::InvalidConfig, "coefficient_average needs method coefficient");
  }
  require_same_grid(model.mean(), a, "coefficient_average");
  require_same_grid(model.mean(), b, "coefficient_average");
  const CoefficientVector ca = fit_coefficients(model, a);
  const CoefficientVector cb = fit_coefficients(model, b);
  CoefficientVector cm;
  if (spec.alpha == 1.0) cm = ca;
  else if (spec.alpha == 0.0) cm = cb;
  else cm = spec.alpha * ca + (1.0 - spec.alpha) * cb;
  return {reconstruct(model, cm), cm};
}

TriMesh morph_to_mesh(const DepthMap& d) {
  const auto& g = d.grid();
  constexpr auto kNone = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> vid(d.size(), kNone);
  std::vector<Vec3> verts;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if (d.is_hole(c, r)) continue;
      vid[g.index(c, r)] = static_cast<std::uint32_t>(verts.size());
      verts.emplace_back(g.center_x(c), g.center_y(r), d.at(c, r));
    }
  }
  std::vector<Face> faces;
  for (int r = 0; r + 1 < g.height; ++r) {
    for (int c = 0; c + 1 < g.width; ++c) {
      const auto v00 = vid[g.index(c, r)], v10 = vid[g.index(c + 1, r)];
      const auto v01 = vid[g.index(c, r + 1)], v11 = vid[g.index(c + 1, r + 1)];
      const int n = (v00 != kNone) + (v10 != kNone) + (v01 != kNone) + (v11 != kNone);
      if (n == 4) {
        faces.push_back({v00, v10, v11});
        faces.push_back({v00, v11, v01});
      } else if (n == 3) {
        std::vector<std::uint32_t> tri;
        for (auto v : {v00, v10, v11, v01})
          if (v != kNone) tri.push_back(v);
        faces.push_back({tri[0], tri[1], tri[2]});
      }
    }
  }
  if (faces.empty()) throw Error(ErrorCode::DegenerateSurface, "depth map has no 2x2 block with 3 valid cells");
  return TriMesh(std::move(verts), std::move(faces));
}

}  // namespace morph3d
