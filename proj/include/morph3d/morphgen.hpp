#pragma once

#include <string>

#include "morph3d/depth_map.hpp"
#include "morph3d/geometry.hpp"
#include "morph3d/shape_model.hpp"

namespace morph3d {

enum class MorphMethod { DepthAverage, CoefficientAverage };
/// Union: a HOLE on either side stays HOLE. IntersectFill: the valid side is
/// copied through (reproduces eye-hole remnants).
enum class HolePolicy { Union, IntersectFill };

std::string to_string(MorphMethod m);
std::string to_string(HolePolicy p);
MorphMethod morph_method_from_string(const std::string& s);
HolePolicy hole_policy_from_string(const std::string& s);

struct MorphSpec {
  MorphMethod method = MorphMethod::DepthAverage;
  double alpha = 0.5;  // weight of face a
  HolePolicy hole_policy = HolePolicy::Union;
  std::string id_a;
  std::string id_b;

  void validate() const;
};

DepthMap depth_average(const DepthMap& a, const DepthMap& b, const MorphSpec& spec);

struct CoefficientMorph {
  DepthMap depth;
  CoefficientVector coefficients;
};

/// c = alpha fit(a) + (1 - alpha) fit(b), reconstructed.
CoefficientMorph coefficient_average(const ShapeModel& model, const DepthMap& a, const DepthMap& b,
                                     const MorphSpec& spec);

/// Grid triangulation with vertices at valid cell centres. A 2x2 block with
/// four valid cells gives two triangles, three valid cells give one.
/// Throws DegenerateSurface when no triangle can be formed.
TriMesh morph_to_mesh(const DepthMap& d);

}  // namespace morph3d
