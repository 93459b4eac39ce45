#pragma once
// JSON helpers shared by the model and experiment serializers (internal).

#include <json.hpp>

#include "morph3d/depth_map.hpp"
#include "morph3d/error.hpp"

namespace morph3d::detail {

inline nlohmann::json grid_to_json(const GridSpec& g) {
  return {{"width", g.width},         {"height", g.height},       {"origin_x", g.origin_x},
          {"origin_y", g.origin_y}, {"spacing_x", g.spacing_x}, {"spacing_y", g.spacing_y}};
}

inline GridSpec grid_from_json(const nlohmann::json& j) {
  GridSpec g;
  for (const auto& [key, value] : j.items()) {
    if (key == "width") g.width = value.get<int>();
    else if (key == "height") g.height = value.get<int>();
    else if (key == "origin_x") g.origin_x = value.get<double>();
    else if (key == "origin_y") g.origin_y = value.get<double>();
    else if (key == "spacing_x") g.spacing_x = value.get<double>();
    else if (key == "spacing_y") g.spacing_y = value.get<double>();
    else throw Error(ErrorCode::InvalidConfig, "unknown grid key '" + key + "'");
  }
  g.validate();
  return g;
}

}  // namespace morph3d::detail
