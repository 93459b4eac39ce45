#include "morph3d/matchers.hpp"

namespace morph3d {

// Built-in region layout, intrinsic frame (nose tip at the origin, +y up the
// bridge). Rectangles overlap on purpose. x0, y0, x1, y1 in mm.
const std::vector<Region>& default_regions() {
  static const std::vector<Region> regions = {
      // nose
      {"nose_tip", -12, -12, 12, 12},
      {"nose_dorsum", -10, -5, 10, 25},
      {"nose_wide", -15, -15, 15, 15},
      {"nose_ridge", -8, 0, 8, 40},
      {"nose_alae", -20, -10, 20, 10},
      {"nose_upper", -12, 10, 12, 40},
      {"nose_base", -18, -20, 18, 5},
      {"nose_area", -25, -25, 25, 25},
      // eyes
      {"eye_r_a", -45, 30, -15, 55},
      {"eye_r_b", -40, 35, -20, 50},
      {"eye_r_c", -50, 25, -10, 60},
      {"eye_r_d", -35, 38, -12, 56},
      {"eye_r_e", -55, 30, -25, 55},
      {"eye_r_f", -45, 20, -20, 45},
      {"eye_l_a", 15, 30, 45, 55},
      {"eye_l_b", 20, 35, 40, 50},
      {"eye_l_c", 10, 25, 50, 60},
      {"eye_l_d", 12, 38, 35, 56},
      {"eye_l_e", 25, 30, 55, 55},
      {"eye_l_f", 20, 20, 45, 45},
      // brows
      {"brow_r_a", -50, 55, -10, 75},
      {"brow_r_b", -40, 60, -5, 80},
      {"brow_l_a", 10, 55, 50, 75},
      {"brow_l_b", 5, 60, 40, 80},
      {"glabella", -20, 55, 20, 75},
      {"brow_band", -30, 50, 30, 70},
      // forehead
      {"forehead", -40, 75, 40, 105},
      {"forehead_top", -25, 80, 25, 108},
      {"forehead_r", -50, 70, 0, 100},
      {"forehead_l", 0, 70, 50, 100},
      {"forehead_mid", -30, 65, 30, 95},
      {"forehead_narrow", -15, 85, 15, 108},
      // cheeks
      {"cheek_r_a", -55, -10, -25, 20},
      {"cheek_r_b", -50, 0, -20, 30},
      {"cheek_r_c", -60, -20, -30, 10},
      {"cheek_r_d", -45, -25, -15, 5},
      {"cheek_r_e", -55, 5, -30, 35},
      {"cheek_r_f", -40, -15, -15, 15},
      {"cheek_l_a", 25, -10, 55, 20},
      {"cheek_l_b", 20, 0, 50, 30},
      {"cheek_l_c", 30, -20, 60, 10},
      {"cheek_l_d", 15, -25, 45, 5},
      {"cheek_l_e", 30, 5, 55, 35},
      {"cheek_l_f", 15, -15, 40, 15},
      // mouth and chin
      {"mouth", -25, -35, 25, -15},
      {"chin", -20, -40, 20, -25},
      {"mouth_wide", -30, -30, 30, -10},
      {"mouth_narrow", -15, -35, 15, -20},
      {"mouth_r", -35, -25, 0, -5},
      {"mouth_l", 0, -25, 35, -5},
      // large
      {"face", -60, -40, 60, 108},
      {"upper_face", -60, 20, 60, 108},
      {"lower_face", -60, -40, 60, 20},
      {"right_half", -60, -40, 0, 108},
      {"left_half", 0, -40, 60, 108},
      {"central", -30, -30, 30, 60},
      {"mid_band", -50, -20, 50, 50},
      {"eye_band", -40, 30, 40, 80},
      {"lower_band", -45, -35, 45, 0},
      {"center_strip", -20, -20, 20, 80},
  };
  return regions;
}

}  // namespace morph3d
