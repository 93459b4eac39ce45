#pragma once

#include <cmath>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace morph3d {

/// Regular lateral grid in the intrinsic frame. Cell (col, row) is centered at
/// (origin_x + (col + 0.5) * spacing_x, origin_y + (row + 0.5) * spacing_y).
struct GridSpec {
  int width = 120;
  int height = 120;
  double origin_x = -90.0;
  double origin_y = -70.0;
  double spacing_x = 1.5;
  double spacing_y = 1.5;

  /// Throws InvalidConfig on non-positive spacing or dimensions.
  void validate() const;

  std::size_t cell_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  std::size_t index(int col, int row) const { return static_cast<std::size_t>(row) * width + col; }
  double center_x(int col) const { return origin_x + (col + 0.5) * spacing_x; }
  double center_y(int row) const { return origin_y + (row + 0.5) * spacing_y; }

  /// Cell containing (x, y), or nullopt when outside the grid.
  std::optional<std::size_t> cell_at(double x, double y) const;

  bool operator==(const GridSpec&) const = default;
};

/// Depth z (mm) per cell; NaN encodes HOLE.
class DepthMap {
 public:
  static constexpr double kHole = std::numeric_limits<double>::quiet_NaN();

  DepthMap() = default;
  explicit DepthMap(const GridSpec& grid);
  DepthMap(const GridSpec& grid, std::vector<double> cells);

  const GridSpec& grid() const { return grid_; }
  int width() const { return grid_.width; }
  int height() const { return grid_.height; }
  std::size_t size() const { return cells_.size(); }

  double at(std::size_t i) const { return cells_[i]; }
  double at(int col, int row) const { return cells_[grid_.index(col, row)]; }
  bool is_hole(std::size_t i) const { return std::isnan(cells_[i]); }
  bool is_hole(int col, int row) const { return is_hole(grid_.index(col, row)); }

  void set(std::size_t i, double z) { cells_[i] = z; }
  void set(int col, int row, double z) { cells_[grid_.index(col, row)] = z; }
  void set_hole(std::size_t i) { cells_[i] = kHole; }

  const std::vector<double>& cells() const { return cells_; }
  std::size_t valid_count() const;

 private:
  GridSpec grid_;
  std::vector<double> cells_;
};

/// Throws GridMismatch unless both maps share one grid.
void require_same_grid(const DepthMap& a, const DepthMap& b, const char* what);

/// RMS of cellwise differences over cells valid in both maps; nullopt when
/// no cell is jointly valid.
std::optional<double> rms_difference(const DepthMap& a, const DepthMap& b);

/// Mirror across x = 0 (requires a grid symmetric about x = 0).
DepthMap mirror_x(const DepthMap& d);

// CSV: one comment line with the grid spec, then `height` rows of `width`
// values, row-major, "NaN" for HOLE.
void write_depth_csv(const DepthMap& d, std::ostream& out);
void write_depth_csv(const DepthMap& d, const std::string& path);
DepthMap read_depth_csv(std::istream& in);
DepthMap read_depth_csv(const std::string& path);

}  // namespace morph3d
