#include "morph3d/depth_map.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "morph3d/error.hpp"

namespace morph3d {

void GridSpec::validate() const {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidConfig, "grid dimensions must be positive");
  if (!(spacing_x > 0.0) || !(spacing_y > 0.0)) throw Error(ErrorCode::InvalidConfig, "grid spacing must be positive");
  if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) throw Error(ErrorCode::InvalidConfig, "grid origin must be finite");
}

std::optional<std::size_t> GridSpec::cell_at(double x, double y) const {
  const double fx = std::floor((x - origin_x) / spacing_x);
  const double fy = std::floor((y - origin_y) / spacing_y);
  if (!(fx >= 0.0 && fx < width && fy >= 0.0 && fy < height)) return std::nullopt;
  return index(static_cast<int>(fx), static_cast<int>(fy));
}

DepthMap::DepthMap(const GridSpec& grid) : grid_(grid) {
  grid_.validate();
  cells_.assign(grid_.cell_count(), kHole);
}

DepthMap::DepthMap(const GridSpec& grid, std::vector<double> cells) : grid_(grid), cells_(std::move(cells)) {
  grid_.validate();
  if (cells_.size() != grid_.cell_count()) throw Error(ErrorCode::GridMismatch, "cell count does not match grid");
  for (double& z : cells_) {
    if (std::isinf(z)) throw Error(ErrorCode::InvalidConfig, "depth cells must be finite or HOLE");
  }
}

std::size_t DepthMap::valid_count() const {
  std::size_t n = 0;
  for (double z : cells_) n += std::isnan(z) ? 0 : 1;
  return n;
}

void require_same_grid(const DepthMap& a, const DepthMap& b, const char* what) {
  if (!(a.grid() == b.grid())) throw Error(ErrorCode::GridMismatch, std::string(what) + ": depth maps are on different grids");
}

std::optional<double> rms_difference(const DepthMap& a, const DepthMap& b) {
  require_same_grid(a, b, "rms_difference");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.is_hole(i) || b.is_hole(i)) continue;
    const double d = a.at(i) - b.at(i);
    acc += d * d;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return std::sqrt(acc / static_cast<double>(n));
}

DepthMap mirror_x(const DepthMap& d) {
  const auto& g = d.grid();
  if (std::abs(g.origin_x + 0.5 * g.width * g.spacing_x) > 1e-9) {
    throw Error(ErrorCode::GridMismatch, "mirror_x needs a grid centered on x = 0");
  }
  DepthMap out(g);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) out.set(c, r, d.at(g.width - 1 - c, r));
  return out;
}

void write_depth_csv(const DepthMap& d, std::ostream& out) {
  const auto& g = d.grid();
  char buf[128];
  out << "# width=" << g.width << " height=" << g.height;
  std::snprintf(buf, sizeof buf, " origin_x=%.17g origin_y=%.17g", g.origin_x, g.origin_y);
  out << buf;
  std::snprintf(buf, sizeof buf, " spacing_x=%.17g spacing_y=%.17g", g.spacing_x, g.spacing_y);
  out << buf << '\n';
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if (c) out << ',';
      if (d.is_hole(c, r)) {
        out << "NaN";
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", d.at(c, r));
        out << buf;
      }
    }
    out << '\n';
  }
}

void write_depth_csv(const DepthMap& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  write_depth_csv(d, out);
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

namespace {

double parse_cell(const std::string& tok) {
  if (tok == "NaN" || tok == "nan") return DepthMap::kHole;
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw Error(ErrorCode::MalformedFile, "bad depth value '" + tok + "'");
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::MalformedFile, "bad depth value '" + tok + "'");
  }
}

}  // namespace

DepthMap read_depth_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw Error(ErrorCode::MalformedFile, "depth CSV lacks grid header");
  }
  GridSpec g;
  std::istringstream hdr(line.substr(2));
  std::string kv;
  while (hdr >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::MalformedFile, "bad header field " + kv);
    const auto key = kv.substr(0, eq);
    const double v = parse_cell(kv.substr(eq + 1));
    if (key == "width") g.width = static_cast<int>(v);
    else if (key == "height") g.height = static_cast<int>(v);
    else if (key == "origin_x") g.origin_x = v;
    else if (key == "origin_y") g.origin_y = v;
    else if (key == "spacing_x") g.spacing_x = v;
    else if (key == "spacing_y") g.spacing_y = v;
    else throw Error(ErrorCode::MalformedFile, "unknown header field " + key);
  }
  g.validate();
  std::vector<double> cells;
  cells.reserve(g.cell_count());
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    int cols = 0;
    while (std::getline(ls, tok, ',')) {
      cells.push_back(parse_cell(tok));
      ++cols;
    }
    if (cols != g.width) throw Error(ErrorCode::MalformedFile, "row " + std::to_string(rows) + " has wrong column count");
    ++rows;
  }
  if (rows != g.height) throw Error(ErrorCode::MalformedFile, "depth CSV row count does not match header");
  return DepthMap(g, std::move(cells));
}

DepthMap read_depth_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  return read_depth_csv(in);
}

}  // namespace morph3d
