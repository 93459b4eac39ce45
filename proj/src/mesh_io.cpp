#include "morph3d/mesh_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "morph3d/error.hpp"

namespace morph3d {

namespace {

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

ScalarType parse_scalar_type(const std::string& name) {
  if (name == "char" || name == "int8") return ScalarType::Int8;
  if (name == "uchar" || name == "uint8") return ScalarType::UInt8;
  if (name == "short" || name == "int16") return ScalarType::Int16;
  if (name == "ushort" || name == "uint16") return ScalarType::UInt16;
  if (name == "int" || name == "int32") return ScalarType::Int32;
  if (name == "uint" || name == "uint32") return ScalarType::UInt32;
  if (name == "float" || name == "float32") return ScalarType::Float32;
  if (name == "double" || name == "float64") return ScalarType::Float64;
  throw Error(ErrorCode::MalformedFile, "unknown PLY scalar type '" + name + "'");
}

struct PlyProperty {
  std::string name;
  ScalarType type = ScalarType::Float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

template <typename T>
T read_le(std::istream& in) {
  T v{};
  char raw[sizeof(T)];
  if (!in.read(raw, sizeof(T))) throw Error(ErrorCode::MalformedFile, "unexpected end of binary PLY body");
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  std::memcpy(&v, raw, sizeof(T));
  return v;
}

double read_binary_scalar(std::istream& in, ScalarType t) {
  switch (t) {
    case ScalarType::Int8: return read_le<std::int8_t>(in);
    case ScalarType::UInt8: return read_le<std::uint8_t>(in);
    case ScalarType::Int16: return read_le<std::int16_t>(in);
    case ScalarType::UInt16: return read_le<std::uint16_t>(in);
    case ScalarType::Int32: return read_le<std::int32_t>(in);
    case ScalarType::UInt32: return read_le<std::uint32_t>(in);
    case ScalarType::Float32: return read_le<float>(in);
    case ScalarType::Float64: return read_le<double>(in);
  }
  return 0.0;
}

// Reads whitespace-separated tokens from an ascii body, failing loudly when
// the body runs out before the header's element counts are satisfied.
class AsciiTokens {
 public:
  explicit AsciiTokens(std::istream& in) : in_(in) {}
  double next() {
    std::string tok;
    if (!(in_ >> tok)) throw Error(ErrorCode::MalformedFile, "PLY body ended before declared element count");
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw Error(ErrorCode::MalformedFile, "bad PLY token '" + tok + "'");
      return v;
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::MalformedFile, "bad PLY token '" + tok + "'");
    }
  }
  bool exhausted() {
    std::string tok;
    return !(in_ >> tok);
  }

 private:
  std::istream& in_;
};

std::uint32_t checked_index(double v, std::size_t vertex_count) {
  if (!(v >= 0.0) || v != std::floor(v) || v >= static_cast<double>(vertex_count)) {
    throw Error(ErrorCode::MalformedFile, "face index out of range");
  }
  return static_cast<std::uint32_t>(v);
}

void fan_triangulate(const std::vector<std::uint32_t>& poly, std::vector<Face>& faces) {
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) faces.push_back({poly[0], poly[k], poly[k + 1]});
}

TriMesh assemble(std::vector<Vec3> verts, std::vector<Face> faces, std::vector<std::uint8_t> valid) {
  if (verts.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no vertices");
  // Faces touching an invalid vertex cannot survive the mesh invariant.
  if (!valid.empty()) {
    std::erase_if(faces, [&](const Face& f) { return !valid[f[0]] || !valid[f[1]] || !valid[f[2]]; });
  }
  return TriMesh(std::move(verts), std::move(faces), std::move(valid));
}

}  // namespace

MeshFormat format_from_path(const std::string& path) {
  const auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == "ply") return MeshFormat::Ply;
  if (ext == "obj") return MeshFormat::Obj;
  throw Error(ErrorCode::UnsupportedFormat, "unrecognized mesh extension: " + path);
}

TriMesh read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply") throw Error(ErrorCode::MalformedFile, "missing 'ply' magic");
  bool binary = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  for (;;) {
    if (!std::getline(in, line)) throw Error(ErrorCode::MalformedFile, "PLY header not terminated");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "end_header") break;
    if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw Error(ErrorCode::UnsupportedFormat, "PLY format '" + fmt + "' not supported");
      have_format = true;
    } else if (kw == "element") {
      PlyElement e;
      long long count = -1;
      ls >> e.name >> count;
      if (!ls || count < 0) throw Error(ErrorCode::MalformedFile, "bad element line: " + line);
      e.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (elements.empty()) throw Error(ErrorCode::MalformedFile, "property before any element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar_type(count_type);
        p.type = parse_scalar_type(item_type);
      } else {
        p.type = parse_scalar_type(type);
        ls >> p.name;
      }
      if (p.name.empty()) throw Error(ErrorCode::MalformedFile, "property without name");
      elements.back().properties.push_back(p);
    } else {
      throw Error(ErrorCode::MalformedFile, "unexpected PLY header keyword '" + kw + "'");
    }
  }
  if (!have_format) throw Error(ErrorCode::MalformedFile, "PLY header lacks format line");

  std::vector<Vec3> verts;
  std::vector<std::uint8_t> valid;
  std::vector<Face> faces;
  bool have_quality = false;
  std::size_t vertex_count = 0;
  for (const auto& e : elements) {
    if (e.name == "vertex") vertex_count = e.count;
  }

  AsciiTokens tokens(in);
  auto scalar = [&](ScalarType t) { return binary ? read_binary_scalar(in, t) : tokens.next(); };

  for (const auto& e : elements) {
    int ix = -1, iy = -1, iz = -1, iq = -1, iface = -1;
    for (std::size_t k = 0; k < e.properties.size(); ++k) {
      const auto& n = e.properties[k].name;
      if (n == "x") ix = static_cast<int>(k);
      else if (n == "y") iy = static_cast<int>(k);
      else if (n == "z") iz = static_cast<int>(k);
      else if (n == "quality") iq = static_cast<int>(k);
      else if (n == "vertex_indices" || n == "vertex_index") iface = static_cast<int>(k);
    }
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) throw Error(ErrorCode::MalformedFile, "vertex element lacks x/y/z");
    if (is_face && (iface < 0 || !e.properties[iface].is_list)) {
      throw Error(ErrorCode::MalformedFile, "face element lacks a vertex_indices list");
    }
    if (is_vertex) {
      verts.reserve(e.count);
      have_quality = iq >= 0;
      if (have_quality) valid.reserve(e.count);
    }
    std::vector<double> values(e.properties.size());
    std::vector<std::uint32_t> poly;
    for (std::size_t row = 0; row < e.count; ++row) {
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const auto& p = e.properties[k];
        if (!p.is_list) {
          values[k] = scalar(p.type);
          continue;
        }
        const double n = scalar(p.count_type);
        if (!(n >= 0.0) || n > 1e6) throw Error(ErrorCode::MalformedFile, "bad list length");
        const auto len = static_cast<std::size_t>(n);
        if (is_face && static_cast<int>(k) == iface) {
          poly.clear();
          for (std::size_t j = 0; j < len; ++j) poly.push_back(checked_index(scalar(p.type), vertex_count));
        } else {
          for (std::size_t j = 0; j < len; ++j) scalar(p.type);
        }
      }
      if (is_vertex) {
        verts.emplace_back(values[ix], values[iy], values[iz]);
        if (have_quality) valid.push_back(values[iq] >= 0.5 ? 1 : 0);
      } else if (is_face) {
        if (poly.size() < 3) throw Error(ErrorCode::MalformedFile, "face with fewer than 3 vertices");
        fan_triangulate(poly, faces);
      }
    }
  }
  if (!binary && !tokens.exhausted()) throw Error(ErrorCode::MalformedFile, "PLY body has more data than the header declares");
  if (binary && in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::MalformedFile, "PLY body has more data than the header declares");
  }
  return assemble(std::move(verts), std::move(faces), std::move(valid));
}

TriMesh read_obj(std::istream& in) {
  std::vector<Vec3> verts;
  std::vector<std::vector<long long>> polys;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw Error(ErrorCode::MalformedFile, "bad vertex at line " + std::to_string(lineno));
      verts.emplace_back(x, y, z);
    } else if (kw == "f") {
      std::vector<long long> poly;
      std::string tok;
      while (ls >> tok) {
        // v, v/vt, v//vn, v/vt/vn: only the position index matters.
        const auto slash = tok.find('/');
        try {
          poly.push_back(std::stoll(tok.substr(0, slash)));
        } catch (const std::logic_error&) {
          throw Error(ErrorCode::MalformedFile, "bad face index at line " + std::to_string(lineno));
        }
      }
      if (poly.size() < 3) throw Error(ErrorCode::MalformedFile, "face with fewer than 3 vertices at line " + std::to_string(lineno));
      polys.push_back(std::move(poly));
    }
  }
  std::vector<Face> faces;
  std::vector<std::uint32_t> poly;
  for (const auto& p : polys) {
    poly.clear();
    for (long long idx : p) {
      // OBJ indices are 1-based; negative values count back from the end.
      const long long resolved = idx > 0 ? idx - 1 : static_cast<long long>(verts.size()) + idx;
      poly.push_back(checked_index(static_cast<double>(resolved), verts.size()));
    }
    fan_triangulate(poly, faces);
  }
  return assemble(std::move(verts), std::move(faces), {});
}

TriMesh read_mesh(const std::string& path, MeshFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  return format == MeshFormat::Ply ? read_ply(in) : read_obj(in);
}

TriMesh read_mesh(const std::string& path) { return read_mesh(path, format_from_path(path)); }

namespace {

template <typename T>
void write_le(std::ostream& out, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.write(raw, sizeof(T));
}

}  // namespace

void write_ply(const TriMesh& mesh, std::ostream& out, PlyEncoding encoding) {
  const bool binary = encoding == PlyEncoding::BinaryLittleEndian;
  const bool quality = mesh.has_validity();
  out << "ply\n"
      << "format " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << mesh.vertex_count() << '\n'
      << "property double x\nproperty double y\nproperty double z\n";
  if (quality) out << "property float quality\n";
  out << "element face " << mesh.face_count() << '\n'
      << "property list uchar uint vertex_indices\n"
      << "end_header\n";
  if (binary) {
    for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
      const auto& v = mesh.vertices()[i];
      write_le(out, v.x());
      write_le(out, v.y());
      write_le(out, v.z());
      if (quality) write_le(out, mesh.valid(i) ? 1.0f : 0.0f);
    }
    for (const auto& f : mesh.faces()) {
      write_le<std::uint8_t>(out, 3);
      for (auto idx : f) write_le<std::uint32_t>(out, idx);
    }
  } else {
    char buf[128];
    for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
      const auto& v = mesh.vertices()[i];
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", v.x(), v.y(), v.z());
      out << buf;
      if (quality) out << (mesh.valid(i) ? " 1" : " 0");
      out << '\n';
    }
    for (const auto& f : mesh.faces()) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  }
}

void write_mesh(const TriMesh& mesh, const std::string& path, MeshFormat format, PlyEncoding encoding) {
  if (format != MeshFormat::Ply) throw Error(ErrorCode::UnsupportedFormat, "only PLY output is supported");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  write_ply(mesh, out, encoding);
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

}  // namespace morph3d
