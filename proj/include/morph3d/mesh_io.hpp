#pragma once

#include <iosfwd>
#include <string>

#include "morph3d/geometry.hpp"

namespace morph3d {

enum class MeshFormat { Ply, Obj };
enum class PlyEncoding { Ascii, BinaryLittleEndian };

/// Picks the format from the file extension (.ply / .obj, case-insensitive);
/// throws UnsupportedFormat otherwise.
MeshFormat format_from_path(const std::string& path);

/// PLY: ascii or binary_little_endian; vertex element with x/y/z and an
/// optional scalar "quality" (< 0.5 marks the vertex invalid); face element
/// with a vertex_indices list (polygons are fan-triangulated). Other elements
/// and properties are skipped. OBJ: only v and f records are read.
TriMesh read_mesh(const std::string& path, MeshFormat format);
TriMesh read_mesh(const std::string& path);
TriMesh read_ply(std::istream& in);
TriMesh read_obj(std::istream& in);

/// Only PLY can be written. Coordinates are stored as doubles so a
/// write/read cycle is lossless; the quality property is emitted only when
/// the mesh carries validity flags.
void write_mesh(const TriMesh& mesh, const std::string& path, MeshFormat format = MeshFormat::Ply,
                PlyEncoding encoding = PlyEncoding::BinaryLittleEndian);
void write_ply(const TriMesh& mesh, std::ostream& out, PlyEncoding encoding);

}  // namespace morph3d
