#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "geoset/geometry.hpp"

namespace geoset {

enum class PlyFormat { Ascii, BinaryLittleEndian };

/// Reads vertex positions, optional normals (nx, ny, nz) and adjacency from
/// an ASCII or binary little-endian PLY file. Adjacency comes from an `edge`
/// element (vertex1, vertex2) or, failing that, from `face` polygons.
/// Throws IoError naming the path and byte offset of malformed content.
PointCloud read_ply(const std::filesystem::path& path);
PointCloud read_ply(std::istream& in, const std::string& name = "<stream>");

/// Writes positions as float64, normals when present, and edges as an
/// `edge` element.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               PlyFormat format = PlyFormat::BinaryLittleEndian);
void write_ply(std::ostream& out, const PointCloud& cloud,
               PlyFormat format = PlyFormat::BinaryLittleEndian);

}  // namespace geoset
