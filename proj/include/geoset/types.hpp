#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <vector>

namespace geoset {

/// Integer pixel coordinate: u is the column, v the row.
struct Pixel {
  int u = 0;
  int v = 0;

  auto operator<=>(const Pixel&) const = default;
};

/// A pixel together with the 3D point that projects onto it.
struct ProjectedPixel {
  Pixel pixel;
  std::uint32_t point = 0;

  auto operator<=>(const ProjectedPixel&) const = default;
};

/// Projection of every geometric consistency set into one view. Pixel lists
/// are sorted in row-major order and a pixel belongs to at most one set.
struct ViewProjection {
  int view_id = 0;
  int width = 0;
  int height = 0;
  std::map<std::uint32_t, std::vector<ProjectedPixel>> sets;

  std::size_t pixel_count() const;
  bool operator==(const ViewProjection&) const = default;
};

/// Projections keyed by view id.
using ProjectedGeoSets = std::map<int, ViewProjection>;

/// Two pixels in views m and n observing the same 3D point.
struct PixelPair {
  Pixel m;
  Pixel n;
  std::uint32_t point = 0;

  bool operator==(const PixelPair&) const = default;
};

/// A geometric consistency set matched between views m and n.
struct SetTuple {
  std::uint32_t set = 0;
  int view_m = 0;
  int view_n = 0;

  auto operator<=>(const SetTuple&) const = default;
};

struct MatchIndex {
  int view_m = 0;
  int view_n = 0;
  std::vector<PixelPair> pixel_pairs;
  std::vector<SetTuple> set_tuples;

  bool operator==(const MatchIndex&) const = default;
};

}  // namespace geoset
