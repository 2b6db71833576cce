#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace geoset::detail {

struct Gray16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> pixels;  // row-major
};

// Both throw IoError naming `path`.
Gray16 read_png16(const std::string& path);
void write_png16(const std::string& path, const Gray16& image);

}  // namespace geoset::detail
