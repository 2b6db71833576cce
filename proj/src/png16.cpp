#include "png16.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>

#include "geoset/error.hpp"

namespace geoset::detail {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

// Returns false when libpng reported an error through longjmp.
bool decode(std::FILE* file, Gray16& out, const char*& problem) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    problem = "cannot allocate PNG decoder";
    return false;
  }
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    problem = "corrupt PNG data";
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);
  if (png_get_bit_depth(png, info) != 16 || png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    problem = "expected a 16-bit grayscale PNG";
    return false;
  }
  png_set_swap(png);  // PNG stores big-endian samples
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y)
    rows[y] = reinterpret_cast<png_bytep>(out.pixels.data() + static_cast<std::size_t>(y) * out.width);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode(std::FILE* file, const Gray16& image, const char*& problem) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    problem = "cannot allocate PNG encoder";
    return false;
  }
  std::vector<png_bytep> rows(image.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    problem = "PNG encoding failed";
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, image.width, image.height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);
  for (int y = 0; y < image.height; ++y)
    rows[y] = reinterpret_cast<png_bytep>(const_cast<std::uint16_t*>(image.pixels.data()) +
                                          static_cast<std::size_t>(y) * image.width);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

Gray16 read_png16(const std::string& path) {
  File file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError(path, "cannot open file");
  Gray16 image;
  const char* problem = nullptr;
  if (!decode(file.get(), image, problem)) throw IoError(path, problem);
  return image;
}

void write_png16(const std::string& path, const Gray16& image) {
  File file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError(path, "cannot open file for writing");
  const char* problem = nullptr;
  if (!encode(file.get(), image, problem)) throw IoError(path, problem);
}

}  // namespace geoset::detail
