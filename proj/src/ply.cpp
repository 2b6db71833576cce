#include "geoset/ply.hpp"

#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string_view>
#include <vector>

#include "geoset/error.hpp"

namespace geoset {
namespace {

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<ScalarType> parse_type(std::string_view name) {
  if (name == "char" || name == "int8") return ScalarType::Int8;
  if (name == "uchar" || name == "uint8") return ScalarType::UInt8;
  if (name == "short" || name == "int16") return ScalarType::Int16;
  if (name == "ushort" || name == "uint16") return ScalarType::UInt16;
  if (name == "int" || name == "int32") return ScalarType::Int32;
  if (name == "uint" || name == "uint32") return ScalarType::UInt32;
  if (name == "float" || name == "float32") return ScalarType::Float32;
  if (name == "double" || name == "float64") return ScalarType::Float64;
  return std::nullopt;
}

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Float64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::Float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::UInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;

  int find(std::string_view prop) const {
    for (std::size_t i = 0; i < properties.size(); ++i) {
      if (properties[i].name == prop) return static_cast<int>(i);
    }
    return -1;
  }
};

// Cursor over the file contents that reports failures with byte offsets.
class Reader {
 public:
  Reader(std::string contents, std::string name) : buf_(std::move(contents)), name_(std::move(name)) {}

  [[noreturn]] void fail(const std::string& message) const { throw IoError(name_, message, pos_); }

  std::string_view line() {
    if (pos_ >= buf_.size()) fail("unexpected end of file in header");
    const auto end = buf_.find('\n', pos_);
    const auto stop = end == std::string::npos ? buf_.size() : end;
    std::string_view out(buf_.data() + pos_, stop - pos_);
    if (!out.empty() && out.back() == '\r') out.remove_suffix(1);
    line_start_ = pos_;
    pos_ = stop == buf_.size() ? stop : stop + 1;
    return out;
  }

  [[noreturn]] void fail_line(const std::string& message) const { throw IoError(name_, message, line_start_); }

  double binary(ScalarType t) {
    const std::size_t size = type_size(t);
    if (pos_ + size > buf_.size()) fail("unexpected end of binary data");
    const char* p = buf_.data() + pos_;
    pos_ += size;
    auto load = [p]<typename T>(T) {
      T value;
      std::memcpy(&value, p, sizeof(T));
      return static_cast<double>(value);
    };
    switch (t) {
      case ScalarType::Int8: return load(std::int8_t{});
      case ScalarType::UInt8: return load(std::uint8_t{});
      case ScalarType::Int16: return load(std::int16_t{});
      case ScalarType::UInt16: return load(std::uint16_t{});
      case ScalarType::Int32: return load(std::int32_t{});
      case ScalarType::UInt32: return load(std::uint32_t{});
      case ScalarType::Float32: return load(float{});
      case ScalarType::Float64: return load(double{});
    }
    return 0.0;
  }

  double ascii() {
    while (pos_ < buf_.size() && std::isspace(static_cast<unsigned char>(buf_[pos_]))) ++pos_;
    if (pos_ >= buf_.size()) fail("unexpected end of ASCII data");
    const char* begin = buf_.data() + pos_;
    const char* end = buf_.data() + buf_.size();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || (ptr != end && !std::isspace(static_cast<unsigned char>(*ptr))))
      fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - begin);
    return value;
  }

  std::size_t position() const { return pos_; }

 private:
  std::string buf_;
  std::string name_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::uint32_t vertex_index(double value, std::size_t vertex_count, Reader& reader) {
  if (!(value >= 0.0) || value >= static_cast<double>(vertex_count) || value != static_cast<double>(static_cast<std::uint64_t>(value)))
    reader.fail("vertex index out of range");
  return static_cast<std::uint32_t>(value);
}

}  // namespace

PointCloud read_ply(std::istream& in, const std::string& name) {
  std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader reader(std::move(contents), name);

  if (reader.line() != "ply") reader.fail_line("missing 'ply' magic");
  std::optional<PlyFormat> format;
  std::vector<Element> elements;
  for (;;) {
    const auto tokens = split(reader.line());
    if (tokens.empty()) continue;
    const auto& key = tokens[0];
    if (key == "end_header") break;
    if (key == "comment" || key == "obj_info") continue;
    if (key == "format") {
      if (tokens.size() < 2) reader.fail_line("malformed format line");
      if (tokens[1] == "ascii") format = PlyFormat::Ascii;
      else if (tokens[1] == "binary_little_endian") format = PlyFormat::BinaryLittleEndian;
      else reader.fail_line("unsupported PLY format '" + std::string(tokens[1]) + "'");
    } else if (key == "element") {
      if (tokens.size() != 3) reader.fail_line("malformed element line");
      std::size_t count = 0;
      const auto [ptr, ec] = std::from_chars(tokens[2].data(), tokens[2].data() + tokens[2].size(), count);
      if (ec != std::errc{} || ptr != tokens[2].data() + tokens[2].size()) reader.fail_line("malformed element count");
      elements.push_back({std::string(tokens[1]), count, {}});
    } else if (key == "property") {
      if (elements.empty()) reader.fail_line("property before any element");
      Property prop;
      if (tokens.size() == 5 && tokens[1] == "list") {
        const auto count_type = parse_type(tokens[2]);
        const auto item_type = parse_type(tokens[3]);
        if (!count_type || !item_type) reader.fail_line("unknown list property type");
        prop = {std::string(tokens[4]), *item_type, true, *count_type};
      } else if (tokens.size() == 3) {
        const auto type = parse_type(tokens[1]);
        if (!type) reader.fail_line("unknown property type '" + std::string(tokens[1]) + "'");
        prop = {std::string(tokens[2]), *type, false, ScalarType::UInt8};
      } else {
        reader.fail_line("malformed property line");
      }
      elements.back().properties.push_back(prop);
    } else {
      reader.fail_line("unexpected header line");
    }
  }
  if (!format) reader.fail("header has no format line");

  const bool ascii = *format == PlyFormat::Ascii;
  auto read_value = [&](ScalarType t) { return ascii ? reader.ascii() : reader.binary(t); };

  PointCloud cloud;
  std::vector<Edge> edges;
  std::vector<Edge> face_edges;
  std::size_t vertex_count = 0;
  bool seen_vertex = false;
  std::vector<double> values;
  std::vector<double> list;

  for (const auto& element : elements) {
    const bool is_vertex = element.name == "vertex";
    const bool is_edge = element.name == "edge";
    const bool is_face = element.name == "face";
    std::array<int, 6> cols{-1, -1, -1, -1, -1, -1};
    int v1 = -1, v2 = -1, face_list = -1;
    if (is_vertex) {
      if (seen_vertex) reader.fail("duplicate vertex element");
      seen_vertex = true;
      const char* names[] = {"x", "y", "z", "nx", "ny", "nz"};
      for (int i = 0; i < 6; ++i) cols[i] = element.find(names[i]);
      if (cols[0] < 0 || cols[1] < 0 || cols[2] < 0) reader.fail("vertex element lacks x, y or z");
      vertex_count = element.count;
      cloud.positions.reserve(element.count);
    }
    const bool has_normals = is_vertex && cols[3] >= 0 && cols[4] >= 0 && cols[5] >= 0;
    if ((is_edge || is_face) && !seen_vertex) reader.fail(element.name + " element precedes vertices");
    if (is_edge) {
      v1 = element.find("vertex1");
      v2 = element.find("vertex2");
      if (v1 < 0 || v2 < 0) reader.fail("edge element lacks vertex1 or vertex2");
    }
    if (is_face) {
      face_list = element.find("vertex_indices");
      if (face_list < 0) face_list = element.find("vertex_index");
    }

    values.assign(element.properties.size(), 0.0);
    for (std::size_t item = 0; item < element.count; ++item) {
      for (std::size_t p = 0; p < element.properties.size(); ++p) {
        const auto& prop = element.properties[p];
        if (!prop.is_list) {
          values[p] = read_value(prop.type);
          continue;
        }
        const double count = read_value(prop.count_type);
        if (!(count >= 0.0) || count > 1e7) reader.fail("invalid list length");
        list.resize(static_cast<std::size_t>(count));
        for (auto& x : list) x = read_value(prop.type);
        if (static_cast<int>(p) == face_list && list.size() >= 2) {
          for (std::size_t k = 0; k < list.size(); ++k) {
            const auto a = vertex_index(list[k], vertex_count, reader);
            const auto b = vertex_index(list[(k + 1) % list.size()], vertex_count, reader);
            if (a != b) face_edges.push_back({a, b});
          }
        }
      }
      if (is_vertex) {
        cloud.positions.emplace_back(values[cols[0]], values[cols[1]], values[cols[2]]);
        if (has_normals) cloud.normals.emplace_back(values[cols[3]], values[cols[4]], values[cols[5]]);
      } else if (is_edge) {
        const auto a = vertex_index(values[v1], vertex_count, reader);
        const auto b = vertex_index(values[v2], vertex_count, reader);
        if (a != b) edges.push_back({a, b});
      }
    }
  }
  if (!seen_vertex) reader.fail("file has no vertex element");
  cloud.edges = canonicalize_edges(edges.empty() ? std::move(face_edges) : std::move(edges));
  return cloud;
}

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open file");
  return read_ply(in, path.string());
}

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_ascii(std::ostream& out, double value) {
  std::array<char, 32> text{};
  const auto [ptr, ec] = std::to_chars(text.data(), text.data() + text.size(), value);
  out.write(text.data(), ptr - text.data());
}

}  // namespace

void write_ply(std::ostream& out, const PointCloud& cloud, PlyFormat format) {
  const bool normals = cloud.has_normals();
  out << "ply\n"
      << (format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (!cloud.edges.empty())
    out << "element edge " << cloud.edges.size() << "\nproperty uint vertex1\nproperty uint vertex2\n";
  out << "end_header\n";

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    std::array<double, 6> row{};
    for (int k = 0; k < 3; ++k) row[k] = cloud.positions[i][k];
    if (normals) for (int k = 0; k < 3; ++k) row[3 + k] = cloud.normals[i][k];
    const int width = normals ? 6 : 3;
    for (int k = 0; k < width; ++k) {
      if (format == PlyFormat::Ascii) {
        if (k) out << ' ';
        put_ascii(out, row[k]);
      } else {
        put(out, row[k]);
      }
    }
    if (format == PlyFormat::Ascii) out << '\n';
  }
  for (const auto& e : cloud.edges) {
    if (format == PlyFormat::Ascii) {
      out << e.a << ' ' << e.b << '\n';
    } else {
      put(out, e.a);
      put(out, e.b);
    }
  }
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open file for writing");
  write_ply(out, cloud, format);
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace geoset
