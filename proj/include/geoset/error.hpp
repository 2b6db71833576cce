#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace geoset {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A contract violation on caller-supplied arguments.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable file. Carries the offending path and, when the
/// failure can be localized, the byte offset into the file.
class IoError : public Error {
 public:
  IoError(std::string path, const std::string& message,
          std::optional<std::uint64_t> offset = std::nullopt);

  const std::string& path() const noexcept { return path_; }
  std::optional<std::uint64_t> offset() const noexcept { return offset_; }

 private:
  std::string path_;
  std::optional<std::uint64_t> offset_;
};

}  // namespace geoset
