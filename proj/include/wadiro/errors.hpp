#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wadiro {

// Thrown when an operation is called on an object in the wrong state,
// e.g. transforming with an unfitted scaler.
class StateError : public std::logic_error {
 public:
  explicit StateError(const std::string& what) : std::logic_error(what) {}
};

// Versioned-format violation: the file is well-formed but its schema
// version is not supported by this build.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& what, int found, int supported)
      : std::runtime_error(what), found_version(found), supported_version(supported) {}
  int found_version;
  int supported_version;
};

// Malformed input file. byte_offset is the position of the first byte
// that could not be parsed (0 when unknown).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what), byte_offset(offset) {}
  std::size_t byte_offset;
};

// A long-running producer ran out of budget after emitting a usable
// prefix. The caller decides whether the prefix is acceptable.
class PartialResultError : public std::runtime_error {
 public:
  PartialResultError(const std::string& what, std::size_t produced, std::size_t requested)
      : std::runtime_error(what), produced_count(produced), requested_count(requested) {}
  std::size_t produced_count;
  std::size_t requested_count;
};

}  // namespace wadiro
