#pragma once

#include <stdexcept>
#include <string>

namespace seer {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed record in an input file; message carries the line number.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EmptyKey : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutOfOrderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OrderOutOfRange : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct OrderMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct StateArityMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CorruptSnapshot : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace seer
