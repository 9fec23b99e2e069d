#pragma once

#include <stdexcept>
#include <string>

namespace tbcmp {

// Base class for every recoverable data error raised by this library.
// The CLI maps these to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : Error {
  using Error::Error;
};

// Malformed input text or bytes (trace lines, pcap headers, CSV, manifests).
struct ParseError : Error {
  using Error::Error;
};

}  // namespace tbcmp
