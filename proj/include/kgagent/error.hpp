#pragma once

#include <stdexcept>
#include <string>

namespace kgagent {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files (TSV, JSON-lines, config).
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Failure talking to a remote policy, web search, or judge endpoint.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace kgagent
