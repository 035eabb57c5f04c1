#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace muf {

struct SourceLoc {
  uint32_t line = 0;  // 1-based; 0 means unknown
  uint32_t col = 0;

  std::string str() const {
    if (line == 0) return "<unknown>";
    return std::to_string(line) + ":" + std::to_string(col);
  }
};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Lexing/parsing failure.
struct ParseError : Error {
  ParseError(const SourceLoc& loc, const std::string& msg)
      : Error(loc.str() + ": parse error: " + msg) {}
};

// Core type checking failure.
struct TypeError : Error {
  TypeError(const SourceLoc& loc, const std::string& msg)
      : Error(loc.str() + ": type error: " + msg) {}
};

// Broken invariant in the sampling graph (observing a realized node, ...).
struct GraphError : Error {
  explicit GraphError(const std::string& msg) : Error("graph error: " + msg) {}
};

// Evaluation failure (bad input shape, undefined moment, zero weights, ...).
struct EvalError : Error {
  explicit EvalError(const std::string& msg) : Error("runtime error: " + msg) {}
};

}  // namespace muf
