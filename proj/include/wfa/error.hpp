#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wfa {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotOrthogonal : Error { using Error::Error; };
struct NotProper : Error { using Error::Error; };
struct NonFinite : Error { using Error::Error; };
struct BadCount : Error { using Error::Error; };
struct BadRadius : Error { using Error::Error; };
struct RankDeficientWeights : Error { using Error::Error; };
struct TooFewPoints : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// Parse failures carry the 1-based line number where the input broke.
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
  std::size_t line_number;
};

struct UnsupportedPly : Error { using Error::Error; };

}  // namespace wfa
