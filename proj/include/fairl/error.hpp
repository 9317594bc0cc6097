#pragma once

#include <stdexcept>
#include <string>

namespace fairl {

// Malformed input file. `where` carries the line or row diagnostic.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& file, const std::string& where, const std::string& what)
      : std::runtime_error(file + ": " + where + ": " + what) {}
};

// Score vector with no spread (constant up to the degeneracy epsilon).
class DegenerateError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Optimisation produced a non-finite loss, gradient or objective.
class DivergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace fairl
