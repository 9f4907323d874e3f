#pragma once

#include <stdexcept>
#include <string>

namespace vemspectra {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text; `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// A mesh or element violates a structural invariant. `element()` is -1 when
/// the problem is not tied to a single element.
class MeshError : public Error {
 public:
  MeshError(int element, const std::string& what)
      : Error(element >= 0 ? "element " + std::to_string(element) + ": " + what : what),
        element_(element) {}
  int element() const noexcept { return element_; }

 private:
  int element_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace vemspectra
