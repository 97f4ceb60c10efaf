#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lamner {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the lexer; `offset` is the byte offset of the offending construct.
class LexError : public Error {
 public:
  LexError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Raised while reading datasets; `line` is 1-based (0 when not line-specific).
class DatasetError : public Error {
 public:
  DatasetError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace lamner
