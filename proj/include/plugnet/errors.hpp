#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace plugnet {

// Base class for all failures raised by this library. Protocol-level
// rejections (bad digests, denied allocations, ...) are return values or
// wire replies, not exceptions; exceptions mean the caller broke a contract
// or an input could not be understood at all.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidKey : public Error {
 public:
  using Error::Error;
};

class WrongKeyRole : public Error {
 public:
  using Error::Error;
};

// Malformed wire bytes; carries the byte offset where parsing gave up.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_ = 0;
};

// Malformed trace file; carries the 1-based line number.
class TraceParseError : public Error {
 public:
  TraceParseError(const std::string& what, std::size_t line)
      : Error(what + " (trace line " + std::to_string(line) + ")"),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

class AddressError : public Error {
 public:
  using Error::Error;
};

class LifecycleError : public Error {
 public:
  using Error::Error;
};

class ChannelError : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace plugnet
