#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace provdb {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A referenced node or edge id is not known.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Malformed encoded data: bad TSV lines, inconsistent columns.
class CodecError : public Error {
 public:
  explicit CodecError(const std::string& what, std::uint64_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  // 1-based line number of the offending input, or 0 when not line-bound.
  std::uint64_t line() const noexcept { return line_; }

 private:
  std::uint64_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class StoreError : public Error {
 public:
  using Error::Error;
};

class SnapshotError : public StoreError {
 public:
  using StoreError::StoreError;
};

class TranslationError : public Error {
 public:
  using Error::Error;
};

class PipelineError : public Error {
 public:
  using Error::Error;
};

class QueryError : public Error {
 public:
  using Error::Error;
};

}  // namespace provdb
