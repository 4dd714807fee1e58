#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pointcache {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Zero vectors, empty inputs, drop counts that would empty a cloud.
class DegenerateInputError : public Error {
public:
  using Error::Error;
};

// Dimension or length mismatch between operands.
class ShapeError : public Error {
public:
  using Error::Error;
};

// Out-of-range hyperparameter or index.
class ParameterError : public Error {
public:
  using Error::Error;
};

// Two records that must agree (label, id) do not.
class ConsistencyError : public Error {
public:
  using Error::Error;
};

// Malformed on-disk data. Carries the byte offset where decoding failed and,
// when known, the index of the record being decoded.
class FormatError : public Error {
public:
  static constexpr std::int64_t kNoRecord = -1;

  FormatError(const std::string& what, std::uint64_t offset,
              std::int64_t record = kNoRecord)
      : Error(describe(what, offset, record)), offset_(offset), record_(record) {}

  std::uint64_t offset() const noexcept { return offset_; }
  std::int64_t record() const noexcept { return record_; }

private:
  static std::string describe(const std::string& what, std::uint64_t offset,
                              std::int64_t record) {
    std::string msg = what + " (byte offset " + std::to_string(offset);
    if (record != kNoRecord) msg += ", record " + std::to_string(record);
    return msg + ")";
  }

  std::uint64_t offset_;
  std::int64_t record_;
};

}  // namespace pointcache
