#pragma once

#include <stdexcept>
#include <string>

namespace vqa {

enum class ErrorKind {
  kInvalidArgument,  // precondition violated by a caller-supplied value
  kData,             // malformed or inconsistent input data
  kNumeric,          // non-finite or otherwise unusable numeric result
  kIo,
};

// Single exception type for the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::kInvalidArgument, what);
}

}  // namespace vqa
