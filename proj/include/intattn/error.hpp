#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace intattn {

enum class Errc {
  kMalformedHeader,
  kElementKindMismatch,
  kTruncatedPayload,
  kShape,
  kIo,
  kDomain,
  kDimensionMismatch,
  kAccumulatorBound,
  kParameterRange,
  kUnassignedColumn,
  kUsage,
};

std::string_view to_string(Errc code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace intattn
