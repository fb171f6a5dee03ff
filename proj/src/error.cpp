#include "intattn/error.hpp"

namespace intattn {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::kMalformedHeader:
      return "malformed header";
    case Errc::kElementKindMismatch:
      return "element kind mismatch";
    case Errc::kTruncatedPayload:
      return "truncated payload";
    case Errc::kShape:
      return "shape error";
    case Errc::kIo:
      return "I/O error";
    case Errc::kDomain:
      return "domain error";
    case Errc::kDimensionMismatch:
      return "dimension mismatch";
    case Errc::kAccumulatorBound:
      return "accumulator bound exceeded";
    case Errc::kParameterRange:
      return "parameter out of range";
    case Errc::kUnassignedColumn:
      return "unassigned column";
    case Errc::kUsage:
      return "usage error";
  }
  return "unknown error";
}

}  // namespace intattn
