#pragma once

#include <cmath>
#include <cstdint>

namespace intattn {

// Project-wide rounding rule: ties round away from zero.
inline std::int64_t round_half_away(double x) noexcept {
  return static_cast<std::int64_t>(std::round(x));
}

// floor((2*num + den) / (2*den)) for num >= 0, den > 0: round-half-away of
// num/den without leaving the integer domain.
constexpr std::uint64_t div_round_half_away(std::uint64_t num,
                                            std::uint64_t den) noexcept {
  return (2 * num + den) / (2 * den);
}

}  // namespace intattn
