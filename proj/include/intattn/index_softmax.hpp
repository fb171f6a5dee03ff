#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "intattn/int_gemm.hpp"
#include "intattn/matrix.hpp"

namespace intattn {

inline constexpr int kDefaultLutBits = 5;
inline constexpr float kDefaultClip = 6.6f;
inline constexpr int kMinLutBits = 2;
inline constexpr int kMaxLutBits = 8;

/// 2^bits-entry UINT8 table: entries[i] = round(255 * exp(-c*i/(2^bits-1)))
/// for i < 2^bits - 1, and the last entry is pinned to 0.
struct ExpLut {
  int bits;
  float c;
  std::vector<std::uint8_t> entries;

  std::uint32_t max_index() const noexcept {
    return static_cast<std::uint32_t>(entries.size() - 1);
  }
};

ExpLut build_lut(int bits, float c);

/// Integer image of the continuous clip bound c.
struct ClipThreshold {
  std::int32_t c_int;
};

/// c_int = max(1, round(c * sqrt(d) / (s_q * s_k))).
ClipThreshold compute_c_int(float c, std::size_t d, float s_q, float s_k);
/// c_int = max(1, round(c / alpha)); used for group-specific thresholds.
ClipThreshold clip_threshold_from_alpha(float c, double alpha);

/// Attention probabilities in x255 UINT8 format.
struct ProbMatrix {
  static constexpr int kDenomScale = 255;
  Matrix<std::uint8_t> values;
};

/// Signed x127 format kept for the P-format ablation.
struct ProbMatrixInt8 {
  static constexpr int kDenomScale = 127;
  Matrix<std::int8_t> values;
};

/// Nonzero entries mark positions a query may attend to. Masked positions
/// are excluded from the row max and contribute exp = 0. A row with no
/// attendable position produces all-zero probabilities.
using AttendMask = Matrix<std::uint8_t>;

/// Maps a clipped distance in [0, c_int] to round_half_away(dist * n / c_int)
/// with n = 2^bits - 1. The divide is replaced by an exact fixed-point
/// reciprocal; results match integer division for every legal input.
class IndexMapper {
 public:
  IndexMapper(std::int32_t c_int, std::uint32_t max_index);

  std::uint32_t operator()(std::uint32_t clipped) const noexcept {
    const std::uint64_t num =
        2 * static_cast<std::uint64_t>(clipped) * max_index_ + c_int_;
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(num) * multiplier_) >> shift_);
  }

  std::uint32_t c_int() const noexcept { return c_int_; }

 private:
  std::uint32_t c_int_;
  std::uint32_t max_index_;
  std::uint64_t multiplier_;
  unsigned shift_;
};

/// Gathered exponential surrogate E (pre-normalization), per row: distance
/// from the row max, clip at c_int, map to a LUT index, gather.
Matrix<std::uint8_t> gather_exp(const LogitMatrix& logits, ClipThreshold c_int,
                                const ExpLut& lut,
                                const AttendMask* mask = nullptr,
                                int threads = 1);

/// Full IndexSoftmax: gather_exp followed by integer row normalization
/// P = round_half_away(255 * E / rowSum(E)). No floating point per element.
ProbMatrix index_softmax(const LogitMatrix& logits, ClipThreshold c_int,
                         const ExpLut& lut, const AttendMask* mask = nullptr,
                         int threads = 1);

/// Same operator normalized to 127 and stored signed.
ProbMatrixInt8 index_softmax_int8(const LogitMatrix& logits,
                                  ClipThreshold c_int, const ExpLut& lut,
                                  const AttendMask* mask = nullptr,
                                  int threads = 1);

/// How distances are measured when key columns carry different logit
/// scales alpha^(g).
enum class GroupedRowMax {
  // Each group's distances are taken from that group's own row max and
  // clipped with the group's c_int^(g).
  kPerGroup,
  // Logits are rescaled to the finest group scale with Q16 fixed-point
  // multipliers, then a single row max and threshold apply.
  kCommonScale,
};

struct ColumnGroups {
  std::vector<std::size_t> group_of_column;
  std::vector<double> alphas;
};

ProbMatrix index_softmax_grouped(const Matrix<std::int32_t>& logits,
                                 const ColumnGroups& groups, float c,
                                 const ExpLut& lut,
                                 GroupedRowMax mode = GroupedRowMax::kPerGroup,
                                 const AttendMask* mask = nullptr,
                                 int threads = 1);

namespace serial {

// Literal per-element evaluation with plain integer division.
ProbMatrix index_softmax(const LogitMatrix& logits, ClipThreshold c_int,
                         const ExpLut& lut, const AttendMask* mask = nullptr);

}  // namespace serial

}  // namespace intattn
