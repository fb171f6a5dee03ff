#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "intattn/matrix.hpp"

namespace intattn {

// Floor on max|X| so an all-zero tensor still gets a positive scale.
inline constexpr double kScaleEpsilon = 1e-12;
inline constexpr int kInt8Max = 127;

/// How scales are shared across a matrix. Row groups are blocks of
/// consecutive rows (token/key blocks); column groups are blocks of
/// consecutive columns (channel groups).
struct QuantGranularity {
  enum class Kind { kPerTensor, kPerRowGroup, kPerColGroup };

  Kind kind = Kind::kPerTensor;
  std::size_t group_size = 0;

  static QuantGranularity per_tensor() { return {}; }
  static QuantGranularity per_row_group(std::size_t n) {
    return {Kind::kPerRowGroup, n};
  }
  static QuantGranularity per_col_group(std::size_t n) {
    return {Kind::kPerColGroup, n};
  }

  // Throws kShape when group_size is zero or does not divide the grouped
  // dimension.
  void validate(std::size_t rows, std::size_t cols) const;
  std::size_t group_count(std::size_t rows, std::size_t cols) const;
  std::size_t group_of(std::size_t i, std::size_t j) const noexcept {
    switch (kind) {
      case Kind::kPerRowGroup:
        return i / group_size;
      case Kind::kPerColGroup:
        return j / group_size;
      case Kind::kPerTensor:
        break;
    }
    return 0;
  }

  friend bool operator==(const QuantGranularity&,
                         const QuantGranularity&) = default;
};

/// Symmetric INT8 tensor: X ~= scales[g] * values within group g.
struct QuantizedMatrix {
  Matrix<std::int8_t> values;
  std::vector<float> scales;
  QuantGranularity granularity;

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return values.cols(); }
  float scale_at(std::size_t i, std::size_t j) const noexcept {
    return scales[granularity.group_of(i, j)];
  }
  // Per-tensor scale; throws kDomain on grouped matrices.
  float tensor_scale() const;
};

/// scale(g) = max(eps, max|X_g|) / 127 and
/// values = clamp(round_half_away(X / scale), -127, 127).
/// Throws kDomain on non-finite input.
QuantizedMatrix quantize_symmetric(const RealMatrix& x,
                                   QuantGranularity granularity = {},
                                   int threads = 1);

RealMatrix dequantize(const QuantizedMatrix& q, int threads = 1);

}  // namespace intattn
