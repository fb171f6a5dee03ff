#include "intattn/index_softmax.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "intattn/rounding.hpp"

namespace intattn {
namespace {

constexpr std::int64_t kMaxCInt = std::numeric_limits<std::int32_t>::max();

std::int32_t clamp_c_int(double ratio) {
  if (!(ratio < static_cast<double>(kMaxCInt))) {
    return static_cast<std::int32_t>(kMaxCInt);
  }
  return static_cast<std::int32_t>(
      std::max<std::int64_t>(1, round_half_away(ratio)));
}

// (2 * scale * e + sum) / (2 * sum) in 32-bit unsigned arithmetic.
std::uint32_t normalize(std::uint32_t scale, std::uint32_t e,
                        std::uint32_t sum) {
  return (2 * scale * e + sum) / (2 * sum);
}

void require_mask_shape(const Matrix<std::int32_t>& logits,
                        const AttendMask* mask) {
  if (mask != nullptr) {
    require_same_shape(logits.rows(), logits.cols(), mask->rows(),
                       mask->cols(), "attention mask");
  }
}

// Second pass shared by every variant: idx holds one LUT index per column
// (max_index for masked or fully clipped entries), sum is the row sum of
// the gathered exponentials.
template <typename Out>
void write_normalized_row(std::span<const std::uint8_t> idx,
                          const ExpLut& lut, std::uint32_t sum,
                          std::uint32_t scale, Out* out) {
  if (sum == 0) {
    std::fill(out, out + idx.size(), Out{0});
    return;
  }
  std::uint8_t table[1u << kMaxLutBits];
  for (std::size_t k = 0; k < lut.entries.size(); ++k) {
    table[k] = static_cast<std::uint8_t>(normalize(scale, lut.entries[k], sum));
  }
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out[j] = static_cast<Out>(table[idx[j]]);
  }
}

// First pass for one per-tensor row; returns the row sum of E.
std::uint32_t index_row(std::span<const std::int32_t> a,
                        const std::uint8_t* mask_row, const IndexMapper& map,
                        const ExpLut& lut, std::span<std::uint8_t> idx) {
  const auto tail = static_cast<std::uint8_t>(lut.max_index());
  std::int32_t m = std::numeric_limits<std::int32_t>::min();
  bool any = false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (mask_row == nullptr || mask_row[j] != 0) {
      m = std::max(m, a[j]);
      any = true;
    }
  }
  if (!any) {
    std::fill(idx.begin(), idx.end(), tail);
    return 0;
  }
  const std::int64_t c_int = map.c_int();
  std::uint32_t sum = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    std::uint8_t k = tail;
    if (mask_row == nullptr || mask_row[j] != 0) {
      const std::int64_t dist = std::int64_t{m} - a[j];
      k = static_cast<std::uint8_t>(
          map(static_cast<std::uint32_t>(std::min(dist, c_int))));
    }
    idx[j] = k;
    sum += lut.entries[k];
  }
  return sum;
}

template <typename Out, typename RowFn>
Matrix<Out> run_rows(std::size_t rows, std::size_t cols, std::uint32_t scale,
                     const ExpLut& lut, int threads, RowFn&& first_pass) {
  std::vector<Out> out(rows * cols);
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel num_threads(threads)
  {
    std::vector<std::uint8_t> idx(cols);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(i);
      const std::uint32_t sum = first_pass(r, std::span<std::uint8_t>(idx));
      write_normalized_row<Out>(idx, lut, sum, scale, out.data() + r * cols);
    }
  }
  return Matrix<Out>(rows, cols, std::move(out));
}

template <typename Out>
Matrix<Out> index_softmax_impl(const LogitMatrix& logits, ClipThreshold c_int,
                               const ExpLut& lut, const AttendMask* mask,
                               std::uint32_t scale, int threads) {
  require_mask_shape(logits.values, mask);
  const IndexMapper map(c_int.c_int, lut.max_index());
  const auto& a = logits.values;
  return run_rows<Out>(
      a.rows(), a.cols(), scale, lut, threads,
      [&](std::size_t i, std::span<std::uint8_t> idx) {
        const std::uint8_t* mrow =
            mask != nullptr ? mask->row(i).data() : nullptr;
        return index_row(a.row(i), mrow, map, lut, idx);
      });
}

// Round-half-away of v * mul / 2^16 for Q16 multipliers.
std::int64_t rescale_q16(std::int32_t v, std::uint64_t mul) {
  const auto mag = static_cast<unsigned __int128>(
                       static_cast<std::uint64_t>(v < 0 ? -std::int64_t{v} : v)) *
                   mul;
  const auto r = static_cast<std::int64_t>((mag + (1u << 15)) >> 16);
  return v < 0 ? -r : r;
}

}  // namespace

IndexMapper::IndexMapper(std::int32_t c_int, std::uint32_t max_index)
    : c_int_(static_cast<std::uint32_t>(c_int)), max_index_(max_index) {
  if (c_int < 1) {
    throw Error(Errc::kParameterRange, "c_int must be >= 1");
  }
  // num <= (2n + 1) * c_int and den = 2 * c_int. A multiplier of
  // ceil(2^shift / den) with 2^shift > num_max * den gives exact quotients.
  const std::uint64_t den = 2 * std::uint64_t{c_int_};
  const std::uint64_t num_max = (2 * std::uint64_t{max_index_} + 1) * c_int_;
  const auto bound = static_cast<unsigned __int128>(num_max) * den;
  unsigned width = 0;
  for (auto v = bound; v != 0; v >>= 1) ++width;
  shift_ = width;
  const auto pow = static_cast<unsigned __int128>(1) << shift_;
  multiplier_ = static_cast<std::uint64_t>((pow + den - 1) / den);
}

ExpLut build_lut(int bits, float c) {
  if (bits < kMinLutBits || bits > kMaxLutBits) {
    throw Error(Errc::kParameterRange,
                "LUT bits must be in [2, 8], got " + std::to_string(bits));
  }
  if (!(c > 0.0f) || !std::isfinite(c)) {
    throw Error(Errc::kParameterRange, "clip bound c must be positive");
  }
  const std::size_t size = std::size_t{1} << bits;
  const double n = static_cast<double>(size - 1);
  std::vector<std::uint8_t> entries(size, 0);
  for (std::size_t i = 0; i + 1 < size; ++i) {
    entries[i] = static_cast<std::uint8_t>(
        round_half_away(255.0 * std::exp(-static_cast<double>(c) * i / n)));
  }
  return {bits, c, std::move(entries)};
}

ClipThreshold compute_c_int(float c, std::size_t d, float s_q, float s_k) {
  if (!(c > 0.0f) || d == 0 || !(s_q > 0.0f) || !(s_k > 0.0f)) {
    throw Error(Errc::kParameterRange,
                "compute_c_int: c, d, s_q and s_k must all be positive");
  }
  const double ratio = static_cast<double>(c) *
                       std::sqrt(static_cast<double>(d)) /
                       (static_cast<double>(s_q) * s_k);
  return {clamp_c_int(ratio)};
}

ClipThreshold clip_threshold_from_alpha(float c, double alpha) {
  if (!(c > 0.0f) || !(alpha > 0.0)) {
    throw Error(Errc::kParameterRange,
                "clip threshold needs positive c and alpha");
  }
  return {clamp_c_int(static_cast<double>(c) / alpha)};
}

Matrix<std::uint8_t> gather_exp(const LogitMatrix& logits, ClipThreshold c_int,
                                const ExpLut& lut, const AttendMask* mask,
                                int threads) {
  require_mask_shape(logits.values, mask);
  const IndexMapper map(c_int.c_int, lut.max_index());
  const auto& a = logits.values;
  const std::size_t cols = a.cols();
  std::vector<std::uint8_t> out(a.size());
  const auto n = static_cast<std::int64_t>(a.rows());
#pragma omp parallel num_threads(threads)
  {
    std::vector<std::uint8_t> idx(cols);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(i);
      const std::uint8_t* mrow = mask != nullptr ? mask->row(r).data() : nullptr;
      index_row(a.row(r), mrow, map, lut, idx);
      for (std::size_t j = 0; j < cols; ++j) {
        out[r * cols + j] = lut.entries[idx[j]];
      }
    }
  }
  return Matrix<std::uint8_t>(a.rows(), cols, std::move(out));
}

ProbMatrix index_softmax(const LogitMatrix& logits, ClipThreshold c_int,
                         const ExpLut& lut, const AttendMask* mask,
                         int threads) {
  return {index_softmax_impl<std::uint8_t>(logits, c_int, lut, mask,
                                           ProbMatrix::kDenomScale, threads)};
}

ProbMatrixInt8 index_softmax_int8(const LogitMatrix& logits,
                                  ClipThreshold c_int, const ExpLut& lut,
                                  const AttendMask* mask, int threads) {
  return {index_softmax_impl<std::int8_t>(logits, c_int, lut, mask,
                                          ProbMatrixInt8::kDenomScale, threads)};
}

ProbMatrix index_softmax_grouped(const Matrix<std::int32_t>& logits,
                                 const ColumnGroups& groups, float c,
                                 const ExpLut& lut, GroupedRowMax mode,
                                 const AttendMask* mask, int threads) {
  require_mask_shape(logits, mask);
  const std::size_t cols = logits.cols();
  const std::size_t num_groups = groups.alphas.size();
  if (groups.group_of_column.size() != cols) {
    throw Error(Errc::kUnassignedColumn,
                "group map covers " +
                    std::to_string(groups.group_of_column.size()) +
                    " columns, logits have " + std::to_string(cols));
  }
  for (std::size_t j = 0; j < cols; ++j) {
    if (groups.group_of_column[j] >= num_groups) {
      throw Error(Errc::kUnassignedColumn,
                  "column " + std::to_string(j) + " has no group");
    }
  }
  for (double a : groups.alphas) {
    if (!(a > 0.0)) throw Error(Errc::kDomain, "group alpha must be positive");
  }
  const auto& gcol = groups.group_of_column;
  const auto tail = static_cast<std::uint8_t>(lut.max_index());
  const auto allowed = [mask](std::size_t i, std::size_t j) {
    return mask == nullptr || (*mask)(i, j) != 0;
  };

  if (mode == GroupedRowMax::kPerGroup) {
    std::vector<IndexMapper> maps;
    maps.reserve(num_groups);
    for (double a : groups.alphas) {
      maps.emplace_back(clip_threshold_from_alpha(c, a).c_int, lut.max_index());
    }
    return {run_rows<std::uint8_t>(
        logits.rows(), cols, ProbMatrix::kDenomScale, lut, threads,
        [&](std::size_t i, std::span<std::uint8_t> idx) {
          const auto a = logits.row(i);
          std::vector<std::int64_t> gmax(num_groups,
                                         std::numeric_limits<std::int64_t>::min());
          for (std::size_t j = 0; j < cols; ++j) {
            if (allowed(i, j)) gmax[gcol[j]] = std::max<std::int64_t>(gmax[gcol[j]], a[j]);
          }
          std::uint32_t sum = 0;
          for (std::size_t j = 0; j < cols; ++j) {
            std::uint8_t k = tail;
            if (allowed(i, j)) {
              const auto& map = maps[gcol[j]];
              const std::int64_t dist = gmax[gcol[j]] - a[j];
              k = static_cast<std::uint8_t>(map(static_cast<std::uint32_t>(
                  std::min<std::int64_t>(dist, map.c_int()))));
            }
            idx[j] = k;
            sum += lut.entries[k];
          }
          return sum;
        })};
  }

  const double alpha_ref =
      *std::min_element(groups.alphas.begin(), groups.alphas.end());
  std::vector<std::uint64_t> mul(num_groups);
  for (std::size_t g = 0; g < num_groups; ++g) {
    mul[g] = static_cast<std::uint64_t>(
        round_half_away(groups.alphas[g] / alpha_ref * 65536.0));
  }
  const IndexMapper map(clip_threshold_from_alpha(c, alpha_ref).c_int,
                        lut.max_index());
  const std::int64_t c_int = map.c_int();
  return {run_rows<std::uint8_t>(
      logits.rows(), cols, ProbMatrix::kDenomScale, lut, threads,
      [&](std::size_t i, std::span<std::uint8_t> idx) {
        const auto a = logits.row(i);
        std::vector<std::int64_t> scaled(cols);
        std::int64_t m = std::numeric_limits<std::int64_t>::min();
        bool any = false;
        for (std::size_t j = 0; j < cols; ++j) {
          scaled[j] = rescale_q16(a[j], mul[gcol[j]]);
          if (allowed(i, j)) {
            m = std::max(m, scaled[j]);
            any = true;
          }
        }
        std::uint32_t sum = 0;
        for (std::size_t j = 0; j < cols; ++j) {
          std::uint8_t k = tail;
          if (any && allowed(i, j)) {
            k = static_cast<std::uint8_t>(map(static_cast<std::uint32_t>(
                std::min(m - scaled[j], c_int))));
          }
          idx[j] = k;
          sum += lut.entries[k];
        }
        return sum;
      })};
}

namespace serial {

ProbMatrix index_softmax(const LogitMatrix& logits, ClipThreshold c_int,
                         const ExpLut& lut, const AttendMask* mask) {
  require_mask_shape(logits.values, mask);
  const auto& a = logits.values;
  const std::uint64_t n = lut.max_index();
  const std::int64_t c = c_int.c_int;
  std::vector<std::uint8_t> out(a.size(), 0);
  std::vector<std::uint8_t> e(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto keep = [&](std::size_t j) {
      return mask == nullptr || (*mask)(i, j) != 0;
    };
    std::int64_t m = std::numeric_limits<std::int64_t>::min();
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (keep(j)) m = std::max<std::int64_t>(m, a(i, j));
    }
    std::uint32_t sum = 0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      e[j] = 0;
      if (!keep(j)) continue;
      const std::int64_t clipped = std::min(m - a(i, j), c);
      const std::uint64_t k = div_round_half_away(
          static_cast<std::uint64_t>(clipped) * n, static_cast<std::uint64_t>(c));
      e[j] = lut.entries[k];
      sum += e[j];
    }
    if (sum == 0) continue;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      out[i * a.cols() + j] =
          static_cast<std::uint8_t>(normalize(ProbMatrix::kDenomScale, e[j], sum));
    }
  }
  return {Matrix<std::uint8_t>(a.rows(), a.cols(), std::move(out))};
}

}  // namespace serial

}  // namespace intattn
