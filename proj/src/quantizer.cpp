#include "intattn/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "intattn/rounding.hpp"

namespace intattn {

void QuantGranularity::validate(std::size_t rows, std::size_t cols) const {
  if (kind == Kind::kPerTensor) return;
  const std::size_t dim = kind == Kind::kPerRowGroup ? rows : cols;
  if (group_size == 0 || dim % group_size != 0) {
    throw Error(Errc::kShape, "group size " + std::to_string(group_size) +
                                  " does not divide dimension " +
                                  std::to_string(dim));
  }
}

std::size_t QuantGranularity::group_count(std::size_t rows,
                                          std::size_t cols) const {
  validate(rows, cols);
  switch (kind) {
    case Kind::kPerRowGroup:
      return rows / group_size;
    case Kind::kPerColGroup:
      return cols / group_size;
    case Kind::kPerTensor:
      break;
  }
  return 1;
}

float QuantizedMatrix::tensor_scale() const {
  if (granularity.kind != QuantGranularity::Kind::kPerTensor) {
    throw Error(Errc::kDomain, "per-tensor scale requested from grouped matrix");
  }
  return scales.front();
}

QuantizedMatrix quantize_symmetric(const RealMatrix& x,
                                   QuantGranularity granularity, int threads) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  const std::size_t groups = granularity.group_count(rows, cols);
  const auto src = x.data();

  bool finite = true;
  for (float v : src) finite = finite && std::isfinite(v);
  if (!finite) throw Error(Errc::kDomain, "non-finite element in quantizer input");

  std::vector<float> absmax(groups, 0.0f);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      auto& m = absmax[granularity.group_of(i, j)];
      m = std::max(m, std::fabs(src[i * cols + j]));
    }
  }

  std::vector<float> scales(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    scales[g] = static_cast<float>(
        std::max(kScaleEpsilon, static_cast<double>(absmax[g])) / kInt8Max);
  }

  std::vector<std::int8_t> out(rows * cols);
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t at = static_cast<std::size_t>(i) * cols + j;
      const double scale = scales[granularity.group_of(i, j)];
      const auto q = round_half_away(static_cast<double>(src[at]) / scale);
      out[at] = static_cast<std::int8_t>(
          std::clamp<std::int64_t>(q, -kInt8Max, kInt8Max));
    }
  }

  return {Matrix<std::int8_t>(rows, cols, std::move(out)), std::move(scales),
          granularity};
}

RealMatrix dequantize(const QuantizedMatrix& q, int threads) {
  const std::size_t rows = q.rows();
  const std::size_t cols = q.cols();
  const auto src = q.values.data();
  std::vector<float> out(rows * cols);
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t at = static_cast<std::size_t>(i) * cols + j;
      out[at] = q.scale_at(i, j) * static_cast<float>(src[at]);
    }
  }
  return RealMatrix(rows, cols, std::move(out));
}

}  // namespace intattn
