#include "intattn/int_gemm.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace intattn {
namespace {

void require_inner(std::size_t lhs, std::size_t rhs, const char* what) {
  if (lhs != rhs) {
    throw Error(Errc::kDimensionMismatch,
                std::string(what) + ": inner dimension " + std::to_string(lhs) +
                    " vs " + std::to_string(rhs));
  }
}

std::int32_t dot_s8(const std::int8_t* a, const std::int8_t* b,
                    std::size_t n) {
  std::int32_t acc = 0;
  for (std::size_t k = 0; k < n; ++k) {
    acc += static_cast<std::int32_t>(a[k]) * static_cast<std::int32_t>(b[k]);
  }
  return acc;
}

template <typename P>
Matrix<std::int32_t> pv_kernel(const Matrix<P>& phat,
                               const QuantizedMatrix& vhat, int threads) {
  require_inner(phat.cols(), vhat.rows(), "gemm_pv");
  if (phat.cols() > kMaxPvLength) {
    throw Error(Errc::kAccumulatorBound,
                "gemm_pv: L = " + std::to_string(phat.cols()) +
                    " exceeds int32 accumulator bound " +
                    std::to_string(kMaxPvLength));
  }
  const std::size_t m = phat.rows();
  const std::size_t l = phat.cols();
  const std::size_t d = vhat.cols();
  const P* p = phat.data().data();
  const std::int8_t* v = vhat.values.data().data();
  std::vector<std::int32_t> out(m * d, 0);

  const auto n = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    std::int32_t* acc = out.data() + static_cast<std::size_t>(i) * d;
    const P* prow = p + static_cast<std::size_t>(i) * l;
    for (std::size_t k = 0; k < l; ++k) {
      const std::int32_t w = prow[k];
      // Clipped probabilities are exactly zero; skipping them is exact.
      if (w == 0) continue;
      const std::int8_t* vrow = v + k * d;
      for (std::size_t j = 0; j < d; ++j) {
        acc[j] += w * static_cast<std::int32_t>(vrow[j]);
      }
    }
  }
  return Matrix<std::int32_t>(m, d, std::move(out));
}

}  // namespace

Matrix<std::int32_t> gemm_s8s8_nt(const Matrix<std::int8_t>& a,
                                  const Matrix<std::int8_t>& b_rows,
                                  int threads) {
  require_inner(a.cols(), b_rows.cols(), "gemm_s8s8_nt");
  if (a.cols() > kMaxQkDepth) {
    throw Error(Errc::kAccumulatorBound,
                "gemm_s8s8_nt: depth " + std::to_string(a.cols()) +
                    " exceeds int32 accumulator bound " +
                    std::to_string(kMaxQkDepth));
  }
  const std::size_t m = a.rows();
  const std::size_t n = b_rows.rows();
  const std::size_t depth = a.cols();
  const std::int8_t* pa = a.data().data();
  const std::int8_t* pb = b_rows.data().data();
  std::vector<std::int32_t> out(m * n);

  const auto blocks =
      static_cast<std::int64_t>((m + kGemmMicroRows - 1) / kGemmMicroRows);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * kGemmMicroRows;
    std::int32_t* c = out.data() + i0 * n;
    if (i0 + kGemmMicroRows <= m) {
      const std::int8_t* a0 = pa + i0 * depth;
      const std::int8_t* a1 = a0 + depth;
      const std::int8_t* a2 = a1 + depth;
      const std::int8_t* a3 = a2 + depth;
      for (std::size_t j = 0; j < n; ++j) {
        const std::int8_t* b = pb + j * depth;
        std::int32_t c0 = 0, c1 = 0, c2 = 0, c3 = 0;
        for (std::size_t k = 0; k < depth; ++k) {
          const std::int32_t bk = b[k];
          c0 += static_cast<std::int32_t>(a0[k]) * bk;
          c1 += static_cast<std::int32_t>(a1[k]) * bk;
          c2 += static_cast<std::int32_t>(a2[k]) * bk;
          c3 += static_cast<std::int32_t>(a3[k]) * bk;
        }
        c[j] = c0;
        c[n + j] = c1;
        c[2 * n + j] = c2;
        c[3 * n + j] = c3;
      }
    } else {
      for (std::size_t i = i0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          out[i * n + j] = dot_s8(pa + i * depth, pb + j * depth, depth);
        }
      }
    }
  }
  return Matrix<std::int32_t>(m, n, std::move(out));
}

LogitMatrix gemm_qk(const QuantizedMatrix& qhat, const QuantizedMatrix& khat,
                    std::size_t d, int threads) {
  require_inner(qhat.cols(), khat.cols(), "gemm_qk");
  require_inner(qhat.cols(), d, "gemm_qk head dimension");
  const double alpha = static_cast<double>(qhat.tensor_scale()) *
                       khat.tensor_scale() / std::sqrt(static_cast<double>(d));
  return {gemm_s8s8_nt(qhat.values, khat.values, threads),
          static_cast<float>(alpha)};
}

Matrix<std::int32_t> gemm_pv(const Matrix<std::uint8_t>& phat,
                             const QuantizedMatrix& vhat, int threads) {
  return pv_kernel(phat, vhat, threads);
}

Matrix<std::int32_t> gemm_pv(const Matrix<std::int8_t>& phat,
                             const QuantizedMatrix& vhat, int threads) {
  return pv_kernel(phat, vhat, threads);
}

RealMatrix gemm_real(const RealMatrix& a, const RealMatrix& b_transposed,
                     int threads) {
  require_inner(a.cols(), b_transposed.cols(), "gemm_real");
  const std::size_t m = a.rows();
  const std::size_t n = b_transposed.rows();
  const std::size_t depth = a.cols();
  const float* pa = a.data().data();
  const float* pb = b_transposed.data().data();
  std::vector<float> out(m * n);

  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < rows; ++i) {
    const float* arow = pa + static_cast<std::size_t>(i) * depth;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const float* b0 = pb + j * depth;
      const float* b1 = b0 + depth;
      const float* b2 = b1 + depth;
      const float* b3 = b2 + depth;
      double c0 = 0, c1 = 0, c2 = 0, c3 = 0;
      for (std::size_t k = 0; k < depth; ++k) {
        const double ak = arow[k];
        c0 += ak * b0[k];
        c1 += ak * b1[k];
        c2 += ak * b2[k];
        c3 += ak * b3[k];
      }
      float* c = out.data() + static_cast<std::size_t>(i) * n + j;
      c[0] = static_cast<float>(c0);
      c[1] = static_cast<float>(c1);
      c[2] = static_cast<float>(c2);
      c[3] = static_cast<float>(c3);
    }
    for (; j < n; ++j) {
      const float* b = pb + j * depth;
      double acc = 0;
      for (std::size_t k = 0; k < depth; ++k) acc += double{arow[k]} * b[k];
      out[static_cast<std::size_t>(i) * n + j] = static_cast<float>(acc);
    }
  }
  return RealMatrix(m, n, std::move(out));
}

namespace serial {

Matrix<std::int32_t> gemm_s8s8_nt(const Matrix<std::int8_t>& a,
                                  const Matrix<std::int8_t>& b_rows) {
  require_inner(a.cols(), b_rows.cols(), "serial::gemm_s8s8_nt");
  std::vector<std::int32_t> out(a.rows() * b_rows.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b_rows.rows(); ++j) {
      out[i * b_rows.rows() + j] =
          dot_s8(a.row(i).data(), b_rows.row(j).data(), a.cols());
    }
  }
  return Matrix<std::int32_t>(a.rows(), b_rows.rows(), std::move(out));
}

Matrix<std::int32_t> gemm_pv(const Matrix<std::uint8_t>& phat,
                             const Matrix<std::int8_t>& v) {
  require_inner(phat.cols(), v.rows(), "serial::gemm_pv");
  std::vector<std::int32_t> out(phat.rows() * v.cols());
  for (std::size_t i = 0; i < phat.rows(); ++i) {
    for (std::size_t j = 0; j < v.cols(); ++j) {
      std::int32_t acc = 0;
      for (std::size_t k = 0; k < phat.cols(); ++k) {
        acc += static_cast<std::int32_t>(phat(i, k)) * v(k, j);
      }
      out[i * v.cols() + j] = acc;
    }
  }
  return Matrix<std::int32_t>(phat.rows(), v.cols(), std::move(out));
}

}  // namespace serial

}  // namespace intattn
