#pragma once

#include <cstddef>
#include <cstdint>

#include "intattn/matrix.hpp"
#include "intattn/quantizer.hpp"

namespace intattn {

// Output rows computed together by the register-blocked microkernel. Rows
// past the last full block fall back to the scalar path.
inline constexpr std::size_t kGemmMicroRows = 4;

// |127 * 127 * d| must fit an int32 accumulator.
inline constexpr std::size_t kMaxQkDepth = 131070;

// |255 * 127 * L| must fit an int32 accumulator.
inline constexpr std::size_t kMaxPvLength = 65536;

/// Integer attention logits A = Q K^T with their real scale
/// alpha = s_Q * s_K / sqrt(d).
struct LogitMatrix {
  Matrix<std::int32_t> values;
  float alpha;
};

/// C[i, j] = sum_k a[i, k] * b_rows[j, k], exact int32 accumulation.
/// b_rows is the right operand stored transposed (one row per output column).
Matrix<std::int32_t> gemm_s8s8_nt(const Matrix<std::int8_t>& a,
                                  const Matrix<std::int8_t>& b_rows,
                                  int threads = 1);

/// Logit GEMM over per-tensor quantized Q and K (both L x d, K row-major as
/// stored, i.e. already transposed for the product).
LogitMatrix gemm_qk(const QuantizedMatrix& qhat, const QuantizedMatrix& khat,
                    std::size_t d, int threads = 1);

/// O = P V with P unsigned (x255 format) or signed (x127 ablation format).
/// V is L x d in natural layout; the kernel accumulates whole output rows.
/// Scale-free: the caller owns s_V / 255.
Matrix<std::int32_t> gemm_pv(const Matrix<std::uint8_t>& phat,
                             const QuantizedMatrix& vhat, int threads = 1);
Matrix<std::int32_t> gemm_pv(const Matrix<std::int8_t>& phat,
                             const QuantizedMatrix& vhat, int threads = 1);

/// Real GEMM a * b_transposed^T with double accumulation. Reference paths only.
RealMatrix gemm_real(const RealMatrix& a, const RealMatrix& b_transposed,
                     int threads = 1);

namespace serial {

// Untiled single-threaded versions of the kernels above, kept as the
// reference the parallel kernels are checked and benchmarked against.
Matrix<std::int32_t> gemm_s8s8_nt(const Matrix<std::int8_t>& a,
                                  const Matrix<std::int8_t>& b_rows);
Matrix<std::int32_t> gemm_pv(const Matrix<std::uint8_t>& phat,
                             const Matrix<std::int8_t>& v);

}  // namespace serial

}  // namespace intattn
