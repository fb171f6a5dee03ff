#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "intattn/error.hpp"

namespace intattn {

// On-disk element-kind codes (byte 4 of the tensor header).
enum class ElementKind : std::uint8_t {
  kReal32 = 0,
  kInt8 = 1,
  kUint8 = 2,
  kInt32 = 3,
};

template <typename E>
struct ElementTraits;

template <>
struct ElementTraits<float> {
  static constexpr ElementKind kind = ElementKind::kReal32;
};
template <>
struct ElementTraits<std::int8_t> {
  static constexpr ElementKind kind = ElementKind::kInt8;
};
template <>
struct ElementTraits<std::uint8_t> {
  static constexpr ElementKind kind = ElementKind::kUint8;
};
template <>
struct ElementTraits<std::int32_t> {
  static constexpr ElementKind kind = ElementKind::kInt32;
};

template <typename E>
concept MatrixElement = requires { ElementTraits<E>::kind; };

/// Dense row-major matrix. Element (i, j) lives at offset i * cols + j.
///
/// Instances are immutable once constructed; kernels assemble a buffer and
/// move it in.
template <MatrixElement E>
class Matrix {
 public:
  using value_type = E;

  Matrix(std::size_t rows, std::size_t cols, std::vector<E> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows_ == 0 || cols_ == 0) {
      throw Error(Errc::kShape, "matrix dimensions must be >= 1, got " +
                                    std::to_string(rows_) + "x" +
                                    std::to_string(cols_));
    }
    if (data_.size() != rows_ * cols_) {
      throw Error(Errc::kShape, "matrix payload holds " +
                                    std::to_string(data_.size()) +
                                    " elements, expected " +
                                    std::to_string(rows_ * cols_));
    }
  }

  // Zero-filled.
  Matrix(std::size_t rows, std::size_t cols)
      : Matrix(rows, cols, std::vector<E>(rows * cols, E{})) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  E operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }

  std::span<const E> data() const noexcept { return data_; }
  std::span<const E> row(std::size_t i) const noexcept {
    return std::span<const E>(data_).subspan(i * cols_, cols_);
  }

  static constexpr ElementKind kind() noexcept {
    return ElementTraits<E>::kind;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<E> data_;
};

using RealMatrix = Matrix<float>;

inline void require_same_shape(std::size_t r0, std::size_t c0, std::size_t r1,
                               std::size_t c1, const char* what) {
  if (r0 != r1 || c0 != c1) {
    throw Error(Errc::kDimensionMismatch,
                std::string(what) + ": shape " + std::to_string(r0) + "x" +
                    std::to_string(c0) + " vs " + std::to_string(r1) + "x" +
                    std::to_string(c1));
  }
}

}  // namespace intattn
