#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>

#include "intattn/matrix.hpp"

namespace intattn {

// Binary tensor file layout (all integers little-endian):
//   [0, 4)   magic "ITNS"
//   [4]      element kind (see ElementKind)
//   [5, 8)   reserved, zero
//   [8, 16)  rows, u64
//   [16, 24) cols, u64
//   [24, ..) rows*cols elements, row-major, native width
inline constexpr std::size_t kTensorHeaderBytes = 24;

struct TensorHeader {
  ElementKind kind;
  std::uint64_t rows;
  std::uint64_t cols;
};

using AnyMatrix = std::variant<Matrix<float>, Matrix<std::int8_t>,
                               Matrix<std::uint8_t>, Matrix<std::int32_t>>;

TensorHeader read_tensor_header(const std::filesystem::path& path);

// Throws Error with kMalformedHeader, kShape, kElementKindMismatch,
// kTruncatedPayload or kIo.
template <MatrixElement E>
Matrix<E> load_tensor(const std::filesystem::path& path);

AnyMatrix load_any_tensor(const std::filesystem::path& path);

template <MatrixElement E>
void save_tensor(const Matrix<E>& m, const std::filesystem::path& path);

}  // namespace intattn
