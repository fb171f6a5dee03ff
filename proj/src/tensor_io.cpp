#include "intattn/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace intattn {
namespace {

constexpr std::array<char, 4> kMagic = {'I', 'T', 'N', 'S'};

static_assert(std::endian::native == std::endian::little,
              "tensor payloads are written in native order; big-endian hosts "
              "need a byte-swapping path");

std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void write_u64_le(unsigned char* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    p[i] = static_cast<unsigned char>(v & 0xff);
    v >>= 8;
  }
}

std::size_t element_width(ElementKind kind) {
  switch (kind) {
    case ElementKind::kReal32:
    case ElementKind::kInt32:
      return 4;
    case ElementKind::kInt8:
    case ElementKind::kUint8:
      return 1;
  }
  return 0;
}

TensorHeader parse_header(std::ifstream& in, const std::string& name) {
  std::array<unsigned char, kTensorHeaderBytes> raw{};
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw Error(Errc::kMalformedHeader, name + ": header shorter than 24 bytes");
  }
  if (std::memcmp(raw.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error(Errc::kMalformedHeader, name + ": bad magic");
  }
  if (raw[4] > static_cast<unsigned char>(ElementKind::kInt32)) {
    throw Error(Errc::kMalformedHeader,
                name + ": unknown element kind " + std::to_string(raw[4]));
  }
  if (raw[5] != 0 || raw[6] != 0 || raw[7] != 0) {
    throw Error(Errc::kMalformedHeader, name + ": reserved bytes not zero");
  }
  TensorHeader h{static_cast<ElementKind>(raw[4]), read_u64_le(&raw[8]),
                 read_u64_le(&raw[16])};
  if (h.rows == 0 || h.cols == 0) {
    throw Error(Errc::kShape, name + ": zero dimension in header");
  }
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  if (h.rows > kMax / h.cols ||
      h.rows * h.cols > kMax / element_width(h.kind)) {
    throw Error(Errc::kShape, name + ": element count overflows");
  }
  return h;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  return in;
}

template <MatrixElement E>
Matrix<E> read_payload(std::ifstream& in, const TensorHeader& h,
                       const std::string& name) {
  const std::size_t count = h.rows * h.cols;
  std::vector<E> data(count);
  const auto bytes = static_cast<std::streamsize>(count * sizeof(E));
  in.read(reinterpret_cast<char*>(data.data()), bytes);
  if (in.gcount() != bytes) {
    throw Error(Errc::kTruncatedPayload,
                name + ": payload has " + std::to_string(in.gcount()) +
                    " bytes, header requires " + std::to_string(bytes));
  }
  return Matrix<E>(h.rows, h.cols, std::move(data));
}

}  // namespace

TensorHeader read_tensor_header(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return parse_header(in, path.string());
}

template <MatrixElement E>
Matrix<E> load_tensor(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  const auto h = parse_header(in, path.string());
  if (h.kind != ElementTraits<E>::kind) {
    throw Error(Errc::kElementKindMismatch,
                path.string() + ": file holds element kind " +
                    std::to_string(static_cast<int>(h.kind)) +
                    ", requested " +
                    std::to_string(static_cast<int>(ElementTraits<E>::kind)));
  }
  return read_payload<E>(in, h, path.string());
}

AnyMatrix load_any_tensor(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  const auto h = parse_header(in, path.string());
  switch (h.kind) {
    case ElementKind::kReal32:
      return read_payload<float>(in, h, path.string());
    case ElementKind::kInt8:
      return read_payload<std::int8_t>(in, h, path.string());
    case ElementKind::kUint8:
      return read_payload<std::uint8_t>(in, h, path.string());
    case ElementKind::kInt32:
      return read_payload<std::int32_t>(in, h, path.string());
  }
  throw Error(Errc::kMalformedHeader, path.string() + ": unknown kind");
}

template <MatrixElement E>
void save_tensor(const Matrix<E>& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot open " + path.string() + " for writing");

  std::array<unsigned char, kTensorHeaderBytes> raw{};
  std::memcpy(raw.data(), kMagic.data(), kMagic.size());
  raw[4] = static_cast<unsigned char>(ElementTraits<E>::kind);
  write_u64_le(&raw[8], m.rows());
  write_u64_le(&raw[16], m.cols());
  out.write(reinterpret_cast<const char*>(raw.data()), raw.size());
  out.write(reinterpret_cast<const char*>(m.data().data()),
            static_cast<std::streamsize>(m.size() * sizeof(E)));
  out.flush();
  if (!out) throw Error(Errc::kIo, "write failed for " + path.string());
}

template Matrix<float> load_tensor<float>(const std::filesystem::path&);
template Matrix<std::int8_t> load_tensor<std::int8_t>(const std::filesystem::path&);
template Matrix<std::uint8_t> load_tensor<std::uint8_t>(const std::filesystem::path&);
template Matrix<std::int32_t> load_tensor<std::int32_t>(const std::filesystem::path&);

template void save_tensor<float>(const Matrix<float>&, const std::filesystem::path&);
template void save_tensor<std::int8_t>(const Matrix<std::int8_t>&, const std::filesystem::path&);
template void save_tensor<std::uint8_t>(const Matrix<std::uint8_t>&, const std::filesystem::path&);
template void save_tensor<std::int32_t>(const Matrix<std::int32_t>&, const std::filesystem::path&);

}  // namespace intattn
