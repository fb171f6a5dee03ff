#include "intattn/random.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace intattn {

double GaussianSource::uniform_open() {
  // 53 random mantissa bits, shifted from [0, 1) to (0, 1].
  return static_cast<double>((engine_() >> 11) + 1) * 0x1p-53;
}

double GaussianSource::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double radius = std::sqrt(-2.0 * std::log(uniform_open()));
  const double theta = 2.0 * std::numbers::pi * uniform_open();
  spare_ = radius * std::sin(theta);
  has_spare_ = true;
  return radius * std::cos(theta);
}

RealMatrix GaussianSource::matrix(std::size_t rows, std::size_t cols) {
  std::vector<float> data(rows * cols);
  for (auto& x : data) x = static_cast<float>(next());
  return RealMatrix(rows, cols, std::move(data));
}

AttentionInputs make_inputs(std::size_t length, std::size_t d,
                            std::uint64_t seed) {
  GaussianSource src(seed);
  auto q = src.matrix(length, d);
  auto k = src.matrix(length, d);
  auto v = src.matrix(length, d);
  return {std::move(q), std::move(k), std::move(v)};
}

}  // namespace intattn
