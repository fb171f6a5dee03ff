#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "intattn/matrix.hpp"

namespace intattn {

/// Standard normal samples from mt19937_64 via Box-Muller. Both pieces are
/// fully specified, so a seed yields the same values on every platform
/// (std::normal_distribution is implementation-defined).
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double next();
  RealMatrix matrix(std::size_t rows, std::size_t cols);

 private:
  double uniform_open();  // (0, 1]

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct AttentionInputs {
  RealMatrix q;
  RealMatrix k;
  RealMatrix v;
};

/// Q, K and V (each length x d) drawn in that order from one seeded source.
AttentionInputs make_inputs(std::size_t length, std::size_t d,
                            std::uint64_t seed);

}  // namespace intattn
