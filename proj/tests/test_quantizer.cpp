#include <cmath>
#include <limits>
#include <random>

#include "intattn/quantizer.hpp"
#include "intattn/random.hpp"
#include "test_support.hpp"

using namespace intattn;
using intattn::test::error_code_of;

namespace {

RealMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::uniform_real_distribution<float> mag(-3.0f, 3.0f);
  std::uniform_real_distribution<float> spread(0.01f, 50.0f);
  const float s = spread(rng);
  std::vector<float> v(rows * cols);
  for (auto& x : v) x = s * mag(rng);
  return RealMatrix(rows, cols, std::move(v));
}

QuantGranularity random_granularity(std::mt19937_64& rng, std::size_t rows,
                                    std::size_t cols) {
  const auto divisor = [&](std::size_t n) {
    std::vector<std::size_t> ds;
    for (std::size_t g = 1; g <= n; ++g)
      if (n % g == 0) ds.push_back(g);
    return ds[rng() % ds.size()];
  };
  switch (rng() % 3) {
    case 0:
      return QuantGranularity::per_tensor();
    case 1:
      return QuantGranularity::per_row_group(divisor(rows));
    default:
      return QuantGranularity::per_col_group(divisor(cols));
  }
}

}  // namespace

TEST_CASE("per-tensor quantization of a worked example") {
  const RealMatrix x(2, 2, {1.0f, -2.0f, 0.5f, 2.54f});
  const auto q = quantize_symmetric(x);
  REQUIRE(q.scales.size() == 1);
  CHECK(q.scales[0] == doctest::Approx(0.02).epsilon(1e-6));
  CHECK(q.values == Matrix<std::int8_t>(2, 2, {50, -100, 25, 127}));
  CHECK(dequantize(q)(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("all-zero input uses the epsilon floor") {
  const auto q = quantize_symmetric(RealMatrix(3, 4));
  CHECK(q.scales[0] == static_cast<float>(kScaleEpsilon / 127));
  CHECK(q.scales[0] > 0.0f);
  for (auto v : q.values.data()) CHECK(v == 0);
  const auto back = dequantize(q);
  for (auto v : back.data()) CHECK(v == 0.0f);
}

TEST_CASE("range endpoints map to +-127") {
  for (float s : {0.001f, 0.37f, 2.0f, 1e6f}) {
    const RealMatrix x(1, 2, {127 * s, -127 * s});
    CHECK(quantize_symmetric(x).values == Matrix<std::int8_t>(1, 2, {127, -127}));
  }
}

TEST_CASE("dequantize of a single value") {
  const QuantizedMatrix q{Matrix<std::int8_t>(1, 1, {50}), {0.02f},
                          QuantGranularity::per_tensor()};
  CHECK(dequantize(q)(0, 0) == doctest::Approx(1.0f));
}

TEST_CASE("quantizer rejects non-finite input and bad groups") {
  CHECK(error_code_of([] {
          quantize_symmetric(RealMatrix(1, 2, {1.0f, std::nanf("")}));
        }) == Errc::kDomain);
  CHECK(error_code_of([] {
          quantize_symmetric(
              RealMatrix(1, 1, {std::numeric_limits<float>::infinity()}));
        }) == Errc::kDomain);
  CHECK(error_code_of([] {
          quantize_symmetric(RealMatrix(6, 4), QuantGranularity::per_row_group(4));
        }) == Errc::kShape);
  CHECK(error_code_of([] {
          quantize_symmetric(RealMatrix(6, 4), QuantGranularity::per_col_group(0));
        }) == Errc::kShape);
}

TEST_CASE("grouped scales follow the per-group max") {
  // Row groups of 2: {rows 0,1} max 4, {rows 2,3} max 127 (scale exactly 1).
  const RealMatrix x(4, 2, {1, -4, 2, 3, 127, 63.5f, -63.5f, 0});
  const auto q = quantize_symmetric(x, QuantGranularity::per_row_group(2));
  REQUIRE(q.scales.size() == 2);
  CHECK(q.scales[0] == doctest::Approx(4.0 / 127));
  CHECK(q.scales[1] == 1.0f);
  CHECK(q.values(0, 1) == -127);
  CHECK(q.values(2, 0) == 127);
  // Ties round away from zero.
  CHECK(q.values(2, 1) == 64);
  CHECK(q.values(3, 0) == -64);

  const auto qc = quantize_symmetric(x, QuantGranularity::per_col_group(1));
  REQUIRE(qc.scales.size() == 2);
  CHECK(qc.scales[0] == 1.0f);
  CHECK(qc.scales[1] == doctest::Approx(63.5 / 127));
  CHECK(error_code_of([&] { (void)qc.tensor_scale(); }) == Errc::kDomain);
}

TEST_CASE("property: quantization error, sign, idempotence, range") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 1 + rng() % 24;
    const std::size_t cols = 1 + rng() % 24;
    const auto x = random_matrix(rng, rows, cols);
    const auto gran = random_granularity(rng, rows, cols);
    const auto q = quantize_symmetric(x, gran, 1 + static_cast<int>(rng() % 4));
    const auto back = dequantize(q);

    // Brute-force scales.
    std::vector<double> absmax(q.scales.size(), 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        absmax[gran.group_of(i, j)] =
            std::max(absmax[gran.group_of(i, j)], std::fabs(double{x(i, j)}));
    for (std::size_t g = 0; g < absmax.size(); ++g) {
      CHECK(q.scales[g] == static_cast<float>(std::max(kScaleEpsilon, absmax[g]) / 127));
    }

    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        const double scale = q.scale_at(i, j);
        const int v = q.values(i, j);
        CHECK(v >= -127);
        CHECK(v <= 127);
        CHECK(std::fabs(double{back(i, j)} - x(i, j)) <= scale / 2 * (1 + 1e-5));
        if (std::fabs(x(i, j)) >= scale / 2 * (1 + 1e-5)) {
          CHECK((v > 0) == (x(i, j) > 0));
        }
      }
    }

    const auto again = quantize_symmetric(back, gran);
    CHECK(again.values == q.values);
  }
}

TEST_CASE("a single row group equals per-tensor quantization") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 1 + rng() % 16;
    const auto x = random_matrix(rng, rows, 1 + rng() % 16);
    const auto a = quantize_symmetric(x);
    const auto b = quantize_symmetric(x, QuantGranularity::per_row_group(rows));
    CHECK(a.values == b.values);
    CHECK(a.scales == b.scales);
  }
}

TEST_CASE("quantizer output is independent of thread count") {
  const auto x = GaussianSource(9).matrix(67, 33);
  const auto base = quantize_symmetric(x, QuantGranularity::per_col_group(11), 1);
  for (int t : {2, 3, 8}) {
    CHECK(quantize_symmetric(x, QuantGranularity::per_col_group(11), t).values ==
          base.values);
  }
}
