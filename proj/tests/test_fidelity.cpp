#include <cmath>
#include <random>

#include "intattn/fidelity.hpp"
#include "intattn/random.hpp"
#include "test_support.hpp"

using namespace intattn;
using intattn::test::error_code_of;

namespace {

RealMatrix scaled(const RealMatrix& m, float s) {
  std::vector<float> v(m.data().begin(), m.data().end());
  for (auto& x : v) x *= s;
  return RealMatrix(m.rows(), m.cols(), std::move(v));
}

}  // namespace

TEST_CASE("compare on exact multiples") {
  const auto b = GaussianSource(1).matrix(6, 9);
  const auto same = compare(b, b);
  CHECK(same.cos_sim == doctest::Approx(1.0));
  CHECK(same.rel_l1 == 0.0);
  CHECK(same.rmse == 0.0);

  const auto twice = compare(scaled(b, 2.0f), b);
  CHECK(twice.cos_sim == doctest::Approx(1.0));
  CHECK(twice.rel_l1 == doctest::Approx(1.0));

  CHECK(compare(scaled(b, -1.0f), b).cos_sim == doctest::Approx(-1.0));
}

TEST_CASE("hand-computed metrics") {
  const RealMatrix a(2, 2, {1, 0, 0, 0});
  const RealMatrix b(2, 2, {1, 1, 0, 0});
  const auto f = compare(a, b);
  // Row 0 cosine 1/sqrt(2); row 1 both zero counts as 1.
  CHECK(f.cos_sim == doctest::Approx((1.0 / std::sqrt(2.0) + 1.0) / 2));
  CHECK(f.rel_l1 == doctest::Approx(0.5));
  CHECK(f.rmse == doctest::Approx(0.5));

  // One zero row against a nonzero row contributes 0.
  const RealMatrix z(1, 2, {0, 0});
  CHECK(compare(z, RealMatrix(1, 2, {1, 2})).cos_sim == 0.0);
}

TEST_CASE("compare errors") {
  CHECK(error_code_of([] { compare(RealMatrix(2, 2), RealMatrix(2, 3)); }) ==
        Errc::kDimensionMismatch);
  CHECK(error_code_of([] { compare(RealMatrix(2, 2, {1, 1, 1, 1}), RealMatrix(2, 2)); }) ==
        Errc::kDomain);
}

TEST_CASE("property: rmse symmetry, bounds and per-row scale invariance") {
  std::mt19937_64 rng(77);
  GaussianSource src(77);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng() % 12;
    const std::size_t cols = 1 + rng() % 12;
    const auto a = src.matrix(rows, cols);
    const auto b = src.matrix(rows, cols);
    const auto ab = compare(a, b);
    const auto ba = compare(b, a);
    CHECK(ab.rmse == ba.rmse);
    CHECK(ab.cos_sim >= -1.0);
    CHECK(ab.cos_sim <= 1.0);
    CHECK(ab.rel_l1 >= 0.0);

    std::vector<float> rs(a.data().begin(), a.data().end());
    std::uniform_real_distribution<float> pos(0.1f, 10.0f);
    for (std::size_t i = 0; i < rows; ++i) {
      const float s = pos(rng);
      for (std::size_t j = 0; j < cols; ++j) rs[i * cols + j] *= s;
    }
    CHECK(compare(RealMatrix(rows, cols, rs), b).cos_sim ==
          doctest::Approx(ab.cos_sim).epsilon(1e-6));
  }
}
