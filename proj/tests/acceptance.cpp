// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances and thresholds are fixed below.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "intattn/bench.hpp"
#include "intattn/fidelity.hpp"
#include "intattn/index_softmax.hpp"
#include "intattn/int_gemm.hpp"
#include "intattn/pipeline.hpp"
#include "intattn/random.hpp"
#include "oracles.hpp"

using namespace intattn;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename E>
bool bit_identical(const Matrix<E>& a, const Matrix<E>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(E)) == 0;
}

QuantizedMatrix per_tensor(std::vector<std::int8_t> v, std::size_t rows,
                           std::size_t cols, float scale) {
  return {Matrix<std::int8_t>(rows, cols, std::move(v)), {scale},
          QuantGranularity::per_tensor()};
}

// 1. Integer GEMMs against the 64-bit triple loop.
Outcome gemm_oracle() {
  constexpr int kShapes = 200;
  constexpr double kBudgetSeconds = 10.0;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  int mismatches = 0;
  for (int s = 0; s < kShapes; ++s) {
    const std::size_t l = 1 + rng() % 128;
    const std::size_t d = 1 + rng() % 128;
    const int threads = 1 + static_cast<int>(rng() % 8);
    const auto a = oracle::random_ints<std::int8_t>(rng, l * d, -127, 127);
    const auto b = oracle::random_ints<std::int8_t>(rng, l * d, -127, 127);
    const auto v = oracle::random_ints<std::int8_t>(rng, l * d, -127, 127);
    const auto p = oracle::random_ints<std::uint8_t>(rng, l * l, 0, 255);

    const auto qk = gemm_qk(per_tensor(a, l, d, 0.01f), per_tensor(b, l, d, 0.02f), d,
                            threads);
    const auto want_qk = oracle::gemm_nt_i64(a, b, l, l, d);
    const auto pv = gemm_pv(Matrix<std::uint8_t>(l, l, p), per_tensor(v, l, d, 0.03f),
                            threads);
    const auto want_pv = oracle::gemm_nn_i64(p, v, l, l, d);
    for (std::size_t i = 0; i < want_qk.size(); ++i)
      mismatches += std::int64_t{qk.values.data()[i]} != want_qk[i];
    for (std::size_t i = 0; i < want_pv.size(); ++i)
      mismatches += std::int64_t{pv.data()[i]} != want_pv[i];
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kBudgetSeconds,
          std::to_string(kShapes) + " shapes, " + std::to_string(mismatches) +
              " mismatching elements, " + std::to_string(secs) + " s (< 10 s)"};
}

// 2. IndexSoftmax structural invariants.
Outcome softmax_invariants() {
  constexpr int kRows = 1000;
  constexpr double kBudgetSeconds = 30.0;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  const auto lut = build_lut(kDefaultLutBits, kDefaultClip);
  int order = 0, sum = 0, pinned = 0, sparse = 0;
  for (int r = 0; r < kRows; ++r) {
    const std::size_t len = 1 + rng() % 512;
    const double alpha = std::pow(10.0, -5.0 + 3.0 * (rng() % 1000) / 1000.0);
    const double sigma = 0.5 + 3.5 * (rng() % 1000) / 1000.0;
    std::normal_distribution<double> real(0.0, sigma);
    std::vector<std::int32_t> a(len);
    for (auto& x : a) x = static_cast<std::int32_t>(std::lround(real(rng) / alpha));
    if (r % 10 == 0) std::fill(a.begin(), a.begin() + len / 2, a[0]);

    const auto c_int = clip_threshold_from_alpha(kDefaultClip, alpha);
    const LogitMatrix logits{Matrix<std::int32_t>(1, len, a), static_cast<float>(alpha)};
    const auto e = gather_exp(logits, c_int, lut);
    const auto p = index_softmax(logits, c_int, lut).values;

    const std::int32_t m = *std::max_element(a.begin(), a.end());
    std::int64_t total = 0, nonzero = 0;
    for (std::size_t j = 0; j < len; ++j) {
      total += p(0, j);
      nonzero += e(0, j) != 0;
      if (a[j] == m && e(0, j) != 255) ++pinned;
      if (std::int64_t{m} - a[j] >= c_int.c_int && p(0, j) != 0) ++sparse;
    }
    if (std::llabs(total - 255) > (nonzero + 1) / 2) ++sum;

    std::vector<std::size_t> perm(len);
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](auto x, auto y) { return a[x] < a[y]; });
    for (std::size_t j = 1; j < len; ++j) {
      if (p(0, perm[j]) < p(0, perm[j - 1])) {
        ++order;
        break;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {order + sum + pinned + sparse == 0 && secs < kBudgetSeconds,
          std::to_string(kRows) + " rows; violations: ordering " + std::to_string(order) +
              ", row-sum " + std::to_string(sum) + ", max-pinning " +
              std::to_string(pinned) + ", sparsity " + std::to_string(sparse) + "; " +
              std::to_string(secs) + " s (< 30 s)"};
}

// 3. End-to-end fidelity at the default (b, c).
Outcome end_to_end_fidelity() {
  constexpr double kMinCos = 0.99;
  constexpr int kSeeds = 32;
  double mean = 0.0, worst = 1.0;
  for (int s = 0; s < kSeeds; ++s) {
    const auto in = make_inputs(256, 64, s);
    const auto f = compare(int_attention(in.q, in.k, in.v).output,
                           reference_attention(in.q, in.k, in.v));
    mean += f.cos_sim / kSeeds;
    worst = std::min(worst, f.cos_sim);
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "L=256 d=64 (b,c)=(5,6.6) %d seeds: mean cos %.6f (min %.6f), need >= %.2f",
                kSeeds, mean, worst, kMinCos);
  return {mean >= kMinCos, buf};
}

// 4. UINT8 x255 beats INT8 x127 on every metric for every seed.
Outcome p_format_ablation() {
  constexpr int kSeeds = 32;
  int wins = 0;
  double cu = 0, cs = 0;
  for (int s = 0; s < kSeeds; ++s) {
    const auto in = make_inputs(256, 64, s);
    const auto p = reference_probabilities(in.q, in.k);
    const auto u = compare(requantize_probabilities(p, PFormat::kUint8x255), p);
    const auto i8 = compare(requantize_probabilities(p, PFormat::kInt8x127), p);
    wins += u.cos_sim > i8.cos_sim && u.rel_l1 < i8.rel_l1 && u.rmse < i8.rmse;
    cu += u.cos_sim / kSeeds;
    cs += i8.cos_sim / kSeeds;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "L=256: uint8 dominates on all three metrics for %d/%d seeds "
                "(mean cos %.6f vs %.6f)",
                wins, kSeeds, cu, cs);
  return {wins == kSeeds, buf};
}

// 5. (b, c) plateau shape.
Outcome hyperparameter_plateau() {
  const std::vector<int> bs = {2, 3, 4, 5, 6};
  const std::vector<float> cs = {4.4f, 5.5f, 6.6f, 7.7f, 8.8f};
  constexpr int kSeeds = 32;
  std::vector<AttentionInputs> inputs;
  std::vector<RealMatrix> refs;
  for (int s = 0; s < kSeeds; ++s) {
    inputs.push_back(make_inputs(256, 64, 500 + s));
    refs.push_back(reference_attention(inputs.back().q, inputs.back().k, inputs.back().v));
  }
  std::vector<std::vector<double>> grid(bs.size(), std::vector<double>(cs.size(), 0.0));
  for (std::size_t bi = 0; bi < bs.size(); ++bi) {
    for (std::size_t ci = 0; ci < cs.size(); ++ci) {
      AttentionConfig cfg;
      cfg.b = bs[bi];
      cfg.c = cs[ci];
      const IntAttention op(cfg);
      for (int s = 0; s < kSeeds; ++s) {
        grid[bi][ci] += compare(op(inputs[s].q, inputs[s].k, inputs[s].v).output,
                                refs[s]).cos_sim / kSeeds;
      }
    }
  }
  double plateau_min = 1.0, b2_max = -1.0;
  for (std::size_t bi = 0; bi < bs.size(); ++bi) {
    for (std::size_t ci = 0; ci < cs.size(); ++ci) {
      if (bs[bi] >= 4 && cs[ci] >= 5.5f && cs[ci] <= 7.7f)
        plateau_min = std::min(plateau_min, grid[bi][ci]);
      if (bs[bi] == 2) b2_max = std::max(b2_max, grid[bi][ci]);
    }
  }
  bool monotone = true;
  for (std::size_t bi = 1; bi < bs.size(); ++bi) monotone &= grid[bi][2] >= grid[bi - 1][2];
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "plateau min %.6f > b=2 max %.6f; c=6.6 column %.5f %.5f %.5f %.5f %.5f "
                "non-decreasing: %s",
                plateau_min, b2_max, grid[0][2], grid[1][2], grid[2][2], grid[3][2],
                grid[4][2], monotone ? "yes" : "no");
  return {plateau_min > b2_max && monotone, buf};
}

// 6. Latency ordering with 4 threads.
Outcome latency_ordering() {
  constexpr double kBudgetSeconds = 300.0;
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (std::size_t l : {1024u, 2048u}) {
    const auto in = make_inputs(l, kDefaultHeadDim, 7);
    AttentionConfig cfg;
    cfg.threads = 4;
    const MeasureOptions opts{3, 10};
    const auto ti = measure_pipeline(PipelineKind::kInt, in.q, in.k, in.v, cfg, opts).timings;
    const auto tq =
        measure_pipeline(PipelineKind::kQuantOnly, in.q, in.k, in.v, cfg, opts).timings;
    const auto tr =
        measure_pipeline(PipelineKind::kReference, in.q, in.k, in.v, cfg, opts).timings;
    ok &= ti.softmax_path_ns < tq.softmax_path_ns && ti.total_ns < tr.total_ns;
    char buf[220];
    std::snprintf(buf, sizeof buf,
                  "L=%zu softmax int %.2f ms < quant_only %.2f ms; total int %.2f ms < "
                  "reference %.2f ms; ",
                  l, ti.softmax_path_ns / 1e6, tq.softmax_path_ns / 1e6, ti.total_ns / 1e6,
                  tr.total_ns / 1e6);
    detail += buf;
  }
  const double secs = seconds_since(t0);
  detail += std::to_string(secs) + " s (< 300 s)";
  return {ok && secs < kBudgetSeconds, detail};
}

// 7. Determinism across thread counts and reruns.
Outcome determinism() {
  int mismatches = 0;
  for (auto kind : {PipelineKind::kInt, PipelineKind::kQuantOnly, PipelineKind::kReference}) {
    const auto in = make_inputs(256, 64, 3);
    AttentionConfig cfg;
    const auto base = run_pipeline(kind, in.q, in.k, in.v, cfg).output;
    for (int t : {1, 2, 4, 8}) {
      cfg.threads = t;
      mismatches += !bit_identical(run_pipeline(kind, in.q, in.k, in.v, cfg).output, base);
    }
    const auto again = make_inputs(256, 64, 3);
    cfg.threads = 1;
    mismatches += !bit_identical(run_pipeline(kind, again.q, again.k, again.v, cfg).output, base);
  }
  return {mismatches == 0,
          "3 pipelines x threads {1,2,4,8} + rerun: " + std::to_string(mismatches) +
              " non-identical outputs"};
}

// 8. Single-group grouped softmax equals the per-tensor operator.
Outcome grouped_degenerate() {
  constexpr int kInstances = 100;
  std::mt19937_64 rng(8);
  const auto lut = build_lut(kDefaultLutBits, kDefaultClip);
  int mismatches = 0;
  for (int n = 0; n < kInstances; ++n) {
    const std::size_t rows = 1 + rng() % 32;
    const std::size_t cols = 1 + rng() % 256;
    const auto v = oracle::random_ints<std::int32_t>(rng, rows * cols, -200000, 200000);
    const double alpha = std::pow(10.0, -5.0 + 2.0 * (rng() % 1000) / 1000.0);
    const Matrix<std::int32_t> logits(rows, cols, v);
    const ColumnGroups one{std::vector<std::size_t>(cols, 0), {alpha}};
    const auto want = index_softmax({logits, static_cast<float>(alpha)},
                                    clip_threshold_from_alpha(kDefaultClip, alpha), lut)
                          .values;
    mismatches += !(index_softmax_grouped(logits, one, kDefaultClip, lut).values == want);
    mismatches += !(index_softmax_grouped(logits, one, kDefaultClip, lut,
                                          GroupedRowMax::kCommonScale)
                        .values == want);
  }
  return {mismatches == 0, std::to_string(kInstances) + " instances x 2 row-max modes: " +
                               std::to_string(mismatches) + " mismatches"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"1 integer GEMM oracle equivalence", gemm_oracle},
      {"2 IndexSoftmax structural invariants", softmax_invariants},
      {"3 end-to-end fidelity >= 0.99", end_to_end_fidelity},
      {"4 P-format ablation ordering", p_format_ablation},
      {"5 hyperparameter plateau shape", hyperparameter_plateau},
      {"6 latency ordering", latency_ordering},
      {"7 determinism", determinism},
      {"8 grouped degenerate case", grouped_degenerate},
  };
  std::printf("host: %d hardware threads visible to OpenMP\n", omp_get_num_procs());
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto out = run();
    failed += !out.pass;
    std::printf("[%s] %s: %s\n", out.pass ? "PASS" : "FAIL", name, out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
