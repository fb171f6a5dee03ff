#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "intattn/pipeline.hpp"
#include "intattn/report.hpp"

namespace intattn {

inline constexpr std::size_t kDefaultHeadDim = 128;

std::vector<std::size_t> default_lengths();

/// Parameters shared by the breakdown, fidelity and sweep runs.
struct BenchSpec {
  std::vector<PipelineKind> pipelines = {PipelineKind::kInt,
                                         PipelineKind::kQuantOnly,
                                         PipelineKind::kReference};
  std::vector<std::size_t> lengths = default_lengths();
  std::size_t d = kDefaultHeadDim;
  std::vector<std::uint64_t> seeds = {0};
  int threads = 1;
  std::vector<int> b_grid = {kDefaultLutBits};
  std::vector<float> c_grid = {kDefaultClip};
  PFormat p_format = PFormat::kUint8x255;
  MeasureOptions measure;

  // Throws Error(kUsage) naming the offending field.
  void validate() const;
};

/// Rows collected so far plus one message per configuration that failed.
struct BenchOutcome {
  Report report;
  std::vector<std::string> failures;

  bool ok() const noexcept { return failures.empty(); }
};

/// One row per (pipeline, L, seed): median stage nanoseconds, stage shares
/// of the summed stage time, and GFLOP/s = 4 L^2 d / total seconds (the two
/// GEMMs only).
BenchOutcome run_breakdown(const BenchSpec& spec);

/// Per (L, seed): int and quant_only outputs against the exact reference,
/// the FP16-rounded reference against the exact one, and the P-format
/// ablation (uint8 x255 and int8 x127 requantization of the exact P).
/// Uses the first entries of b_grid and c_grid.
BenchOutcome run_fidelity(const BenchSpec& spec);

/// Per (b, c, L): int pipeline fidelity against the reference averaged over
/// seeds.
BenchOutcome run_sweep(const BenchSpec& spec);

}  // namespace intattn
