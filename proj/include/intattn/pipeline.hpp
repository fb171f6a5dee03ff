#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "intattn/index_softmax.hpp"
#include "intattn/matrix.hpp"
#include "intattn/quantizer.hpp"

namespace intattn {

/// Storage format of the quantized probability matrix.
enum class PFormat {
  kUint8x255,
  kInt8x127,
};

std::string_view to_string(PFormat f) noexcept;
PFormat parse_p_format(std::string_view s);

enum class Stage { kQuantize, kQkGemm, kSoftmaxPath, kPvGemm, kDequantize };
enum class Domain { kInteger, kReal };

std::string_view to_string(Stage s) noexcept;

/// Test hook: pipelines append one event per operation they execute,
/// tagged with the arithmetic domain of that operation.
class DataflowTrace {
 public:
  struct Event {
    Stage stage;
    Domain domain;
    std::string op;
  };

  void record(Stage stage, Domain domain, std::string op) {
    events_.push_back({stage, domain, std::move(op)});
  }
  const std::vector<Event>& events() const noexcept { return events_; }
  void clear() noexcept { events_.clear(); }

  // True when every event after the last kQkGemm event and before the first
  // kPvGemm event is integer-domain, and both bracketing events exist.
  bool integer_only_between_gemms() const;

 private:
  std::vector<Event> events_;
};

/// Granularity applies to the operand where grouping keeps the integer
/// GEMMs exact: row groups to K (key blocks, handled by the grouped
/// IndexSoftmax) and column groups to V (output channel groups). Q is always
/// per-tensor.
struct AttentionConfig {
  int b = kDefaultLutBits;
  float c = kDefaultClip;
  PFormat p_format = PFormat::kUint8x255;
  QuantGranularity granularity;
  GroupedRowMax grouped_row_max = GroupedRowMax::kPerGroup;
  int threads = 1;
  const AttendMask* mask = nullptr;
  DataflowTrace* trace = nullptr;
};

struct StageTimings {
  std::int64_t quantize_ns = 0;
  std::int64_t qk_gemm_ns = 0;
  std::int64_t softmax_path_ns = 0;
  std::int64_t pv_gemm_ns = 0;
  std::int64_t dequantize_ns = 0;
  std::int64_t total_ns = 0;

  std::int64_t stage_sum() const noexcept {
    return quantize_ns + qk_gemm_ns + softmax_path_ns + pv_gemm_ns +
           dequantize_ns;
  }
};

struct AttentionResult {
  RealMatrix output;
  StageTimings timings;
};

/// Fully integer attention: INT8 QK^T, IndexSoftmax, integer PV, one final
/// rescale by s_V / 255 (or s_V / 127 in the ablation format).
///
/// The LUT is built once at construction and shared by every call.
class IntAttention {
 public:
  explicit IntAttention(AttentionConfig cfg);

  AttentionResult operator()(const RealMatrix& q, const RealMatrix& k,
                             const RealMatrix& v) const;

  const ExpLut& lut() const noexcept { return lut_; }
  const AttentionConfig& config() const noexcept { return cfg_; }

 private:
  AttentionConfig cfg_;
  ExpLut lut_;
};

AttentionResult int_attention(const RealMatrix& q, const RealMatrix& k,
                              const RealMatrix& v,
                              const AttentionConfig& cfg = {});

/// Integer GEMMs around a dequantize -> float softmax -> requantize detour.
AttentionResult quant_only_attention(const RealMatrix& q, const RealMatrix& k,
                                     const RealMatrix& v,
                                     const AttentionConfig& cfg = {});

/// Exact scaled dot-product attention, double accumulation throughout.
AttentionResult reference_attention_timed(const RealMatrix& q,
                                          const RealMatrix& k,
                                          const RealMatrix& v,
                                          const AttendMask* mask = nullptr,
                                          int threads = 1);
RealMatrix reference_attention(const RealMatrix& q, const RealMatrix& k,
                               const RealMatrix& v,
                               const AttendMask* mask = nullptr,
                               int threads = 1);

/// Exact softmax(Q K^T / sqrt(d)) with masking.
RealMatrix reference_probabilities(const RealMatrix& q, const RealMatrix& k,
                                   const AttendMask* mask = nullptr,
                                   int threads = 1);

/// Quantizes probabilities in [0, 1] to the given format and maps them back
/// to real values (p_hat / 255 or p_hat / 127).
RealMatrix requantize_probabilities(const RealMatrix& p, PFormat format);

/// Rounds every element to the nearest IEEE half-precision value.
RealMatrix round_to_half(const RealMatrix& x);

enum class PipelineKind { kInt, kQuantOnly, kReference, kReferenceFp16 };

std::string_view to_string(PipelineKind k) noexcept;
PipelineKind parse_pipeline(std::string_view s);

/// kReferenceFp16 is the exact reference run on inputs pre-rounded to half
/// precision; it only labels an FP16-like baseline.
AttentionResult run_pipeline(PipelineKind kind, const RealMatrix& q,
                             const RealMatrix& k, const RealMatrix& v,
                             const AttentionConfig& cfg = {});

struct MeasureOptions {
  int warmup = 3;
  int iters = 10;
};

/// Runs warmup + iters calls and reports the per-field median timings
/// together with the output of the last call.
AttentionResult measure_pipeline(PipelineKind kind, const RealMatrix& q,
                                 const RealMatrix& k, const RealMatrix& v,
                                 const AttentionConfig& cfg,
                                 MeasureOptions opts = {});

StageTimings median_timings(const std::vector<StageTimings>& runs);

}  // namespace intattn
