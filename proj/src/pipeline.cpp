#include "intattn/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "intattn/int_gemm.hpp"
#include "intattn/rounding.hpp"

namespace intattn {
namespace {

using Clock = std::chrono::steady_clock;

class StageClock {
 public:
  StageClock() : start_(Clock::now()), last_(start_) {}

  // Nanoseconds since the previous lap.
  std::int64_t lap() {
    const auto now = Clock::now();
    const auto ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(now - last_).count();
    last_ = now;
    return ns;
  }
  std::int64_t total() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() -
                                                                start_)
        .count();
  }

 private:
  Clock::time_point start_;
  Clock::time_point last_;
};

void note(DataflowTrace* trace, Stage s, Domain d, const char* op) {
  if (trace != nullptr) trace->record(s, d, op);
}

struct Shapes {
  std::size_t queries;
  std::size_t keys;
  std::size_t d;
};

Shapes check_shapes(const RealMatrix& q, const RealMatrix& k,
                    const RealMatrix& v, const AttendMask* mask) {
  if (q.cols() != k.cols()) {
    throw Error(Errc::kDimensionMismatch,
                "q and k head dimensions differ: " + std::to_string(q.cols()) +
                    " vs " + std::to_string(k.cols()));
  }
  if (k.rows() != v.rows()) {
    throw Error(Errc::kDimensionMismatch,
                "k and v sequence lengths differ: " + std::to_string(k.rows()) +
                    " vs " + std::to_string(v.rows()));
  }
  if (mask != nullptr) {
    require_same_shape(mask->rows(), mask->cols(), q.rows(), k.rows(),
                       "attention mask");
  }
  return {q.rows(), k.rows(), q.cols()};
}

void check_length(std::size_t keys) {
  if (keys > kMaxPvLength) {
    throw Error(Errc::kAccumulatorBound,
                "sequence length " + std::to_string(keys) +
                    " exceeds the PV accumulator bound " +
                    std::to_string(kMaxPvLength));
  }
}

bool grouped_keys(const AttentionConfig& cfg) {
  return cfg.granularity.kind == QuantGranularity::Kind::kPerRowGroup;
}

struct QuantizedInputs {
  QuantizedMatrix q;
  QuantizedMatrix k;
  QuantizedMatrix v;
};

QuantizedInputs quantize_inputs(const RealMatrix& q, const RealMatrix& k,
                                const RealMatrix& v,
                                const AttentionConfig& cfg) {
  const auto key_gran =
      grouped_keys(cfg) ? cfg.granularity : QuantGranularity::per_tensor();
  const auto value_gran =
      cfg.granularity.kind == QuantGranularity::Kind::kPerColGroup
          ? cfg.granularity
          : QuantGranularity::per_tensor();
  note(cfg.trace, Stage::kQuantize, Domain::kReal, "quantize_symmetric");
  return {quantize_symmetric(q, QuantGranularity::per_tensor(), cfg.threads),
          quantize_symmetric(k, key_gran, cfg.threads),
          quantize_symmetric(v, value_gran, cfg.threads)};
}

// Logit scale of every key column: s_Q * s_K^(g) / sqrt(d).
ColumnGroups key_groups(const QuantizedMatrix& qhat,
                        const QuantizedMatrix& khat, std::size_t d) {
  ColumnGroups groups;
  const double root = std::sqrt(static_cast<double>(d));
  for (float sk : khat.scales) {
    groups.alphas.push_back(static_cast<double>(qhat.tensor_scale()) * sk / root);
  }
  groups.group_of_column.resize(khat.rows());
  for (std::size_t j = 0; j < khat.rows(); ++j) {
    groups.group_of_column[j] = khat.granularity.group_of(j, 0);
  }
  return groups;
}

RealMatrix rescale_output(const Matrix<std::int32_t>& acc,
                          const QuantizedMatrix& vhat, int denom, int threads) {
  const std::size_t rows = acc.rows();
  const std::size_t cols = acc.cols();
  std::vector<float> col_scale(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    col_scale[j] = static_cast<float>(static_cast<double>(vhat.scale_at(0, j)) / denom);
  }
  const auto src = acc.data();
  std::vector<float> out(rows * cols);
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t at = static_cast<std::size_t>(i) * cols + j;
      out[at] = static_cast<float>(src[at]) * col_scale[j];
    }
  }
  return RealMatrix(rows, cols, std::move(out));
}

template <typename Out>
Matrix<Out> requantize_rows(const std::vector<float>& p, std::size_t rows,
                            std::size_t cols, int scale) {
  std::vector<Out> out(rows * cols);
  for (std::size_t at = 0; at < out.size(); ++at) {
    out[at] = static_cast<Out>(std::clamp<std::int64_t>(
        round_half_away(static_cast<double>(p[at]) * scale), 0, scale));
  }
  return Matrix<Out>(rows, cols, std::move(out));
}

// Logits to FP32, masked safe softmax in FP32, probabilities requantized.
// This is the detour the integer pipeline removes.
template <typename Out>
Matrix<Out> float_softmax_requantize(const Matrix<std::int32_t>& logits,
                                     const std::vector<float>& col_alpha,
                                     const AttendMask* mask, int scale,
                                     int threads) {
  const std::size_t rows = logits.rows();
  const std::size_t cols = logits.cols();
  std::vector<Out> out(rows * cols);
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel num_threads(threads)
  {
    std::vector<float> row(cols);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(i);
      const auto a = logits.row(r);
      const auto keep = [&](std::size_t j) {
        return mask == nullptr || (*mask)(r, j) != 0;
      };
      float m = -std::numeric_limits<float>::infinity();
      for (std::size_t j = 0; j < cols; ++j) {
        row[j] = col_alpha[j] * static_cast<float>(a[j]);
        if (keep(j)) m = std::max(m, row[j]);
      }
      float sum = 0.0f;
      for (std::size_t j = 0; j < cols; ++j) {
        row[j] = keep(j) ? std::exp(row[j] - m) : 0.0f;
        sum += row[j];
      }
      Out* dst = out.data() + r * cols;
      if (!(sum > 0.0f)) {
        std::fill(dst, dst + cols, Out{0});
        continue;
      }
      const float inv = static_cast<float>(scale) / sum;
      for (std::size_t j = 0; j < cols; ++j) {
        dst[j] = static_cast<Out>(std::clamp<std::int64_t>(
            round_half_away(static_cast<double>(row[j] * inv)), 0, scale));
      }
    }
  }
  return Matrix<Out>(rows, cols, std::move(out));
}

// Exact row softmax of (q k^T) / sqrt(d), written into p (double).
void exact_softmax(const RealMatrix& logits, std::size_t d,
                   const AttendMask* mask, std::vector<double>& p,
                   int threads) {
  const std::size_t rows = logits.rows();
  const std::size_t cols = logits.cols();
  const double inv_root = 1.0 / std::sqrt(static_cast<double>(d));
  p.assign(rows * cols, 0.0);
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    const auto a = logits.row(r);
    double* dst = p.data() + r * cols;
    const auto keep = [&](std::size_t j) {
      return mask == nullptr || (*mask)(r, j) != 0;
    };
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) {
      if (keep(j)) m = std::max(m, a[j] * inv_root);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      dst[j] = keep(j) ? std::exp(a[j] * inv_root - m) : 0.0;
      sum += dst[j];
    }
    if (sum > 0.0) {
      for (std::size_t j = 0; j < cols; ++j) dst[j] /= sum;
    }
  }
}

template <typename P>
AttentionResult finish_integer(const Matrix<P>& phat, const QuantizedInputs& in,
                               int denom, const AttentionConfig& cfg,
                               StageClock& clock, StageTimings& t) {
  note(cfg.trace, Stage::kPvGemm, Domain::kInteger, "gemm_pv");
  const auto acc = gemm_pv(phat, in.v, cfg.threads);
  t.pv_gemm_ns = clock.lap();

  note(cfg.trace, Stage::kDequantize, Domain::kReal, "rescale_output");
  auto out = rescale_output(acc, in.v, denom, cfg.threads);
  t.dequantize_ns = clock.lap();
  t.total_ns = clock.total();
  return {std::move(out), t};
}

}  // namespace

std::string_view to_string(PFormat f) noexcept {
  return f == PFormat::kUint8x255 ? "uint8" : "int8";
}

PFormat parse_p_format(std::string_view s) {
  if (s == "uint8" || s == "Uint8x255") return PFormat::kUint8x255;
  if (s == "int8" || s == "Int8x127") return PFormat::kInt8x127;
  throw Error(Errc::kUsage, "unknown P format '" + std::string(s) + "'");
}

std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::kQuantize:
      return "quantize";
    case Stage::kQkGemm:
      return "qk_gemm";
    case Stage::kSoftmaxPath:
      return "softmax_path";
    case Stage::kPvGemm:
      return "pv_gemm";
    case Stage::kDequantize:
      return "dequantize";
  }
  return "?";
}

bool DataflowTrace::integer_only_between_gemms() const {
  std::size_t qk = events_.size();
  std::size_t pv = events_.size();
  for (std::size_t i = 0; i < events_.size(); ++i) {
    if (events_[i].stage == Stage::kQkGemm) qk = i;
    if (events_[i].stage == Stage::kPvGemm && pv == events_.size()) pv = i;
  }
  if (qk == events_.size() || pv == events_.size() || pv < qk) return false;
  for (std::size_t i = qk; i <= pv; ++i) {
    if (events_[i].domain != Domain::kInteger) return false;
  }
  return true;
}

IntAttention::IntAttention(AttentionConfig cfg)
    : cfg_(cfg), lut_(build_lut(cfg.b, cfg.c)) {
  if (grouped_keys(cfg_) && cfg_.p_format != PFormat::kUint8x255) {
    throw Error(Errc::kParameterRange,
                "grouped key quantization supports the uint8 P format only");
  }
}

AttentionResult IntAttention::operator()(const RealMatrix& q,
                                         const RealMatrix& k,
                                         const RealMatrix& v) const {
  const auto shapes = check_shapes(q, k, v, cfg_.mask);
  check_length(shapes.keys);
  StageTimings t;
  StageClock clock;

  const auto in = quantize_inputs(q, k, v, cfg_);
  t.quantize_ns = clock.lap();

  if (grouped_keys(cfg_)) {
    note(cfg_.trace, Stage::kQkGemm, Domain::kInteger, "gemm_s8s8_nt");
    const auto logits = gemm_s8s8_nt(in.q.values, in.k.values, cfg_.threads);
    const auto groups = key_groups(in.q, in.k, shapes.d);
    t.qk_gemm_ns = clock.lap();

    note(cfg_.trace, Stage::kSoftmaxPath, Domain::kInteger,
         "index_softmax_grouped");
    const auto p = index_softmax_grouped(logits, groups, cfg_.c, lut_,
                                         cfg_.grouped_row_max, cfg_.mask,
                                         cfg_.threads);
    t.softmax_path_ns = clock.lap();
    return finish_integer(p.values, in, ProbMatrix::kDenomScale, cfg_, clock, t);
  }

  note(cfg_.trace, Stage::kQkGemm, Domain::kInteger, "gemm_qk");
  const auto logits = gemm_qk(in.q, in.k, shapes.d, cfg_.threads);
  t.qk_gemm_ns = clock.lap();

  // c_int depends only on scalars; the per-element path below is integer.
  const auto c_int =
      compute_c_int(cfg_.c, shapes.d, in.q.tensor_scale(), in.k.tensor_scale());
  if (cfg_.p_format == PFormat::kUint8x255) {
    note(cfg_.trace, Stage::kSoftmaxPath, Domain::kInteger, "index_softmax");
    const auto p = index_softmax(logits, c_int, lut_, cfg_.mask, cfg_.threads);
    t.softmax_path_ns = clock.lap();
    return finish_integer(p.values, in, ProbMatrix::kDenomScale, cfg_, clock, t);
  }
  note(cfg_.trace, Stage::kSoftmaxPath, Domain::kInteger, "index_softmax_int8");
  const auto p = index_softmax_int8(logits, c_int, lut_, cfg_.mask, cfg_.threads);
  t.softmax_path_ns = clock.lap();
  return finish_integer(p.values, in, ProbMatrixInt8::kDenomScale, cfg_, clock, t);
}

AttentionResult int_attention(const RealMatrix& q, const RealMatrix& k,
                              const RealMatrix& v,
                              const AttentionConfig& cfg) {
  return IntAttention(cfg)(q, k, v);
}

AttentionResult quant_only_attention(const RealMatrix& q, const RealMatrix& k,
                                     const RealMatrix& v,
                                     const AttentionConfig& cfg) {
  const auto shapes = check_shapes(q, k, v, cfg.mask);
  check_length(shapes.keys);
  StageTimings t;
  StageClock clock;

  const auto in = quantize_inputs(q, k, v, cfg);
  t.quantize_ns = clock.lap();

  note(cfg.trace, Stage::kQkGemm, Domain::kInteger, "gemm_s8s8_nt");
  const auto logits = gemm_s8s8_nt(in.q.values, in.k.values, cfg.threads);
  const auto groups = key_groups(in.q, in.k, shapes.d);
  std::vector<float> col_alpha(shapes.keys);
  for (std::size_t j = 0; j < shapes.keys; ++j) {
    col_alpha[j] = static_cast<float>(groups.alphas[groups.group_of_column[j]]);
  }
  t.qk_gemm_ns = clock.lap();

  note(cfg.trace, Stage::kSoftmaxPath, Domain::kReal, "dequantize_logits");
  note(cfg.trace, Stage::kSoftmaxPath, Domain::kReal, "safe_softmax");
  note(cfg.trace, Stage::kSoftmaxPath, Domain::kReal, "requantize_p");
  if (cfg.p_format == PFormat::kUint8x255) {
    const auto p = float_softmax_requantize<std::uint8_t>(
        logits, col_alpha, cfg.mask, ProbMatrix::kDenomScale, cfg.threads);
    t.softmax_path_ns = clock.lap();
    return finish_integer(p, in, ProbMatrix::kDenomScale, cfg, clock, t);
  }
  const auto p = float_softmax_requantize<std::int8_t>(
      logits, col_alpha, cfg.mask, ProbMatrixInt8::kDenomScale, cfg.threads);
  t.softmax_path_ns = clock.lap();
  return finish_integer(p, in, ProbMatrixInt8::kDenomScale, cfg, clock, t);
}

AttentionResult reference_attention_timed(const RealMatrix& q,
                                          const RealMatrix& k,
                                          const RealMatrix& v,
                                          const AttendMask* mask,
                                          int threads) {
  const auto shapes = check_shapes(q, k, v, mask);
  StageTimings t;
  StageClock clock;
  t.quantize_ns = clock.lap();

  const auto logits = gemm_real(q, k, threads);
  t.qk_gemm_ns = clock.lap();

  std::vector<double> p;
  exact_softmax(logits, shapes.d, mask, p, threads);
  t.softmax_path_ns = clock.lap();

  const std::size_t d = shapes.d;
  const auto vals = v.data();
  std::vector<float> out(shapes.queries * d);
  const auto n = static_cast<std::int64_t>(shapes.queries);
#pragma omp parallel num_threads(threads)
  {
    std::vector<double> acc(d);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(i);
      std::fill(acc.begin(), acc.end(), 0.0);
      const double* prow = p.data() + r * shapes.keys;
      for (std::size_t kk = 0; kk < shapes.keys; ++kk) {
        const double w = prow[kk];
        const float* vrow = vals.data() + kk * d;
        for (std::size_t j = 0; j < d; ++j) acc[j] += w * vrow[j];
      }
      for (std::size_t j = 0; j < d; ++j) {
        out[r * d + j] = static_cast<float>(acc[j]);
      }
    }
  }
  t.pv_gemm_ns = clock.lap();
  t.dequantize_ns = clock.lap();
  t.total_ns = clock.total();
  return {RealMatrix(shapes.queries, d, std::move(out)), t};
}

RealMatrix reference_attention(const RealMatrix& q, const RealMatrix& k,
                               const RealMatrix& v, const AttendMask* mask,
                               int threads) {
  return reference_attention_timed(q, k, v, mask, threads).output;
}

RealMatrix reference_probabilities(const RealMatrix& q, const RealMatrix& k,
                                   const AttendMask* mask, int threads) {
  if (q.cols() != k.cols()) {
    throw Error(Errc::kDimensionMismatch, "q and k head dimensions differ");
  }
  if (mask != nullptr) {
    require_same_shape(mask->rows(), mask->cols(), q.rows(), k.rows(),
                       "attention mask");
  }
  std::vector<double> p;
  exact_softmax(gemm_real(q, k, threads), q.cols(), mask, p, threads);
  return RealMatrix(q.rows(), k.rows(), std::vector<float>(p.begin(), p.end()));
}

RealMatrix requantize_probabilities(const RealMatrix& p, PFormat format) {
  const int scale = format == PFormat::kUint8x255 ? ProbMatrix::kDenomScale
                                                  : ProbMatrixInt8::kDenomScale;
  std::vector<float> out(p.size());
  const auto src = p.data();
  for (std::size_t at = 0; at < out.size(); ++at) {
    const auto level = std::clamp<std::int64_t>(
        round_half_away(static_cast<double>(src[at]) * scale), 0, scale);
    out[at] = static_cast<float>(static_cast<double>(level) / scale);
  }
  return RealMatrix(p.rows(), p.cols(), std::move(out));
}

RealMatrix round_to_half(const RealMatrix& x) {
  constexpr float kHalfMax = 65504.0f;
  std::vector<float> out(x.size());
  const auto src = x.data();
  for (std::size_t at = 0; at < out.size(); ++at) {
    const float v = src[at];
    if (!std::isfinite(v)) {
      out[at] = v;
      continue;
    }
    const float mag = std::fabs(v);
    float r;
    if (mag < 0x1p-14f) {
      // Subnormal half: fixed quantum 2^-24.
      r = std::nearbyint(mag * 0x1p24f) * 0x1p-24f;
    } else {
      int e = 0;
      const float m = std::frexp(mag, &e);
      r = std::ldexp(std::nearbyint(std::ldexp(m, 11)), e - 11);
    }
    if (r > kHalfMax) r = std::numeric_limits<float>::infinity();
    out[at] = std::copysign(r, v);
  }
  return RealMatrix(x.rows(), x.cols(), std::move(out));
}

std::string_view to_string(PipelineKind k) noexcept {
  switch (k) {
    case PipelineKind::kInt:
      return "int";
    case PipelineKind::kQuantOnly:
      return "quant_only";
    case PipelineKind::kReference:
      return "reference";
    case PipelineKind::kReferenceFp16:
      return "fp16";
  }
  return "?";
}

PipelineKind parse_pipeline(std::string_view s) {
  if (s == "int") return PipelineKind::kInt;
  if (s == "quant_only") return PipelineKind::kQuantOnly;
  if (s == "reference") return PipelineKind::kReference;
  if (s == "fp16") return PipelineKind::kReferenceFp16;
  throw Error(Errc::kUsage, "unknown pipeline '" + std::string(s) + "'");
}

AttentionResult run_pipeline(PipelineKind kind, const RealMatrix& q,
                             const RealMatrix& k, const RealMatrix& v,
                             const AttentionConfig& cfg) {
  switch (kind) {
    case PipelineKind::kInt:
      return int_attention(q, k, v, cfg);
    case PipelineKind::kQuantOnly:
      return quant_only_attention(q, k, v, cfg);
    case PipelineKind::kReference:
      return reference_attention_timed(q, k, v, cfg.mask, cfg.threads);
    case PipelineKind::kReferenceFp16:
      return reference_attention_timed(round_to_half(q), round_to_half(k),
                                       round_to_half(v), cfg.mask, cfg.threads);
  }
  throw Error(Errc::kUsage, "unknown pipeline");
}

StageTimings median_timings(const std::vector<StageTimings>& runs) {
  if (runs.empty()) return {};
  const auto median = [&](std::int64_t StageTimings::*field) {
    std::vector<std::int64_t> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(r.*field);
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : (v[mid - 1] + v[mid]) / 2;
  };
  StageTimings t;
  t.quantize_ns = median(&StageTimings::quantize_ns);
  t.qk_gemm_ns = median(&StageTimings::qk_gemm_ns);
  t.softmax_path_ns = median(&StageTimings::softmax_path_ns);
  t.pv_gemm_ns = median(&StageTimings::pv_gemm_ns);
  t.dequantize_ns = median(&StageTimings::dequantize_ns);
  t.total_ns = median(&StageTimings::total_ns);
  return t;
}

AttentionResult measure_pipeline(PipelineKind kind, const RealMatrix& q,
                                 const RealMatrix& k, const RealMatrix& v,
                                 const AttentionConfig& cfg,
                                 MeasureOptions opts) {
  if (opts.iters < 1 || opts.warmup < 0) {
    throw Error(Errc::kUsage, "need iters >= 1 and warmup >= 0");
  }
  if (kind == PipelineKind::kInt) {
    // Build the LUT once, outside the timed region.
    const IntAttention op(cfg);
    for (int i = 0; i < opts.warmup; ++i) (void)op(q, k, v);
    std::vector<StageTimings> runs;
    AttentionResult last = op(q, k, v);
    runs.push_back(last.timings);
    for (int i = 1; i < opts.iters; ++i) {
      last = op(q, k, v);
      runs.push_back(last.timings);
    }
    last.timings = median_timings(runs);
    return last;
  }
  for (int i = 0; i < opts.warmup; ++i) (void)run_pipeline(kind, q, k, v, cfg);
  std::vector<StageTimings> runs;
  AttentionResult last = run_pipeline(kind, q, k, v, cfg);
  runs.push_back(last.timings);
  for (int i = 1; i < opts.iters; ++i) {
    last = run_pipeline(kind, q, k, v, cfg);
    runs.push_back(last.timings);
  }
  last.timings = median_timings(runs);
  return last;
}

}  // namespace intattn
