#include "intattn/bench.hpp"

#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "intattn/fidelity.hpp"
#include "intattn/int_gemm.hpp"
#include "intattn/random.hpp"

namespace intattn {
namespace {

void usage(const std::string& msg) { throw Error(Errc::kUsage, msg); }

std::string describe(std::size_t length, std::uint64_t seed) {
  return "L=" + std::to_string(length) + " seed=" + std::to_string(seed);
}

std::string format_c(float c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", static_cast<double>(c));
  return buf;
}

AttentionConfig config_for(const BenchSpec& spec, int b, float c) {
  AttentionConfig cfg;
  cfg.b = b;
  cfg.c = c;
  cfg.p_format = spec.p_format;
  cfg.threads = spec.threads;
  return cfg;
}

}  // namespace

std::vector<std::size_t> default_lengths() { return {256, 512, 1024, 2048}; }

void BenchSpec::validate() const {
  if (pipelines.empty()) usage("--pipelines must name at least one pipeline");
  if (lengths.empty()) usage("--len must list at least one length");
  for (auto l : lengths) {
    if (l == 0 || l > kMaxPvLength) {
      usage("--len " + std::to_string(l) + " outside [1, " +
            std::to_string(kMaxPvLength) + "]");
    }
  }
  if (d == 0) usage("--dim must be >= 1");
  if (seeds.empty()) usage("--seeds must list at least one seed");
  if (threads < 1) usage("--threads must be >= 1");
  if (b_grid.empty() || c_grid.empty()) usage("--b and --c must be non-empty");
  for (int b : b_grid) {
    if (b < kMinLutBits || b > kMaxLutBits) {
      usage("--b " + std::to_string(b) + " outside [2, 8]");
    }
  }
  for (float c : c_grid) {
    if (!(c > 0.0f) || !std::isfinite(c)) usage("--c values must be positive");
  }
  if (measure.iters < 1 || measure.warmup < 0) {
    usage("--iters must be >= 1 and --warmup >= 0");
  }
}

BenchOutcome run_breakdown(const BenchSpec& spec) {
  spec.validate();
  BenchOutcome out;
  auto& r = out.report;
  r.columns = {"pipeline",       "L",
               "d",              "seed",
               "threads",        "quantize_ns",
               "qk_gemm_ns",     "softmax_path_ns",
               "pv_gemm_ns",     "dequantize_ns",
               "total_ns",       "share_quantize",
               "share_qk_gemm",  "share_softmax_path",
               "share_pv_gemm",  "share_dequantize",
               "gflops"};
  r.notes = {"stage times are medians over --iters runs after --warmup runs",
             "shares are fractions of the summed stage time",
             "gflops counts the two GEMMs only: 4*L^2*d / total seconds"};

  for (auto length : spec.lengths) {
    for (auto seed : spec.seeds) {
      try {
        const auto in = make_inputs(length, spec.d, seed);
        for (auto kind : spec.pipelines) {
          const auto cfg = config_for(spec, spec.b_grid.front(), spec.c_grid.front());
          const auto t = measure_pipeline(kind, in.q, in.k, in.v, cfg, spec.measure)
                             .timings;
          const double sum = static_cast<double>(std::max<std::int64_t>(1, t.stage_sum()));
          const double flops = 4.0 * static_cast<double>(length) *
                               static_cast<double>(length) *
                               static_cast<double>(spec.d);
          const double seconds =
              static_cast<double>(std::max<std::int64_t>(1, t.total_ns)) * 1e-9;
          r.add_row({std::string(to_string(kind)),
                     static_cast<std::int64_t>(length),
                     static_cast<std::int64_t>(spec.d),
                     static_cast<std::int64_t>(seed),
                     static_cast<std::int64_t>(spec.threads),
                     t.quantize_ns, t.qk_gemm_ns, t.softmax_path_ns,
                     t.pv_gemm_ns, t.dequantize_ns, t.total_ns,
                     t.quantize_ns / sum, t.qk_gemm_ns / sum,
                     t.softmax_path_ns / sum, t.pv_gemm_ns / sum,
                     t.dequantize_ns / sum, flops / seconds * 1e-9});
        }
      } catch (const std::exception& e) {
        out.failures.push_back("breakdown " + describe(length, seed) + ": " +
                               e.what());
      }
    }
  }
  return out;
}

BenchOutcome run_fidelity(const BenchSpec& spec) {
  spec.validate();
  BenchOutcome out;
  auto& r = out.report;
  r.columns = {"comparison", "L", "d", "seed", "b", "c",
               "cos_sim",    "rel_l1", "rmse"};
  r.notes = {"cos_sim is the mean over rows of per-row cosine similarity",
             "rel_l1 = sum|a-b| / sum|b| and rmse over all elements"};

  const int b = spec.b_grid.front();
  const float c = spec.c_grid.front();
  for (auto length : spec.lengths) {
    for (auto seed : spec.seeds) {
      try {
        const auto in = make_inputs(length, spec.d, seed);
        auto cfg = config_for(spec, b, c);
        const auto ref = reference_attention(in.q, in.k, in.v, nullptr, spec.threads);
        const auto add = [&](const std::string& name, const FidelityReport& f) {
          r.add_row({name, static_cast<std::int64_t>(length),
                     static_cast<std::int64_t>(spec.d),
                     static_cast<std::int64_t>(seed),
                     static_cast<std::int64_t>(b), std::stod(format_c(c)),
                     f.cos_sim, f.rel_l1, f.rmse});
        };
        add("int_vs_reference",
            compare(int_attention(in.q, in.k, in.v, cfg).output, ref));
        add("quant_only_vs_reference",
            compare(quant_only_attention(in.q, in.k, in.v, cfg).output, ref));
        add("fp16_vs_reference",
            compare(run_pipeline(PipelineKind::kReferenceFp16, in.q, in.k,
                                 in.v, cfg)
                        .output,
                    ref));
        add("reference_vs_reference", compare(ref, ref));

        const auto p = reference_probabilities(in.q, in.k, nullptr, spec.threads);
        add("p_uint8_vs_exact",
            compare(requantize_probabilities(p, PFormat::kUint8x255), p));
        add("p_int8_vs_exact",
            compare(requantize_probabilities(p, PFormat::kInt8x127), p));
      } catch (const std::exception& e) {
        out.failures.push_back("fidelity " + describe(length, seed) + ": " +
                               e.what());
      }
    }
  }
  return out;
}

BenchOutcome run_sweep(const BenchSpec& spec) {
  spec.validate();
  BenchOutcome out;
  auto& r = out.report;
  r.columns = {"b",           "c",           "L",           "d",
               "seeds",       "mean_cos_sim", "min_cos_sim", "mean_rel_l1",
               "mean_rmse"};
  r.notes = {"int pipeline against the exact reference, averaged over seeds"};

  for (auto length : spec.lengths) {
    // Inputs and references are shared by every grid cell.
    std::vector<std::pair<AttentionInputs, RealMatrix>> cases;
    for (auto seed : spec.seeds) {
      auto in = make_inputs(length, spec.d, seed);
      auto ref = reference_attention(in.q, in.k, in.v, nullptr, spec.threads);
      cases.emplace_back(std::move(in), std::move(ref));
    }
    for (int b : spec.b_grid) {
      for (float c : spec.c_grid) {
        try {
          const IntAttention op(config_for(spec, b, c));
          double cos = 0.0, l1 = 0.0, rmse = 0.0, worst = 1.0;
          for (const auto& [in, ref] : cases) {
            const auto f = compare(op(in.q, in.k, in.v).output, ref);
            cos += f.cos_sim;
            l1 += f.rel_l1;
            rmse += f.rmse;
            worst = std::min(worst, f.cos_sim);
          }
          const double n = static_cast<double>(cases.size());
          r.add_row({static_cast<std::int64_t>(b), std::stod(format_c(c)),
                     static_cast<std::int64_t>(length),
                     static_cast<std::int64_t>(spec.d),
                     static_cast<std::int64_t>(cases.size()), cos / n, worst,
                     l1 / n, rmse / n});
        } catch (const std::exception& e) {
          out.failures.push_back("sweep b=" + std::to_string(b) +
                                 " c=" + format_c(c) + " L=" +
                                 std::to_string(length) + ": " + e.what());
        }
      }
    }
  }
  return out;
}

}  // namespace intattn
