// intattn: benchmark and fidelity harness for the integer attention pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <variant>
#include <vector>

#include "intattn/bench.hpp"
#include "intattn/error.hpp"
#include "intattn/fidelity.hpp"
#include "intattn/random.hpp"
#include "intattn/tensor_io.hpp"

namespace {

using namespace intattn;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Options {
  std::vector<std::size_t> lengths = default_lengths();
  std::size_t d = kDefaultHeadDim;
  std::vector<std::uint64_t> seeds = {0};
  int threads = 1;
  std::vector<int> b = {kDefaultLutBits};
  std::vector<float> c = {kDefaultClip};
  std::string p_format = "uint8";
  std::vector<std::string> pipelines = {"int", "quant_only", "reference"};
  std::string out;
  std::string format = "csv";
  int warmup = MeasureOptions{}.warmup;
  int iters = MeasureOptions{}.iters;
};

void add_run_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--len", o.lengths, "Sequence lengths")->delimiter(',')->capture_default_str();
  cmd->add_option("--dim", o.d, "Head dimension")->capture_default_str();
  cmd->add_option("--seeds", o.seeds, "Input seeds")->delimiter(',')->capture_default_str();
  cmd->add_option("--threads", o.threads, "Kernel threads")
      ->envname("INTATTN_THREADS")
      ->capture_default_str();
  cmd->add_option("--b", o.b, "LUT index bits")->delimiter(',')->capture_default_str();
  cmd->add_option("--c", o.c, "Clipping threshold")->delimiter(',')->capture_default_str();
  cmd->add_option("--p-format", o.p_format, "Probability format: uint8 or int8")
      ->capture_default_str();
  cmd->add_option("--pipelines", o.pipelines, "Subset of int, quant_only, reference")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--out", o.out, "Output path (default stdout)");
  cmd->add_option("--format", o.format, "csv or json")->capture_default_str();
  cmd->add_option("--warmup", o.warmup, "Untimed runs per configuration")->capture_default_str();
  cmd->add_option("--iters", o.iters, "Timed runs per configuration")->capture_default_str();
}

BenchSpec to_spec(const Options& o) {
  BenchSpec s;
  s.pipelines.clear();
  for (const auto& p : o.pipelines) s.pipelines.push_back(parse_pipeline(p));
  s.lengths = o.lengths;
  s.d = o.d;
  s.seeds = o.seeds;
  s.threads = o.threads;
  s.b_grid = o.b;
  s.c_grid = o.c;
  s.p_format = parse_p_format(o.p_format);
  s.measure = {o.warmup, o.iters};
  s.validate();
  return s;
}

void emit(const Report& r, const Options& o) {
  const auto format = parse_report_format(o.format);
  if (o.out.empty()) {
    write_report(r, format, std::cout);
  } else {
    write_report(r, format, o.out);
  }
}

RealMatrix as_real(const AnyMatrix& any) {
  return std::visit(
      [](const auto& m) {
        const auto src = m.data();
        return RealMatrix(m.rows(), m.cols(), std::vector<float>(src.begin(), src.end()));
      },
      any);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Integer attention benchmark harness"};
  app.require_subcommand(1);

  Options run;
  auto* breakdown = app.add_subcommand("breakdown", "Per-stage latency breakdown");
  auto* fidelity = app.add_subcommand("fidelity", "Pipeline fidelity against the reference");
  auto* sweep = app.add_subcommand("sweep", "Fidelity over the (b, c) grid");
  for (auto* cmd : {breakdown, fidelity, sweep}) add_run_flags(cmd, run);

  std::size_t rows = 256, cols = 64;
  std::uint64_t seed = 0;
  std::string what = "q", gen_out;
  auto* gen = app.add_subcommand("gen-tensor", "Write a seeded tensor file");
  gen->add_option("--len", rows, "Rows")->capture_default_str();
  gen->add_option("--dim", cols, "Columns")->capture_default_str();
  gen->add_option("--seeds", seed, "Seed")->capture_default_str();
  gen->add_option("--what", what,
                  "q, k or v for an input; int, quant_only, reference or fp16 for an "
                  "attention output on the seeded inputs")
      ->capture_default_str();
  gen->add_option("--threads", run.threads, "Kernel threads")->envname("INTATTN_THREADS");
  gen->add_option("--out", gen_out, "Output path")->required();

  std::string lhs, rhs;
  Options cmp;
  auto* compare_files = app.add_subcommand("compare-files", "Fidelity of A against reference B");
  compare_files->add_option("a", lhs, "Tensor under test")->required();
  compare_files->add_option("b", rhs, "Reference tensor")->required();
  compare_files->add_option("--out", cmp.out, "Output path (default stdout)");
  compare_files->add_option("--format", cmp.format, "csv or json")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      const auto in = make_inputs(rows, cols, seed);
      const RealMatrix m = [&] {
        if (what == "q") return in.q;
        if (what == "k") return in.k;
        if (what == "v") return in.v;
        AttentionConfig cfg;
        cfg.threads = run.threads;
        return run_pipeline(parse_pipeline(what), in.q, in.k, in.v, cfg).output;
      }();
      save_tensor(m, gen_out);
      return 0;
    }
    if (compare_files->parsed()) {
      const auto f = compare(as_real(load_any_tensor(lhs)), as_real(load_any_tensor(rhs)));
      Report r;
      r.columns = {"a", "b", "cos_sim", "rel_l1", "rmse"};
      r.add_row({lhs, rhs, f.cos_sim, f.rel_l1, f.rmse});
      emit(r, cmp);
      return 0;
    }

    const BenchSpec spec = to_spec(run);
    parse_report_format(run.format);
    BenchOutcome outcome = breakdown->parsed() ? run_breakdown(spec)
                           : fidelity->parsed() ? run_fidelity(spec)
                                                : run_sweep(spec);
    emit(outcome.report, run);
    for (const auto& f : outcome.failures) std::cerr << "failed: " << f << '\n';
    return outcome.ok() ? 0 : kExitFailure;
  } catch (const Error& e) {
    std::cerr << "intattn: " << e.what() << '\n';
    const bool usage = e.code() == Errc::kUsage || e.code() == Errc::kParameterRange;
    return usage ? kExitUsage : kExitFailure;
  }
}
