#pragma once

// Efficiency and controllability measurements, and the flat decoder baseline.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "control.hpp"
#include "generate.hpp"
#include "model.hpp"
#include "trainer.hpp"

namespace tunes {

// Attention-cost units of a dual model, M (L/P)^2 + N L P, and of a flat
// model, (M+N) L^2.
struct FlopsEstimate {
  std::uint64_t dual = 0;
  std::uint64_t flat = 0;
  double ratio = 0;  // flat / dual
};

FlopsEstimate flops_estimate(std::uint64_t M, std::uint64_t N, std::uint64_t L, std::uint64_t P);
FlopsEstimate flops_estimate(const ModelConfig& config);  // analytic M, N

// Cost measured from the attention score-area counters of a full-length
// probe: per stack, (parameter mass / layers) x counted area.
double measured_dual_cost(DualDecoderModel<float>& model, int L);
double measured_flat_cost(FlatDecoderModel<float>& model, int L);

// Flat config with the same vocab, context and head count whose parameter
// count is within `tolerance` of M+N. Throws ConfigInfeasible.
FlatConfig flat_baseline(const ModelConfig& dual, double tolerance = 0.05);

struct Throughput {
  std::size_t samples = 0;
  std::size_t tokens = 0;  // characters emitted, specials excluded
  double seconds = 0;
  double tokens_per_second() const { return seconds > 0 ? static_cast<double>(tokens) / seconds : 0.0; }
};

// Generates n tunes from scratch after one untimed warmup. Tune i uses the
// control prefix pool[r_i] with r_i drawn from the seed, and sampling seed
// mix_seed(opts.seed, i). Throws EmptySample when n == 0.
Throughput efficiency(const DualDecoderModel<float>& model, const std::vector<ControlCodes>& pool, int n,
                      const SampleOptions& opts);
Throughput efficiency_flat(const FlatDecoderModel<float>& model, const std::vector<ControlCodes>& pool, int n,
                           const SampleOptions& opts);

struct BenchResult {
  std::vector<double> dual_runs, flat_runs;  // tokens/s per run
  double dual_median = 0, flat_median = 0;
  double ratio = 0;  // dual / flat medians
  std::uint64_t dual_params = 0, flat_params = 0;
  FlatConfig flat;
};

enum class BenchMode { Dual, Flat, Both };

// Untrained models of `config` and its flat baseline, each generating full
// budgets (no early end) from the same prompt, `runs` times.
BenchResult throughput_bench(const ModelConfig& config, BenchMode mode, int runs, std::uint64_t seed);

struct Controllability {
  double mean = 0;      // string-level: eds of rendered prefixes
  double per_code = 0;  // structured: fraction of matching codes
  std::vector<double> scores;
  std::size_t exact = 0;
  std::size_t failed = 0;
};

// Scores already generated texts against the codes they were asked for.
Controllability score_generations(const std::vector<std::string>& texts, const std::vector<ControlCodes>& requested);

// Generates one tune per prompt (prompt text = rendered prefix) with seed
// mix_seed(opts.seed, i). Work is spread over `threads` workers.
Controllability controllability(const DualDecoderModel<float>& model, const std::vector<ControlCodes>& prompts,
                                const SampleOptions& opts, int threads = 1, std::vector<std::string>* texts = nullptr);

// Codes of every record's prefix.
std::vector<ControlCodes> corpus_codes(const std::vector<CorpusRecord>& records);

// Scores every record's tune against the codes extracted from that tune.
Controllability ground_truth_controllability(const std::vector<CorpusRecord>& records);

struct GenReport {
  double tokens_per_second = 0;
  double controllability = 0;
  std::size_t n_samples = 0;
  std::string config_digest;
  std::string hardware;
  std::map<std::string, std::string> extra;

  std::string to_text() const;  // key=value lines
  std::string table() const;    // aligned two-column text
};

std::string hardware_note();

}  // namespace tunes
