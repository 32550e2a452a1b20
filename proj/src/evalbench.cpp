#include "evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "error.hpp"
#include "rng.hpp"

namespace tunes {

FlopsEstimate flops_estimate(std::uint64_t M, std::uint64_t N, std::uint64_t L, std::uint64_t P) {
  if (P == 0 || L == 0 || L % P != 0) throw Error(Errc::InvalidArgument, "L must be a positive multiple of P");
  const std::uint64_t n = L / P;
  FlopsEstimate f;
  f.dual = M * n * n + N * L * P;
  f.flat = (M + N) * L * L;
  f.ratio = f.dual > 0 ? static_cast<double>(f.flat) / static_cast<double>(f.dual) : 0.0;
  return f;
}

FlopsEstimate flops_estimate(const ModelConfig& config) {
  const ParamCounts c = analytic_param_counts(config);
  return flops_estimate(c.patch, c.chars, static_cast<std::uint64_t>(config.max_len),
                        static_cast<std::uint64_t>(config.patch_size));
}

double measured_dual_cost(DualDecoderModel<float>& model, int L) {
  const auto& cfg = model.config();
  if (L <= 0 || L % cfg.patch_size != 0) throw Error(Errc::InvalidArgument, "L must be a positive multiple of P");
  model.counters().reset();
  model.cost_probe(L / cfg.patch_size);
  const ParamCounts c = model.count_params();
  return static_cast<double>(c.patch) / cfg.patch_layers * static_cast<double>(model.counters().patch_area) +
         static_cast<double>(c.chars) / cfg.char_layers * static_cast<double>(model.counters().char_area);
}

double measured_flat_cost(FlatDecoderModel<float>& model, int L) {
  model.score_area() = 0;
  model.cost_probe(L);
  return static_cast<double>(model.param_count()) / model.config().layers * static_cast<double>(model.score_area());
}

FlatConfig flat_baseline(const ModelConfig& dual, double tolerance) {
  const double target = static_cast<double>(analytic_param_counts(dual).total());
  FlatConfig best;
  double best_err = INFINITY;
  auto consider = [&](int layers) {
    for (int h = dual.heads; h <= 4 * dual.hidden; h += dual.heads) {
      FlatConfig f;
      f.max_len = dual.max_len;
      f.layers = layers;
      f.hidden = h;
      f.heads = dual.heads;
      f.ffn_mult = dual.ffn_mult;
      f.vocab_size = dual.vocab_size;
      const double err = std::abs(static_cast<double>(f.param_count()) - target) / target;
      if (err < best_err) {
        best_err = err;
        best = f;
      }
    }
  };
  // Same depth as the two stacks together first; any depth otherwise.
  consider(dual.patch_layers + dual.char_layers);
  if (best_err > tolerance) {
    for (int layers = 1; layers <= 2 * (dual.patch_layers + dual.char_layers); ++layers) consider(layers);
  }
  if (best_err > tolerance) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100 * best_err);
    throw Error(Errc::ConfigInfeasible, std::string("closest flat config is off by ") + buf);
  }
  return best;
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename Gen>
Throughput timed_generation(const std::vector<ControlCodes>& pool, int n, const SampleOptions& opts, Gen&& gen) {
  if (n <= 0) throw Error(Errc::EmptySample, "efficiency needs at least one tune");
  if (pool.empty()) throw Error(Errc::EmptySample, "no control prefixes to sample from");
  Rng pick(opts.seed);
  std::vector<std::string> prompts;
  for (int i = 0; i < n; ++i) prompts.push_back(render_prefix(pool[pick.below(pool.size())]));

  SampleOptions warm = opts;
  warm.seed = mix_seed(opts.seed, ~0ULL);
  gen(prompts[0], warm);

  Throughput t;
  const auto start = Clock::now();
  for (int i = 0; i < n; ++i) {
    SampleOptions o = opts;
    o.seed = mix_seed(opts.seed, static_cast<std::uint64_t>(i));
    t.tokens += gen(prompts[static_cast<std::size_t>(i)], o).new_chars;
  }
  t.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  t.samples = static_cast<std::size_t>(n);
  return t;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::size_t code_slots(int sections) {
  std::size_t n = 1;
  for (int k = 0; k < sections; ++k) n += 1 + static_cast<std::size_t>(k);
  return n;
}

}  // namespace

Throughput efficiency(const DualDecoderModel<float>& model, const std::vector<ControlCodes>& pool, int n,
                      const SampleOptions& opts) {
  return timed_generation(pool, n, opts,
                          [&](const std::string& prompt, const SampleOptions& o) { return sample(model, prompt, o); });
}

Throughput efficiency_flat(const FlatDecoderModel<float>& model, const std::vector<ControlCodes>& pool, int n,
                           const SampleOptions& opts) {
  return timed_generation(
      pool, n, opts, [&](const std::string& prompt, const SampleOptions& o) { return sample_flat(model, prompt, o); });
}

BenchResult throughput_bench(const ModelConfig& config, BenchMode mode, int runs, std::uint64_t seed) {
  if (runs <= 0) throw Error(Errc::EmptySample, "bench needs at least one run");
  BenchResult r;
  r.flat = flat_baseline(config);
  DualDecoderModel<float> dual(config, seed);
  FlatDecoderModel<float> flat(r.flat, seed);
  r.dual_params = dual.count_params().total();
  r.flat_params = flat.param_count();

  ControlCodes codes;
  codes.sections.push_back({8, {}});
  const std::vector<ControlCodes> pool{codes};
  SampleOptions opts;
  opts.fill_budget = true;
  for (int i = 0; i < runs; ++i) {
    opts.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    if (mode != BenchMode::Flat) r.dual_runs.push_back(efficiency(dual, pool, 1, opts).tokens_per_second());
    if (mode != BenchMode::Dual) r.flat_runs.push_back(efficiency_flat(flat, pool, 1, opts).tokens_per_second());
  }
  r.dual_median = median(r.dual_runs);
  r.flat_median = median(r.flat_runs);
  r.ratio = r.flat_median > 0 ? r.dual_median / r.flat_median : 0.0;
  return r;
}

Controllability score_generations(const std::vector<std::string>& texts, const std::vector<ControlCodes>& requested) {
  if (texts.empty()) throw Error(Errc::EmptySample, "nothing to score");
  if (texts.size() != requested.size()) throw Error(Errc::InvalidArgument, "texts and requests differ in number");
  Controllability c;
  double code_sum = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const FormDiff d = check_form(texts[i], requested[i]);
    c.scores.push_back(d.similarity);
    if (d.extraction_failed) {
      ++c.failed;
      continue;
    }
    if (d.match) ++c.exact;
    const std::size_t slots =
        code_slots(std::max(requested[i].section_count(), d.extracted.section_count()));
    code_sum += 1.0 - static_cast<double>(d.deltas.size()) / static_cast<double>(slots);
  }
  double sum = 0;
  for (double s : c.scores) sum += s;
  c.mean = sum / static_cast<double>(c.scores.size());
  c.per_code = code_sum / static_cast<double>(c.scores.size());
  return c;
}

Controllability controllability(const DualDecoderModel<float>& model, const std::vector<ControlCodes>& prompts,
                                const SampleOptions& opts, int threads, std::vector<std::string>* texts) {
  if (prompts.empty()) throw Error(Errc::EmptySample, "controllability needs at least one prompt");
  std::vector<std::string> out(prompts.size());
  const std::size_t workers = static_cast<std::size_t>(std::clamp(threads, 1, static_cast<int>(prompts.size())));
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < prompts.size(); i += workers) {
      SampleOptions o = opts;
      o.seed = mix_seed(opts.seed, i);
      out[i] = sample(model, render_prefix(prompts[i]), o).text;
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  Controllability c = score_generations(out, prompts);
  if (texts) *texts = std::move(out);
  return c;
}

std::vector<ControlCodes> corpus_codes(const std::vector<CorpusRecord>& records) {
  std::vector<ControlCodes> out;
  for (const auto& r : records) out.push_back(parse_prefix(r.prefixed_text).codes);
  return out;
}

Controllability ground_truth_controllability(const std::vector<CorpusRecord>& records) {
  std::vector<std::string> tunes;
  std::vector<ControlCodes> codes;
  for (const auto& r : records) {
    tunes.push_back(parse_prefix(r.prefixed_text).remainder);
    codes.push_back(extract_control_codes(parse_tune(tunes.back())));
  }
  return score_generations(tunes, codes);
}

std::string GenReport::to_text() const {
  char buf[64];
  std::string s;
  std::snprintf(buf, sizeof buf, "%.6g", tokens_per_second);
  s += std::string("tokens_per_second=") + buf + "\n";
  std::snprintf(buf, sizeof buf, "%.6f", controllability);
  s += std::string("controllability=") + buf + "\n";
  s += "n_samples=" + std::to_string(n_samples) + "\n";
  s += "config_digest=" + config_digest + "\n";
  s += "hardware=" + hardware + "\n";
  for (const auto& [k, v] : extra) s += k + "=" + v + "\n";
  return s;
}

std::string GenReport::table() const {
  std::string s;
  std::size_t width = 0;
  std::vector<std::pair<std::string, std::string>> rows;
  const std::string text = to_text();
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    const std::size_t eq = line.find('=');
    rows.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    width = std::max(width, eq);
  }
  for (const auto& [k, v] : rows) s += k + std::string(width - k.size() + 2, ' ') + v + "\n";
  return s;
}

std::string hardware_note() {
  std::string s = std::to_string(std::thread::hardware_concurrency()) + " hw threads";
#if defined(__VERSION__)
  s += ", compiler " + std::string(__VERSION__);
#endif
  return s;
}

}  // namespace tunes
