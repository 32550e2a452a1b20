#include "tunesformer.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <memory>
#include <new>
#include <string>

#include "checkpoint.hpp"
#include "control.hpp"
#include "error.hpp"
#include "evalbench.hpp"
#include "generate.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "trainer.hpp"

struct tf_model {
  std::unique_ptr<tunes::DualDecoderModel<float>> impl;
};

static_assert(TF_ERR_MISSING_KEY_FIELD == static_cast<int>(tunes::Errc::MissingKeyField) + 1);
static_assert(TF_ERR_INVALID_PROMPT == static_cast<int>(tunes::Errc::InvalidPrompt) + 1);
static_assert(TF_ERR_BAD_CHECKPOINT == static_cast<int>(tunes::Errc::BadCheckpoint) + 1);

namespace {

thread_local std::string g_last_error;

tf_status to_status(tunes::Errc code) { return static_cast<tf_status>(static_cast<int>(code) + 1); }

template <typename F>
tf_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return TF_OK;
  } catch (const tunes::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TF_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw tunes::Error(tunes::Errc::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

void set_string(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

tunes::SampleOptions sample_options(const tf_sample_options* opts) {
  tf_sample_options d;
  tf_sample_options_default(&d);
  const tf_sample_options& o = opts ? *opts : d;
  tunes::SampleOptions s;
  s.temperature = o.temperature;
  s.top_p = o.top_p;
  s.max_patches = o.max_patches;
  s.seed = o.seed;
  s.greedy = o.greedy != 0;
  s.validate();
  return s;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<tunes::ControlCodes> draw_prompts(const std::string& corpus_path, std::size_t n, std::uint64_t seed) {
  const auto pool = tunes::corpus_codes(tunes::read_corpus(corpus_path));
  if (pool.empty()) throw tunes::Error(tunes::Errc::EmptySample, corpus_path + " holds no records");
  tunes::Rng rng(tunes::mix_seed(seed, 0x70726f6d7074ULL));
  std::vector<tunes::ControlCodes> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[rng.below(pool.size())]);
  return out;
}

}  // namespace

extern "C" {

const char* tf_version(void) { return "0.1.0"; }

const char* tf_status_name(tf_status status) {
  if (status == TF_OK) return "OK";
  if (status == TF_ERR_INTERNAL) return "Internal";
  const int code = static_cast<int>(status) - 1;
  if (code < 0 || code > static_cast<int>(tunes::Errc::BadCheckpoint)) return "Unknown";
  return tunes::errc_name(static_cast<tunes::Errc>(code)).data();
}

const char* tf_last_error(void) { return g_last_error.c_str(); }

void tf_string_free(char* s) { std::free(s); }

tf_status tf_model_create(const char* preset, uint64_t seed, tf_model** out) {
  return guarded([&] {
    require(preset && out, "preset and out are required");
    auto m = std::make_unique<tf_model>();
    m->impl = std::make_unique<tunes::DualDecoderModel<float>>(tunes::ModelConfig::preset(preset), seed);
    *out = m.release();
  });
}

tf_status tf_model_load(const char* path, tf_model** out) {
  return guarded([&] {
    require(path && out, "path and out are required");
    auto m = std::make_unique<tf_model>();
    m->impl = tunes::load_model(path);
    *out = m.release();
  });
}

tf_status tf_model_save(const tf_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "model and path are required");
    tunes::save_model(path, *model->impl);
  });
}

void tf_model_free(tf_model* model) { delete model; }

tf_status tf_model_param_counts(const tf_model* model, uint64_t* patch, uint64_t* chars) {
  return guarded([&] {
    require(model, "model is required");
    const auto c = model->impl->count_params();
    if (patch) *patch = c.patch;
    if (chars) *chars = c.chars;
  });
}

tf_status tf_model_config_digest(const tf_model* model, char* buf, size_t size) {
  return guarded([&] {
    require(model && buf, "model and buf are required");
    const std::string d = model->impl->config().digest();
    require(size > d.size(), "digest buffer needs 17 bytes");
    std::memcpy(buf, d.c_str(), d.size() + 1);
  });
}

tf_status tf_model_config_text(const tf_model* model, char** out) {
  return guarded([&] {
    require(model && out, "model and out are required");
    set_string(out, model->impl->config().to_text());
  });
}

tf_status tf_preprocess(const char* const* paths, size_t n_paths, const char* out_path, double val_fraction,
                        uint64_t seed, tf_corpus_counts* counts, char** skip_report) {
  return guarded([&] {
    require(paths && n_paths > 0 && out_path, "input paths and an output path are required");
    std::vector<std::string> inputs;
    for (size_t i = 0; i < n_paths; ++i) {
      require(paths[i] != nullptr, "null input path");
      inputs.emplace_back(paths[i]);
    }
    tunes::CorpusOptions opts;
    opts.val_fraction = val_fraction;
    opts.seed = seed;
    const auto c = tunes::build_corpus(inputs, out_path, opts);
    if (counts) *counts = {c.input, c.accepted, c.train, c.validation, c.skipped_total()};
    std::string report;
    for (const auto& [reason, n] : c.skipped) report += reason + "=" + std::to_string(n) + "\n";
    set_string(skip_report, report);
  });
}

void tf_train_options_default(tf_train_options* opts) {
  if (!opts) return;
  const tunes::TrainOptions d;
  opts->steps = 500;
  opts->batch = d.batch;
  opts->lr = d.lr;
  opts->warmup = d.warmup;
  opts->seed = d.seed;
  opts->eval_every = d.eval_every;
  opts->resume_state = nullptr;
}

tf_status tf_train(tf_model* model, const char* corpus_path, const char* val_path, const tf_train_options* opts,
                   const char* out_path, tf_train_callback callback, void* user, tf_train_result* result) {
  return guarded([&] {
    require(model && corpus_path && out_path, "model, corpus and output path are required");
    tf_train_options o;
    tf_train_options_default(&o);
    if (opts) o = *opts;
    require(o.steps >= 0, "steps must be >= 0");
    tunes::TrainOptions t;
    t.batch = o.batch;
    t.lr = o.lr;
    t.warmup = o.warmup;
    t.seed = o.seed;
    t.eval_every = o.eval_every;

    const auto train = tunes::read_corpus(corpus_path);
    const auto val = val_path ? tunes::read_corpus(val_path) : std::vector<tunes::CorpusRecord>{};
    auto& m = *model->impl;
    tunes::Trainer trainer(m, train, val, t);
    if (o.resume_state) trainer.restore(tunes::read_container(o.resume_state));

    const std::string out(out_path);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto logs = trainer.run(
        o.steps,
        [&](const tunes::StepLog& log) {
          if (callback) callback(log.step, log.loss, log.val_loss.value_or(nan), user);
        },
        [&] { tunes::save_model(out, m, {{"step", std::to_string(trainer.step())}}); });
    if (val.empty()) tunes::save_model(out, m, {{"step", std::to_string(trainer.step())}});
    tunes::write_container(out + ".state", trainer.state());

    if (result) {
      result->steps = trainer.step();
      result->first_loss = logs.empty() ? nan : logs.front().loss;
      result->final_loss = logs.empty() ? nan : logs.back().loss;
      result->best_val = val.empty() ? nan : trainer.best_val();
      result->train_records = trainer.train_size();
      result->dropped_records = trainer.dropped();
    }
  });
}

void tf_sample_options_default(tf_sample_options* opts) {
  if (!opts) return;
  const tunes::SampleOptions d;
  opts->temperature = d.temperature;
  opts->top_p = d.top_p;
  opts->max_patches = d.max_patches;
  opts->seed = d.seed;
  opts->greedy = d.greedy ? 1 : 0;
}

tf_status tf_generate(const tf_model* model, const char* prompt, const tf_sample_options* opts, char** text,
                      tf_sample_info* info, char** meta) {
  return guarded([&] {
    require(model && prompt && text, "model, prompt and text are required");
    const auto so = sample_options(opts);
    const auto s = tunes::sample(*model->impl, prompt, so);
    const auto requested = tunes::parse_prefix(prompt).codes;
    const auto form = tunes::check_form(s.text, requested);
    if (info) {
      info->prompt_patches = s.prompt_patches;
      info->new_patches = s.new_patches;
      info->new_chars = s.new_chars;
      info->ended = s.ended;
      info->budget_exhausted = s.budget_exhausted;
      info->form_match = form.match;
      info->form_extraction_failed = form.extraction_failed;
      info->form_similarity = form.similarity;
    }
    if (meta) {
      std::string m;
      m += "seed=" + std::to_string(so.seed) + "\n";
      m += "temperature=" + fmt(so.temperature) + "\n";
      m += "top_p=" + fmt(so.top_p) + "\n";
      m += "max_patches=" + std::to_string(so.max_patches) + "\n";
      m += "greedy=" + std::to_string(so.greedy ? 1 : 0) + "\n";
      m += "config_digest=" + model->impl->config().digest() + "\n";
      m += "new_patches=" + std::to_string(s.new_patches) + "\n";
      m += "new_chars=" + std::to_string(s.new_chars) + "\n";
      m += "ended=" + std::to_string(s.ended ? 1 : 0) + "\n";
      m += "budget_exhausted=" + std::to_string(s.budget_exhausted ? 1 : 0) + "\n";
      m += "form_match=" + std::to_string(form.match ? 1 : 0) + "\n";
      m += "form_extraction_failed=" + std::to_string(form.extraction_failed ? 1 : 0) + "\n";
      m += "form_similarity=" + fmt(form.similarity) + "\n";
      std::string deltas;
      for (const auto& d : form.deltas) {
        deltas += (deltas.empty() ? "" : ",") + d.code + ":" + std::to_string(d.requested) + "->" +
                  std::to_string(d.actual);
      }
      m += "form_deltas=" + deltas + "\n";
      *meta = dup_string(m);
    }
    *text = dup_string(s.text);
  });
}

tf_status tf_eval_controllability(const tf_model* model, const char* corpus_path, size_t n,
                                  const tf_sample_options* opts, int threads, tf_eval_result* result, char** report) {
  return guarded([&] {
    require(model && corpus_path, "model and corpus are required");
    if (n == 0) throw tunes::Error(tunes::Errc::EmptySample, "controllability needs n >= 1");
    const auto so = sample_options(opts);
    const auto prompts = draw_prompts(corpus_path, n, so.seed);
    const auto c = tunes::controllability(*model->impl, prompts, so, threads);
    if (result) *result = {c.mean, c.per_code, c.scores.size(), c.exact, c.failed, 0, 0.0};
    tunes::GenReport r;
    r.controllability = c.mean;
    r.n_samples = c.scores.size();
    r.config_digest = model->impl->config().digest();
    r.hardware = tunes::hardware_note();
    r.extra["metric"] = "controllability";
    r.extra["per_code"] = fmt(c.per_code);
    r.extra["exact_matches"] = std::to_string(c.exact);
    r.extra["extraction_failures"] = std::to_string(c.failed);
    r.extra["seed"] = std::to_string(so.seed);
    set_string(report, r.to_text());
  });
}

tf_status tf_eval_efficiency(const tf_model* model, const char* corpus_path, size_t n, const tf_sample_options* opts,
                             tf_eval_result* result, char** report) {
  return guarded([&] {
    require(model, "model is required");
    if (n == 0) throw tunes::Error(tunes::Errc::EmptySample, "efficiency needs n >= 1");
    const auto so = sample_options(opts);
    std::vector<tunes::ControlCodes> pool;
    if (corpus_path) {
      pool = tunes::corpus_codes(tunes::read_corpus(corpus_path));
    } else {
      pool.push_back(tunes::ControlCodes{{{8, {}}}});
    }
    const auto t = tunes::efficiency(*model->impl, pool, static_cast<int>(n), so);
    if (result) *result = {t.tokens_per_second(), 0.0, t.samples, 0, 0, t.tokens, t.seconds};
    tunes::GenReport r;
    r.tokens_per_second = t.tokens_per_second();
    r.n_samples = t.samples;
    r.config_digest = model->impl->config().digest();
    r.hardware = tunes::hardware_note();
    r.extra["metric"] = "efficiency";
    r.extra["tokens"] = std::to_string(t.tokens);
    r.extra["seconds"] = fmt(t.seconds);
    r.extra["seed"] = std::to_string(so.seed);
    set_string(report, r.to_text());
  });
}

tf_status tf_bench(const char* preset, tf_bench_mode mode, int runs, uint64_t seed, tf_bench_result* result,
                   char** report) {
  return guarded([&] {
    require(preset, "preset is required");
    require(mode == TF_BENCH_DUAL || mode == TF_BENCH_FLAT || mode == TF_BENCH_BOTH, "unknown bench mode");
    const auto cfg = tunes::ModelConfig::preset(preset);
    const auto b = tunes::throughput_bench(cfg, static_cast<tunes::BenchMode>(mode), runs, seed);
    const auto f = tunes::flops_estimate(cfg);
    if (result) {
      *result = {b.dual_median, b.flat_median, b.ratio,  b.dual_params, b.flat_params,
                 b.flat.layers, b.flat.hidden, f.dual,   f.flat,        f.ratio};
    }
    tunes::GenReport r;
    r.tokens_per_second = mode == TF_BENCH_FLAT ? b.flat_median : b.dual_median;
    r.n_samples = static_cast<std::size_t>(runs);
    r.config_digest = cfg.digest();
    r.hardware = tunes::hardware_note();
    r.extra["mode"] = mode == TF_BENCH_DUAL ? "dual" : mode == TF_BENCH_FLAT ? "flat" : "both";
    r.extra["seed"] = std::to_string(seed);
    if (mode != TF_BENCH_FLAT) r.extra["dual_tokens_per_second"] = fmt(b.dual_median);
    if (mode != TF_BENCH_DUAL) {
      r.extra["flat_tokens_per_second"] = fmt(b.flat_median);
      r.extra["flat_params"] = std::to_string(b.flat_params);
      r.extra["flat_layers"] = std::to_string(b.flat.layers);
      r.extra["flat_hidden"] = std::to_string(b.flat.hidden);
    }
    if (mode == TF_BENCH_BOTH) r.extra["throughput_ratio"] = fmt(b.ratio);
    r.extra["dual_params"] = std::to_string(b.dual_params);
    r.extra["flops_dual"] = std::to_string(f.dual);
    r.extra["flops_flat"] = std::to_string(f.flat);
    r.extra["flops_ratio"] = fmt(f.ratio);
    set_string(report, r.to_text());
  });
}

tf_status tf_flops_estimate(uint64_t M, uint64_t N, uint64_t L, uint64_t P, uint64_t* dual, uint64_t* flat,
                            double* ratio) {
  return guarded([&] {
    const auto f = tunes::flops_estimate(M, N, L, P);
    if (dual) *dual = f.dual;
    if (flat) *flat = f.flat;
    if (ratio) *ratio = f.ratio;
  });
}

tf_status tf_extract_control_prefix(const char* abc, char** prefix) {
  return guarded([&] {
    require(abc && prefix, "abc and prefix are required");
    *prefix = dup_string(tunes::render_prefix(tunes::extract_control_codes(tunes::parse_tune(abc))));
  });
}

tf_status tf_edit_similarity(const char* a, const char* b, double* out) {
  return guarded([&] {
    require(a && b && out, "a, b and out are required");
    *out = tunes::eds(a, b);
  });
}

}  // extern "C"
