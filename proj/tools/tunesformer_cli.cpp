// Command-line front end. Talks to the library only through tunesformer.h.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tunesformer.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct Failure {
  int code;
  std::string message;
};

std::string data_dir() {
  const char* env = std::getenv("TUNESFORMER_DATA");
  return env && *env ? env : ".";
}

std::string in_data(const std::string& name) { return (std::filesystem::path(data_dir()) / name).string(); }

// Library strings are released when this goes out of scope.
struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { tf_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Model {
  tf_model* p = nullptr;
  ~Model() { tf_model_free(p); }
};

void check(tf_status s) {
  if (s == TF_OK) return;
  const int code = s == TF_ERR_INVALID_ARGUMENT ? kExitUsage : kExitData;
  throw Failure{code, tf_last_error()};
}

std::string digest_of(const tf_model* m) {
  char buf[17];
  check(tf_model_config_digest(m, buf, sizeof buf));
  return buf;
}

std::string fnv_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitData, "cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Failure{kExitData, "cannot write " + tmp};
    out << text;
    if (!out) throw Failure{kExitData, "short write to " + tmp};
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Failure{kExitData, "cannot rename " + tmp + " to " + path};
  }
}

void require_parent_dir(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw Failure{kExitData, "output directory does not exist: " + parent.string()};
  }
}

void print_kv(const std::string& text, std::ostream& os) {
  std::size_t width = 0;
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    rows.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    width = std::max(width, eq);
  }
  for (const auto& [k, v] : rows) os << "  " << k << std::string(width - k.size() + 2, ' ') << v << "\n";
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
  std::vector<std::string> inputs;
  std::string out = in_data("corpus.tsv");
  double val_frac = 0.01;
  std::uint64_t seed = 0;
};

void run_preprocess(const PreprocessArgs& a) {
  for (const auto& p : a.inputs) {
    if (!std::filesystem::is_regular_file(p)) throw Failure{kExitData, "input file not found: " + p};
  }
  require_parent_dir(a.out);
  std::vector<const char*> paths;
  for (const auto& p : a.inputs) paths.push_back(p.c_str());
  tf_corpus_counts c{};
  OwnedString skips;
  check(tf_preprocess(paths.data(), paths.size(), a.out.c_str(), a.val_frac, a.seed, &c, &skips.p));
  char frac[32];
  std::snprintf(frac, sizeof frac, "%.17g", a.val_frac);
  std::cout << "seed=" << a.seed << "\n"
            << "config_digest=" << fnv_hex(std::string("val_frac=") + frac + ";keep=KLMX;P=32;max_patches=128")
            << "\n"
            << "input=" << c.input << " accepted=" << c.accepted << " skipped=" << c.skipped << "\n"
            << "train=" << c.train << " -> " << a.out << "\n"
            << "validation=" << c.validation << " -> " << a.out << ".val\n";
  const std::string report = skips.str();
  if (!report.empty()) {
    std::cout << "skip reasons:\n";
    print_kv(report, std::cout);
  }
}

struct TrainArgs {
  std::string corpus = in_data("corpus.tsv");
  std::string val;
  bool no_val = false;
  std::string preset = "toy";
  int steps = 500;
  int batch = 8;
  double lr = 1e-3;
  int warmup = 100;
  std::uint64_t seed = 0;
  int eval_every = 100;
  int log_every = 50;
  std::string resume;
  std::string out = in_data("model.ckpt");
};

void on_train_step(int step, double loss, double val_loss, void* user) {
  const int every = *static_cast<int*>(user);
  if (!std::isnan(val_loss)) {
    std::printf("step %d loss %.6f val %.6f\n", step, loss, val_loss);
  } else if (every > 0 && (step % every == 0 || step == 1)) {
    std::printf("step %d loss %.6f\n", step, loss);
  }
  std::fflush(stdout);
}

void run_train(TrainArgs a) {
  if (!std::filesystem::is_regular_file(a.corpus)) throw Failure{kExitData, "corpus not found: " + a.corpus};
  if (!a.resume.empty() && !std::filesystem::is_regular_file(a.resume)) {
    throw Failure{kExitData, "state file not found: " + a.resume};
  }
  if (a.val.empty() && !a.no_val && std::filesystem::is_regular_file(a.corpus + ".val") &&
      std::filesystem::file_size(a.corpus + ".val") > 0) {
    a.val = a.corpus + ".val";
  }
  require_parent_dir(a.out);
  Model m;
  check(tf_model_create(a.preset.c_str(), a.seed, &m.p));
  std::uint64_t M = 0, N = 0;
  check(tf_model_param_counts(m.p, &M, &N));
  std::cout << "seed=" << a.seed << "\nconfig_digest=" << digest_of(m.p) << "\npreset=" << a.preset << " M=" << M
            << " N=" << N << "\n";
  std::cout.flush();

  tf_train_options o;
  tf_train_options_default(&o);
  o.steps = a.steps;
  o.batch = a.batch;
  o.lr = a.lr;
  o.warmup = a.warmup;
  o.seed = a.seed;
  o.eval_every = a.eval_every;
  o.resume_state = a.resume.empty() ? nullptr : a.resume.c_str();
  tf_train_result r{};
  check(tf_train(m.p, a.corpus.c_str(), a.val.empty() ? nullptr : a.val.c_str(), &o, a.out.c_str(), on_train_step,
                 &a.log_every, &r));
  std::printf("steps=%d final_loss=%.6f", r.steps, r.final_loss);
  if (!std::isnan(r.best_val)) std::printf(" best_val=%.6f", r.best_val);
  std::printf("\nrecords=%zu dropped=%zu\ncheckpoint=%s\nstate=%s.state\n", r.train_records, r.dropped_records,
              a.out.c_str(), a.out.c_str());
}

struct SampleArgs {
  double temperature = 1.0;
  double top_p = 0.95;
  int max_patches = 0;
  std::uint64_t seed = 0;
  bool greedy = false;

  tf_sample_options options() const {
    tf_sample_options o;
    tf_sample_options_default(&o);
    o.temperature = temperature;
    o.top_p = top_p;
    o.max_patches = max_patches;
    o.seed = seed;
    o.greedy = greedy ? 1 : 0;
    return o;
  }
};

void add_sample_flags(CLI::App* app, SampleArgs& s) {
  app->add_option("--temperature", s.temperature, "Sampling temperature (> 0)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--top-p", s.top_p, "Nucleus mass in (0, 1]")->capture_default_str()->check(CLI::Range(1e-12, 1.0));
  app->add_option("--max-patches", s.max_patches, "Patch budget including the prompt; 0 = model capacity")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app->add_option("--seed", s.seed, "Sampling seed")->capture_default_str();
  app->add_flag("--greedy", s.greedy, "Argmax decoding");
}

struct GenerateArgs {
  std::string ckpt = in_data("model.ckpt");
  std::string prompt;
  std::string out;
  SampleArgs sample;
};

void run_generate(const GenerateArgs& a) {
  const std::string prompt = read_text(a.prompt);
  if (!a.out.empty()) require_parent_dir(a.out);
  Model m;
  check(tf_model_load(a.ckpt.c_str(), &m.p));
  std::cerr << "seed=" << a.sample.seed << "\nconfig_digest=" << digest_of(m.p) << "\n";
  const tf_sample_options o = a.sample.options();
  OwnedString text, meta;
  tf_sample_info info{};
  check(tf_generate(m.p, prompt.c_str(), &o, &text.p, &info, &meta.p));
  if (a.out.empty()) {
    std::cout << text.str();
    std::cerr << meta.str();
  } else {
    write_text_atomic(a.out + ".meta", meta.str());
    write_text_atomic(a.out, text.str());
    std::cout << "wrote " << a.out << " (" << info.new_patches << " patches, " << info.new_chars
              << " chars), metadata " << a.out << ".meta\n";
    std::printf("form_match=%d form_similarity=%.4f\n", info.form_match, info.form_similarity);
  }
}

struct EvalArgs {
  std::string ckpt = in_data("model.ckpt");
  std::string metric;
  int n = 1000;
  std::string corpus;
  int threads = 1;
  std::string report;
  SampleArgs sample;
};

void run_eval(const EvalArgs& a) {
  if (a.n <= 0) throw Failure{kExitUsage, "--n must be at least 1"};
  std::string corpus = a.corpus;
  if (corpus.empty() && a.metric == "controllability") corpus = in_data("corpus.tsv");
  if (!corpus.empty() && !std::filesystem::is_regular_file(corpus)) {
    throw Failure{kExitData, "corpus not found: " + corpus};
  }
  if (!a.report.empty()) require_parent_dir(a.report);
  Model m;
  check(tf_model_load(a.ckpt.c_str(), &m.p));
  std::cout << "seed=" << a.sample.seed << "\nconfig_digest=" << digest_of(m.p) << "\n";
  const tf_sample_options o = a.sample.options();
  tf_eval_result r{};
  OwnedString report;
  if (a.metric == "controllability") {
    check(tf_eval_controllability(m.p, corpus.c_str(), static_cast<size_t>(a.n), &o, a.threads, &r, &report.p));
  } else {
    check(tf_eval_efficiency(m.p, corpus.empty() ? nullptr : corpus.c_str(), static_cast<size_t>(a.n), &o, &r,
                             &report.p));
  }
  print_kv(report.str(), std::cout);
  if (!a.report.empty()) write_text_atomic(a.report, report.str());
}

struct BenchArgs {
  std::string preset = "toy";
  std::string mode = "both";
  int runs = 5;
  std::uint64_t seed = 0;
  std::string report;
};

void run_bench(const BenchArgs& a) {
  if (!a.report.empty()) require_parent_dir(a.report);
  const tf_bench_mode mode = a.mode == "dual" ? TF_BENCH_DUAL : a.mode == "flat" ? TF_BENCH_FLAT : TF_BENCH_BOTH;
  tf_bench_result r{};
  OwnedString report;
  check(tf_bench(a.preset.c_str(), mode, a.runs, a.seed, &r, &report.p));
  print_kv(report.str(), std::cout);
  if (!a.report.empty()) write_text_atomic(a.report, report.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bar-patch dual-decoder melody toolkit: preprocess, train, generate, eval, bench.\n"
               "Default paths live in $TUNESFORMER_DATA (or the working directory)."};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tf_version()));

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Build a corpus file from .abc sources");
  c_pre->add_option("--in", pre.inputs, "Input .abc files")->required();
  c_pre->add_option("--out", pre.out, "Training corpus; validation goes to <out>.val")->capture_default_str();
  c_pre->add_option("--val-frac", pre.val_frac, "Validation fraction in [0, 1)")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.999999));
  c_pre->add_option("--seed", pre.seed, "Split seed")->capture_default_str();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train a model on a corpus file");
  c_tr->add_option("--corpus", tr.corpus, "Training corpus")->capture_default_str();
  c_tr->add_option("--val", tr.val, "Validation corpus (default: <corpus>.val when non-empty)");
  c_tr->add_flag("--no-val", tr.no_val, "Skip validation");
  c_tr->add_option("--preset", tr.preset, "Model preset")
      ->capture_default_str()
      ->check(CLI::IsMember({"toy", "paper", "micro"}));
  c_tr->add_option("--steps", tr.steps, "Optimizer steps")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_tr->add_option("--batch", tr.batch, "Tunes per step")->capture_default_str()->check(CLI::PositiveNumber);
  c_tr->add_option("--lr", tr.lr, "Peak learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  c_tr->add_option("--warmup", tr.warmup, "Linear warmup steps")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_tr->add_option("--seed", tr.seed, "Initialization and batch-order seed")->capture_default_str();
  c_tr->add_option("--eval-every", tr.eval_every, "Validation interval in steps (0: only at the end)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  c_tr->add_option("--log-every", tr.log_every, "Loss print interval")->capture_default_str();
  c_tr->add_option("--resume", tr.resume, "Continue from a <ckpt>.state file");
  c_tr->add_option("--out", tr.out, "Checkpoint path; state goes to <out>.state")->capture_default_str();

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Sample a tune from a control-code prompt");
  c_gen->add_option("--ckpt", gen.ckpt, "Checkpoint")->capture_default_str();
  c_gen->add_option("--prompt", gen.prompt, "Prompt file: control prefix, then optional ABC lines")
      ->required()
      ->check(CLI::ExistingFile);
  c_gen->add_option("--out", gen.out, "Output file (metadata to <out>.meta); stdout when omitted");
  add_sample_flags(c_gen, gen.sample);

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Measure controllability or efficiency");
  c_ev->add_option("--ckpt", ev.ckpt, "Checkpoint")->capture_default_str();
  c_ev->add_option("--metric", ev.metric, "controllability | efficiency")
      ->required()
      ->check(CLI::IsMember({"controllability", "efficiency"}));
  c_ev->add_option("--n", ev.n, "Number of generated tunes")->capture_default_str();
  c_ev->add_option("--corpus", ev.corpus, "Corpus the control prefixes are drawn from");
  c_ev->add_option("--threads", ev.threads, "Parallel generations (controllability only)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_ev->add_option("--report", ev.report, "Write the key=value report here");
  add_sample_flags(c_ev, ev.sample);

  BenchArgs be;
  auto* c_be = app.add_subcommand("bench", "Generation throughput of a preset against its flat baseline");
  c_be->add_option("--preset", be.preset, "Model preset")
      ->capture_default_str()
      ->check(CLI::IsMember({"toy", "paper", "micro"}));
  c_be->add_option("--mode", be.mode, "dual | flat | both")
      ->capture_default_str()
      ->check(CLI::IsMember({"dual", "flat", "both"}));
  c_be->add_option("--runs", be.runs, "Timed runs per model (median reported)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_be->add_option("--seed", be.seed, "Initialization and sampling seed")->capture_default_str();
  c_be->add_option("--report", be.report, "Write the key=value report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*c_pre) run_preprocess(pre);
    if (*c_tr) run_train(tr);
    if (*c_gen) run_generate(gen);
    if (*c_ev) run_eval(ev);
    if (*c_be) run_bench(be);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  }
  return 0;
}
