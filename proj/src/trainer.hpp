#pragma once

// Corpus construction and training.
//
// Corpus files hold one record per line: id TAB prefixed_text TAB patch_count,
// with backslash, newline and tab in the text escaped as \\, \n and \t.
// build_corpus() writes training records to `out` and validation records to
// `out + ".val"`.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "abc.hpp"
#include "checkpoint.hpp"
#include "model.hpp"
#include "patch.hpp"

namespace tunes {

struct CorpusRecord {
  std::string id;
  std::string prefixed_text;
  int patch_count = 0;

  bool operator==(const CorpusRecord&) const = default;
};

struct SourceTune {
  std::string id;
  std::string text;
};

struct CorpusOptions {
  double val_fraction = 0.01;
  std::uint64_t seed = 0;
  std::set<char> keep = structural_tags();
  int patch_size = kDefaultPatchSize;
  int max_patches = kDefaultMaxPatches;
};

struct CorpusCounts {
  std::size_t input = 0;
  std::size_t accepted = 0;
  std::size_t train = 0;
  std::size_t validation = 0;
  std::map<std::string, std::size_t> skipped;  // reason -> count

  std::size_t skipped_total() const;
};

struct CorpusSplit {
  std::vector<CorpusRecord> train;
  std::vector<CorpusRecord> validation;
  CorpusCounts counts;
};

// parse -> strip_fields -> extract codes -> prefix + serialize -> encode check.
// Throws the error that disqualifies the tune.
CorpusRecord prepare_record(const SourceTune& tune, const CorpusOptions& opts);

// Tunes of every file, ids "<file name>:<ordinal>" (1-based).
std::vector<SourceTune> read_sources(const std::vector<std::string>& paths);

CorpusSplit build_corpus_records(const std::vector<SourceTune>& tunes, const CorpusOptions& opts);
CorpusCounts build_corpus(const std::vector<std::string>& input_paths, const std::string& out_path,
                          const CorpusOptions& opts);

std::string escape_text(std::string_view text);
std::string unescape_text(std::string_view text);
std::string format_corpus(const std::vector<CorpusRecord>& records);
std::vector<CorpusRecord> parse_corpus(std::string_view text);
void write_corpus(const std::string& path, const std::vector<CorpusRecord>& records);
std::vector<CorpusRecord> read_corpus(const std::string& path);

struct TrainOptions {
  int batch = 8;
  double lr = 1e-3;
  int warmup = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  int eval_every = 100;  // 0 disables periodic validation
};

struct StepLog {
  int step = 0;  // 1-based count of completed steps
  double loss = 0;
  double lr = 0;
  std::optional<double> val_loss;
};

class Trainer {
 public:
  // Records that do not fit the model's patch budget are left out and counted.
  Trainer(DualDecoderModel<float>& model, const std::vector<CorpusRecord>& train,
          const std::vector<CorpusRecord>& validation, TrainOptions opts);

  int step() const { return step_; }
  std::size_t train_size() const { return train_.size(); }
  std::size_t dropped() const { return dropped_; }
  double best_val() const { return best_val_; }
  const TrainOptions& options() const { return opts_; }

  // Record indices of the batch taken at `step` (0-based).
  std::vector<std::size_t> batch_indices(int step);

  // One optimizer step; returns the batch loss before the update.
  double train_step();

  // Character-weighted mean loss over the validation set, without gradients.
  double validation_loss();

  // Runs `steps` more steps. When a validation set exists the model is
  // evaluated every eval_every steps and at the end; `on_best` fires on every
  // new best validation loss.
  std::vector<StepLog> run(int steps, const std::function<void(const StepLog&)>& on_step = {},
                           const std::function<void()>& on_best = {});

  // Model weights, optimizer moments and counters in one container.
  Container state() const;
  void restore(const Container& state);

 private:
  const std::vector<std::size_t>& epoch_order(std::uint64_t epoch);
  double current_lr() const;

  DualDecoderModel<float>& model_;
  TrainOptions opts_;
  std::vector<PatchSequence> train_, val_;
  std::vector<std::string> train_ids_;
  std::size_t dropped_ = 0;
  std::vector<std::vector<float>> m_, v_;
  int step_ = 0;
  double best_val_ = 0;
  bool have_best_ = false;
  std::uint64_t cached_epoch_ = ~0ULL;
  std::vector<std::size_t> order_;
};

// Character targets the loss averages over (content plus stop per patch).
std::size_t target_count(const PatchSequence& seq);

}  // namespace tunes
