#pragma once

// Patch-by-patch sampling. Each new patch is expanded character by character
// from the feature of the previous patch until the stop symbol (PAD) or P
// characters; an EOS drawn at the start of a patch ends the tune.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "control.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace tunes {

struct SampleOptions {
  double temperature = 1.0;
  double top_p = 0.95;
  int max_patches = 0;  // total patches including BOS and prompt; 0 = model capacity
  std::uint64_t seed = 0;
  bool greedy = false;
  bool fill_budget = false;  // never stop early (throughput runs)

  void validate() const;
};

struct Sample {
  std::string text;  // starts with the prompt verbatim
  int prompt_patches = 0;
  int new_patches = 0;
  std::size_t new_chars = 0;  // characters emitted, specials excluded
  bool ended = false;          // an EOS patch was drawn
  bool budget_exhausted = false;
};

// Ids kept by nucleus filtering: the shortest prefix of ids sorted by
// descending probability (ties by id) whose mass reaches p. Masked ids carry
// probability 0 and are never kept.
std::vector<int> top_p_keep(std::span<const double> probs, double p);

// Draws one id from `logits` restricted to `allowed`.
int pick_token(std::span<const float> logits, std::span<const bool> allowed, const SampleOptions& opts, Rng& rng);

// The prompt is a control prefix, optionally followed by header lines and
// bars. Throws InvalidPrompt if the prefix does not parse or a prompt unit
// does not fit in a patch.
Sample sample(const DualDecoderModel<float>& model, std::string_view prompt, const SampleOptions& opts);

// Character-level sampling with the flat decoder; the same sampler and masks
// apart from the patch structure.
Sample sample_flat(const FlatDecoderModel<float>& model, std::string_view prompt, const SampleOptions& opts);

struct CodeDelta {
  std::string code;  // "S", "B2", "E3.1" ...
  int requested = -1;  // -1 when absent
  int actual = -1;
};

struct FormDiff {
  bool match = false;
  bool extraction_failed = false;
  std::string error;
  double similarity = 0.0;  // eds of the rendered prefixes; 0 when extraction failed
  ControlCodes extracted;
  std::vector<CodeDelta> deltas;
};

// Extracts the form of `generated` (a leading control prefix is ignored) and
// compares it with the requested codes.
FormDiff check_form(std::string_view generated, const ControlCodes& requested);

}  // namespace tunes
