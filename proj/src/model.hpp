#pragma once

// Dual-decoder bar-patch transformer.
//
//   patches --(char embeddings, concat, linear)--> patch embeddings
//           --(patch decoder, causal over patches)--> patch features
//   feature_i, chars of patch i+1 --(char decoder, causal)--> char logits
//
// The char decoder stream for one patch is [feature, c_0, ..., c_{k-2}] and
// position t predicts c_t; the first PAD after the content is the in-patch
// stop symbol.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "patch.hpp"
#include "tensor.hpp"

namespace tunes {

struct ModelConfig {
  int max_len = 4096;
  int patch_size = 32;
  int patch_layers = 9;
  int char_layers = 3;
  int hidden = 768;
  int heads = 12;
  int ffn_mult = 4;
  int char_embed = 0;  // 0 means hidden / 4
  int vocab_size = Vocab::kSize;

  int max_patches() const { return max_len / patch_size; }
  int embed_width() const { return char_embed > 0 ? char_embed : hidden / 4; }

  void validate() const;
  std::string to_text() const;  // key=value lines
  static ModelConfig from_text(std::string_view text);
  std::string digest() const;   // 16 hex digits

  static ModelConfig paper();
  static ModelConfig toy();
  static ModelConfig micro();
  static ModelConfig preset(std::string_view name);  // "paper" | "toy" | "micro"

  bool operator==(const ModelConfig&) const = default;
};

enum class Owner { Patch, Char };

struct ParamCounts {
  std::uint64_t patch = 0;  // M
  std::uint64_t chars = 0;  // N
  std::uint64_t total() const { return patch + chars; }
};

// Score-matrix area (sum of len^2 per attention call) per decoder stack.
struct AttentionCounters {
  std::uint64_t patch_area = 0;
  std::uint64_t char_area = 0;
  void reset() { *this = {}; }
};

namespace nn {

template <typename T>
struct Block {
  Tensor<T> ln1_g, ln1_b;
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor<T> ln2_g, ln2_b;
  Tensor<T> w1, b1, w2, b2;
};

// Pre-norm transformer block: x + attn(ln1(x)), then x + ffn(ln2(x)).
template <typename T>
Tensor<T> block_forward(const Block<T>& b, const Tensor<T>& x, int heads, std::span<const std::size_t> segments,
                        std::uint64_t* score_area);

}  // namespace nn

// One char-decoder stream: the feature row it starts from and the character
// ids that follow it.
struct CharSegment {
  std::size_t feature_row = 0;
  std::vector<int> input_ids;
};

template <typename T>
class DualDecoderModel {
 public:
  DualDecoderModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::vector<nn::Parameter<T>>& parameters() { return params_; }
  const std::vector<nn::Parameter<T>>& parameters() const { return params_; }
  Owner owner(std::size_t param_index) const { return owners_.at(param_index); }
  ParamCounts count_params() const;

  AttentionCounters& counters() { return counters_; }
  const AttentionCounters& counters() const { return counters_; }

  // [patches.size(), hidden]; rows get positional embeddings first_pos, first_pos+1, ...
  nn::Tensor<T> embed_patches(std::span<const Patch> patches, int first_pos = 0);
  nn::Tensor<T> embed_patches(const PatchSequence& seq) { return embed_patches(seq.patches, 0); }

  // Causal patch decoder over independent row segments (one per sequence).
  nn::Tensor<T> patch_forward(const nn::Tensor<T>& embeddings, std::span<const std::size_t> segments);
  nn::Tensor<T> patch_forward(const nn::Tensor<T>& embeddings);

  // Logits for every position of every char stream, rows in segment order.
  nn::Tensor<T> char_logits(const nn::Tensor<T>& features, std::span<const CharSegment> segments);

  // [chars.size() + 1, vocab] logits for one feature row [1, hidden].
  nn::Tensor<T> char_forward(const nn::Tensor<T>& feature, std::span<const int> chars);

  // Mean per-character cross-entropy of next-patch prediction.
  nn::Tensor<T> next_patch_loss(const PatchSequence& seq);
  nn::Tensor<T> batch_loss(std::span<const PatchSequence* const> batch);

  // Runs both decoders over `num_patches` full patches with every feature
  // expanding a full P-character stream. Used for attention-cost accounting.
  void cost_probe(int num_patches);

  // Copies values from a model with the same config (any precision).
  template <typename U>
  void assign_from(const DualDecoderModel<U>& other) {
    if (!(other.config() == config_)) throw Error(Errc::InvalidArgument, "assign_from: config mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto src = other.parameters()[i].tensor.data();
      auto dst = params_[i].tensor.mutable_data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<T>(src[j]);
    }
  }

  // Named views of the parameter tensors (shared storage).
  struct Weights {
    nn::Tensor<T> char_embedding;
    nn::Tensor<T> patch_proj_w, patch_proj_b, patch_pos;
    std::vector<nn::Block<T>> patch_blocks;
    nn::Tensor<T> patch_ln_g, patch_ln_b;
    nn::Tensor<T> char_in_w, char_pos;
    std::vector<nn::Block<T>> char_blocks;
    nn::Tensor<T> char_ln_g, char_ln_b;
    nn::Tensor<T> head_w, head_b;
  };
  const Weights& weights() const { return w_; }

 private:
  ModelConfig config_;
  std::vector<nn::Parameter<T>> params_;
  std::vector<Owner> owners_;
  AttentionCounters counters_;
  Weights w_;
};

// Single causal character decoder; the (M+N) L^2 comparator.
struct FlatConfig {
  int max_len = 1024;
  int layers = 4;
  int hidden = 64;
  int heads = 4;
  int ffn_mult = 4;
  int vocab_size = Vocab::kSize;

  void validate() const;
  std::string to_text() const;
  std::uint64_t param_count() const;
};

template <typename T>
class FlatDecoderModel {
 public:
  FlatDecoderModel(const FlatConfig& config, std::uint64_t seed);

  const FlatConfig& config() const { return config_; }
  std::vector<nn::Parameter<T>>& parameters() { return params_; }
  const std::vector<nn::Parameter<T>>& parameters() const { return params_; }
  std::uint64_t param_count() const;

  std::uint64_t& score_area() { return score_area_; }

  // [ids.size(), vocab]
  nn::Tensor<T> logits(std::span<const int> ids);
  // ids = BOS, chars..., EOS; predicts ids[1..] from ids[..n-1].
  nn::Tensor<T> sequence_loss(std::span<const int> ids);
  // One causal pass over a length-`len` sequence.
  void cost_probe(int len);

  struct Weights {
    nn::Tensor<T> tok_emb, pos_emb;
    std::vector<nn::Block<T>> blocks;
    nn::Tensor<T> ln_g, ln_b, head_w, head_b;
  };
  const Weights& weights() const { return w_; }

 private:
  FlatConfig config_;
  std::vector<nn::Parameter<T>> params_;
  std::uint64_t score_area_ = 0;
  Weights w_;
};

// Analytic parameter count of a dual-decoder config (no allocation).
ParamCounts analytic_param_counts(const ModelConfig& config);

// Char ids of `text` wrapped in BOS ... EOS, for the flat decoder.
std::vector<int> flat_ids(std::string_view text, bool with_eos = true);

}  // namespace tunes
