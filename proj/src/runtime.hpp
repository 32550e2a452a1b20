#pragma once

// Float inference without graph recording: decoder stacks advanced one row at
// a time against per-layer key/value caches. Reads weights from a model
// without copying; the model must outlive the runtime and stay unmodified.

#include <span>
#include <vector>

#include "model.hpp"

namespace tunes {

class StackRunner {
 public:
  StackRunner(const std::vector<nn::Block<float>>& blocks, const nn::Tensor<float>& ln_g,
              const nn::Tensor<float>& ln_b, int heads, int hidden, int capacity);

  void reset() { len_ = 0; }
  int length() const { return len_; }
  int capacity() const { return capacity_; }

  // Appends one input row; `out` receives the final-norm output row.
  void step(std::span<const float> x, std::span<float> out);

 private:
  const std::vector<nn::Block<float>>& blocks_;
  const nn::Tensor<float>& ln_g_;
  const nn::Tensor<float>& ln_b_;
  int heads_, hidden_, capacity_;
  int len_ = 0;
  std::vector<std::vector<float>> k_, v_;  // per layer, [capacity, hidden]
  std::vector<float> x_, a_, q_, att_, ffn_, scores_;
};

class DualRuntime {
 public:
  explicit DualRuntime(const DualDecoderModel<float>& model);

  const ModelConfig& config() const { return model_.config(); }
  void reset();
  int patches() const { return patch_.length(); }

  // Feeds the next patch to the patch decoder and returns its feature.
  std::span<const float> push_patch(const Patch& patch);

  // Starts a char stream from `feature`; returns logits for in-patch index 0.
  std::span<const float> start_chars(std::span<const float> feature);
  // Appends a char to the stream; returns logits for the following index.
  std::span<const float> push_char(int id);
  int chars() const { return chars_.length() - 1; }

 private:
  std::span<const float> char_step(std::span<const float> row);

  const DualDecoderModel<float>& model_;
  StackRunner patch_, chars_;
  std::vector<float> flat_, row_, feature_, hidden_out_, logits_;
};

class FlatRuntime {
 public:
  explicit FlatRuntime(const FlatDecoderModel<float>& model);

  void reset() { stack_.reset(); }
  int length() const { return stack_.length(); }
  std::span<const float> push(int id);

 private:
  const FlatDecoderModel<float>& model_;
  StackRunner stack_;
  std::vector<float> row_, hidden_out_, logits_;
};

}  // namespace tunes
