#include "runtime.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace tunes {

namespace {

using RowVec = Eigen::Matrix<float, 1, Eigen::Dynamic>;
using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// out = x * W + b for one row; bias may be undefined.
void linear_row(std::span<const float> x, const nn::Tensor<float>& w, const nn::Tensor<float>* bias,
                std::span<float> out) {
  const auto k = static_cast<Eigen::Index>(w.dim(0));
  const auto n = static_cast<Eigen::Index>(w.dim(1));
  Eigen::Map<RowVec> y(out.data(), n);
  y.noalias() = Eigen::Map<const RowVec>(x.data(), k) * Eigen::Map<const MatR>(w.data().data(), k, n);
  if (bias && bias->defined()) y += Eigen::Map<const RowVec>(bias->data().data(), n);
}

void layer_norm_row(std::span<const float> x, const nn::Tensor<float>& g, const nn::Tensor<float>& b,
                    std::span<float> out) {
  const std::size_t h = x.size();
  float mean = 0;
  for (float v : x) mean += v;
  mean /= static_cast<float>(h);
  float var = 0;
  for (float v : x) var += (v - mean) * (v - mean);
  var /= static_cast<float>(h);
  const float rs = 1.0f / std::sqrt(var + static_cast<float>(nn::kLayerNormEps));
  auto gd = g.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < h; ++i) out[i] = (x[i] - mean) * rs * gd[i] + bd[i];
}

float gelu(float v) {
  constexpr float kC = 0.7978845608028654f;
  constexpr float kA = 0.044715f;
  return 0.5f * v * (1.0f + std::tanh(kC * (v + kA * v * v * v)));
}

void add_row(std::span<float> x, std::span<const float> y) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
}

std::span<const float> table_row(const nn::Tensor<float>& t, std::size_t r) {
  const std::size_t w = t.dim(1);
  return t.data().subspan(r * w, w);
}

}  // namespace

StackRunner::StackRunner(const std::vector<nn::Block<float>>& blocks, const nn::Tensor<float>& ln_g,
                         const nn::Tensor<float>& ln_b, int heads, int hidden, int capacity)
    : blocks_(blocks), ln_g_(ln_g), ln_b_(ln_b), heads_(heads), hidden_(hidden), capacity_(capacity) {
  const std::size_t h = static_cast<std::size_t>(hidden);
  k_.assign(blocks.size(), std::vector<float>(static_cast<std::size_t>(capacity) * h));
  v_.assign(blocks.size(), std::vector<float>(static_cast<std::size_t>(capacity) * h));
  x_.resize(h);
  a_.resize(h);
  q_.resize(h);
  att_.resize(h);
  ffn_.resize(blocks.empty() ? 0 : blocks[0].w1.dim(1));
  scores_.resize(static_cast<std::size_t>(capacity));
}

void StackRunner::step(std::span<const float> x, std::span<float> out) {
  if (len_ >= capacity_) {
    throw Error(Errc::TooManyPatches, "decoder cache full at " + std::to_string(capacity_) + " positions");
  }
  const std::size_t h = static_cast<std::size_t>(hidden_);
  const std::size_t hd = h / static_cast<std::size_t>(heads_);
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  const std::size_t pos = static_cast<std::size_t>(len_);
  std::copy(x.begin(), x.end(), x_.begin());

  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& b = blocks_[l];
    float* kc = k_[l].data();
    float* vc = v_[l].data();
    layer_norm_row(x_, b.ln1_g, b.ln1_b, a_);
    linear_row(a_, b.wq, &b.bq, q_);
    linear_row(a_, b.wk, &b.bk, std::span<float>(kc + pos * h, h));
    linear_row(a_, b.wv, &b.bv, std::span<float>(vc + pos * h, h));
    std::fill(att_.begin(), att_.end(), 0.0f);
    for (int hh = 0; hh < heads_; ++hh) {
      const std::size_t col = static_cast<std::size_t>(hh) * hd;
      float mx = -std::numeric_limits<float>::infinity();
      for (std::size_t j = 0; j <= pos; ++j) {
        float dot = 0;
        const float* kj = kc + j * h + col;
        for (std::size_t c = 0; c < hd; ++c) dot += q_[col + c] * kj[c];
        scores_[j] = dot * scale;
        mx = std::max(mx, scores_[j]);
      }
      float denom = 0;
      for (std::size_t j = 0; j <= pos; ++j) denom += (scores_[j] = std::exp(scores_[j] - mx));
      for (std::size_t j = 0; j <= pos; ++j) {
        const float p = scores_[j] / denom;
        const float* vj = vc + j * h + col;
        for (std::size_t c = 0; c < hd; ++c) att_[col + c] += p * vj[c];
      }
    }
    linear_row(att_, b.wo, &b.bo, a_);
    add_row(x_, a_);
    layer_norm_row(x_, b.ln2_g, b.ln2_b, a_);
    linear_row(a_, b.w1, &b.b1, ffn_);
    for (float& v : ffn_) v = gelu(v);
    linear_row(ffn_, b.w2, &b.b2, a_);
    add_row(x_, a_);
  }
  layer_norm_row(x_, ln_g_, ln_b_, out);
  ++len_;
}

DualRuntime::DualRuntime(const DualDecoderModel<float>& model)
    : model_(model),
      patch_(model.weights().patch_blocks, model.weights().patch_ln_g, model.weights().patch_ln_b,
             model.config().heads, model.config().hidden, model.config().max_patches()),
      chars_(model.weights().char_blocks, model.weights().char_ln_g, model.weights().char_ln_b, model.config().heads,
             model.config().hidden, model.config().patch_size + 1) {
  const auto& c = model.config();
  const std::size_t h = static_cast<std::size_t>(c.hidden);
  flat_.resize(static_cast<std::size_t>(c.patch_size * c.embed_width()));
  row_.resize(h);
  feature_.resize(h);
  hidden_out_.resize(h);
  logits_.resize(static_cast<std::size_t>(c.vocab_size));
}

void DualRuntime::reset() {
  patch_.reset();
  chars_.reset();
}

std::span<const float> DualRuntime::push_patch(const Patch& patch) {
  const auto& c = model_.config();
  const auto& w = model_.weights();
  const std::size_t P = static_cast<std::size_t>(c.patch_size);
  const std::size_t e = static_cast<std::size_t>(c.embed_width());
  if (patch.ids.size() != P) throw Error(Errc::ShapeMismatch, "patch width differs from the model's");
  if (patch_.length() >= patch_.capacity()) {
    throw Error(Errc::TooManyPatches, "patch budget of " + std::to_string(patch_.capacity()) + " reached");
  }
  for (std::size_t i = 0; i < P; ++i) {
    auto src = table_row(w.char_embedding, static_cast<std::size_t>(patch.ids[i]));
    std::copy(src.begin(), src.end(), flat_.begin() + static_cast<std::ptrdiff_t>(i * e));
  }
  linear_row(flat_, w.patch_proj_w, &w.patch_proj_b, row_);
  add_row(row_, table_row(w.patch_pos, static_cast<std::size_t>(patch_.length())));
  patch_.step(row_, feature_);
  return feature_;
}

std::span<const float> DualRuntime::char_step(std::span<const float> row) {
  const auto& w = model_.weights();
  chars_.step(row, hidden_out_);
  linear_row(hidden_out_, w.head_w, &w.head_b, logits_);
  return logits_;
}

std::span<const float> DualRuntime::start_chars(std::span<const float> feature) {
  chars_.reset();
  std::copy(feature.begin(), feature.end(), row_.begin());
  add_row(row_, table_row(model_.weights().char_pos, 0));
  return char_step(row_);
}

std::span<const float> DualRuntime::push_char(int id) {
  const auto& w = model_.weights();
  if (chars_.length() > model_.config().patch_size) {
    throw Error(Errc::PatchTooLong, "char stream already holds P characters");
  }
  linear_row(table_row(w.char_embedding, static_cast<std::size_t>(id)), w.char_in_w, nullptr, row_);
  add_row(row_, table_row(w.char_pos, static_cast<std::size_t>(chars_.length())));
  return char_step(row_);
}

FlatRuntime::FlatRuntime(const FlatDecoderModel<float>& model)
    : model_(model),
      stack_(model.weights().blocks, model.weights().ln_g, model.weights().ln_b, model.config().heads,
             model.config().hidden, model.config().max_len) {
  const std::size_t h = static_cast<std::size_t>(model.config().hidden);
  row_.resize(h);
  hidden_out_.resize(h);
  logits_.resize(static_cast<std::size_t>(model.config().vocab_size));
}

std::span<const float> FlatRuntime::push(int id) {
  const auto& w = model_.weights();
  auto emb = table_row(w.tok_emb, static_cast<std::size_t>(id));
  std::copy(emb.begin(), emb.end(), row_.begin());
  add_row(row_, table_row(w.pos_emb, static_cast<std::size_t>(stack_.length())));
  stack_.step(row_, hidden_out_);
  linear_row(hidden_out_, w.head_w, &w.head_b, logits_);
  return logits_;
}

}  // namespace tunes
