#include "model.hpp"

#include <charconv>
#include <cstdio>
#include <map>

#include "rng.hpp"

namespace tunes {

namespace {

constexpr double kInitStd = 0.02;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t block_param_count(std::uint64_t h, std::uint64_t ffn_mult) {
  const std::uint64_t f = ffn_mult * h;
  return 4 * h                 // two layer norms
         + 4 * h * h + 4 * h   // q, k, v, o
         + h * f + f + f * h + h;
}

template <typename T>
class Registry {
 public:
  Registry(std::vector<nn::Parameter<T>>& params, std::vector<Owner>* owners, std::uint64_t seed)
      : params_(params), owners_(owners), rng_(seed) {}

  void set_owner(Owner o) { owner_ = o; }

  nn::Tensor<T> normal(const std::string& name, nn::Shape shape) {
    std::vector<T> data(nn::shape_size(shape));
    for (auto& v : data) v = static_cast<T>(rng_.normal() * kInitStd);
    return add(name, std::move(shape), std::move(data));
  }

  nn::Tensor<T> constant(const std::string& name, nn::Shape shape, T value) {
    std::vector<T> data(nn::shape_size(shape), value);
    return add(name, std::move(shape), std::move(data));
  }

  nn::Block<T> block(const std::string& prefix, int hidden, int ffn_mult) {
    const std::size_t h = static_cast<std::size_t>(hidden);
    const std::size_t f = h * static_cast<std::size_t>(ffn_mult);
    nn::Block<T> b;
    b.ln1_g = constant(prefix + ".ln1.g", {h}, T(1));
    b.ln1_b = constant(prefix + ".ln1.b", {h}, T(0));
    b.wq = normal(prefix + ".attn.wq", {h, h});
    b.bq = constant(prefix + ".attn.bq", {h}, T(0));
    b.wk = normal(prefix + ".attn.wk", {h, h});
    b.bk = constant(prefix + ".attn.bk", {h}, T(0));
    b.wv = normal(prefix + ".attn.wv", {h, h});
    b.bv = constant(prefix + ".attn.bv", {h}, T(0));
    b.wo = normal(prefix + ".attn.wo", {h, h});
    b.bo = constant(prefix + ".attn.bo", {h}, T(0));
    b.ln2_g = constant(prefix + ".ln2.g", {h}, T(1));
    b.ln2_b = constant(prefix + ".ln2.b", {h}, T(0));
    b.w1 = normal(prefix + ".ffn.w1", {h, f});
    b.b1 = constant(prefix + ".ffn.b1", {f}, T(0));
    b.w2 = normal(prefix + ".ffn.w2", {f, h});
    b.b2 = constant(prefix + ".ffn.b2", {h}, T(0));
    return b;
  }

 private:
  nn::Tensor<T> add(const std::string& name, nn::Shape shape, std::vector<T> data) {
    auto t = nn::Tensor<T>::from(std::move(shape), std::move(data), true);
    params_.push_back({name, t});
    if (owners_) owners_->push_back(owner_);
    return t;
  }

  std::vector<nn::Parameter<T>>& params_;
  std::vector<Owner>* owners_;
  Rng rng_;
  Owner owner_ = Owner::Patch;
};

std::vector<std::size_t> single_segment(std::size_t n) { return {n}; }

}  // namespace

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidArgument, "model config: " + what); };
  if (max_len <= 0 || patch_size <= 0 || patch_layers <= 0 || char_layers <= 0 || hidden <= 0 || heads <= 0 ||
      ffn_mult <= 0 || vocab_size <= 0 || char_embed < 0) {
    fail("all sizes must be positive");
  }
  if (max_len % patch_size != 0) fail("max_len must be a multiple of patch_size");
  if (hidden % heads != 0) fail("hidden must be divisible by heads");
  if (embed_width() <= 0) fail("char embedding width must be positive");
  if (vocab_size != Vocab::kSize) fail("vocab_size must be " + std::to_string(Vocab::kSize));
}

std::string ModelConfig::to_text() const {
  std::string s;
  auto kv = [&](const char* k, int v) { s += std::string(k) + "=" + std::to_string(v) + "\n"; };
  kv("max_len", max_len);
  kv("patch_size", patch_size);
  kv("patch_layers", patch_layers);
  kv("char_layers", char_layers);
  kv("hidden", hidden);
  kv("heads", heads);
  kv("ffn_mult", ffn_mult);
  kv("char_embed", char_embed);
  kv("vocab_size", vocab_size);
  return s;
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  ModelConfig c;
  std::map<std::string, int*, std::less<>> slots{
      {"max_len", &c.max_len},       {"patch_size", &c.patch_size}, {"patch_layers", &c.patch_layers},
      {"char_layers", &c.char_layers}, {"hidden", &c.hidden},       {"heads", &c.heads},
      {"ffn_mult", &c.ffn_mult},     {"char_embed", &c.char_embed}, {"vocab_size", &c.vocab_size},
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(Errc::InvalidArgument, "config line without '=': " + std::string(line));
    auto it = slots.find(line.substr(0, eq));
    if (it == slots.end()) continue;  // foreign keys belong to the container
    std::string_view val = line.substr(eq + 1);
    int v = 0;
    auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
    if (ec != std::errc() || ptr != val.data() + val.size()) {
      throw Error(Errc::InvalidArgument, "bad config value: " + std::string(line));
    }
    *it->second = v;
  }
  c.validate();
  return c;
}

std::string ModelConfig::digest() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_text())));
  return buf;
}

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.char_embed = c.hidden / 4;
  return c;
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.max_len = 1024;
  c.patch_size = 32;
  c.patch_layers = 3;
  c.char_layers = 1;
  c.hidden = 64;
  c.heads = 4;
  c.char_embed = 16;
  return c;
}

ModelConfig ModelConfig::micro() {
  ModelConfig c;
  c.max_len = 32;
  c.patch_size = 4;
  c.patch_layers = 1;
  c.char_layers = 1;
  c.hidden = 8;
  c.heads = 2;
  c.char_embed = 2;
  return c;
}

ModelConfig ModelConfig::preset(std::string_view name) {
  if (name == "paper") return paper();
  if (name == "toy") return toy();
  if (name == "micro") return micro();
  throw Error(Errc::InvalidArgument, "unknown preset '" + std::string(name) + "' (paper|toy|micro)");
}

ParamCounts analytic_param_counts(const ModelConfig& c) {
  c.validate();
  const std::uint64_t h = static_cast<std::uint64_t>(c.hidden);
  const std::uint64_t e = static_cast<std::uint64_t>(c.embed_width());
  const std::uint64_t P = static_cast<std::uint64_t>(c.patch_size);
  const std::uint64_t V = static_cast<std::uint64_t>(c.vocab_size);
  const std::uint64_t blk = block_param_count(h, static_cast<std::uint64_t>(c.ffn_mult));
  ParamCounts out;
  out.patch = (P * e * h + h)                                    // patch projection
              + static_cast<std::uint64_t>(c.max_patches()) * h  // patch positions
              + static_cast<std::uint64_t>(c.patch_layers) * blk + 2 * h;
  out.chars = V * e                                              // char embedding
              + e * h                                            // char input projection
              + (P + 1) * h                                      // char positions
              + static_cast<std::uint64_t>(c.char_layers) * blk + 2 * h + h * V + V;
  return out;
}

std::vector<int> flat_ids(std::string_view text, bool with_eos) {
  std::vector<int> ids;
  ids.reserve(text.size() + 2);
  ids.push_back(kBos);
  for (char c : text) ids.push_back(Vocab::id(c));
  if (with_eos) ids.push_back(kEos);
  return ids;
}

// ---------------------------------------------------------------------------
// Block

namespace nn {

template <typename T>
Tensor<T> block_forward(const Block<T>& b, const Tensor<T>& x, int heads, std::span<const std::size_t> segments,
                        std::uint64_t* score_area) {
  Tensor<T> a = layer_norm(x, b.ln1_g, b.ln1_b);
  Tensor<T> q = linear(a, b.wq, b.bq);
  Tensor<T> k = linear(a, b.wk, b.bk);
  Tensor<T> v = linear(a, b.wv, b.bv);
  Tensor<T> att = causal_attention(q, k, v, heads, segments, score_area);
  Tensor<T> x1 = add(x, linear(att, b.wo, b.bo));
  Tensor<T> f = linear(gelu(linear(layer_norm(x1, b.ln2_g, b.ln2_b), b.w1, b.b1)), b.w2, b.b2);
  return add(x1, f);
}

template Tensor<float> block_forward(const Block<float>&, const Tensor<float>&, int, std::span<const std::size_t>,
                                     std::uint64_t*);
template Tensor<double> block_forward(const Block<double>&, const Tensor<double>&, int,
                                      std::span<const std::size_t>, std::uint64_t*);

}  // namespace nn

// ---------------------------------------------------------------------------
// DualDecoderModel

template <typename T>
DualDecoderModel<T>::DualDecoderModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  config_.char_embed = config_.embed_width();
  const std::size_t h = static_cast<std::size_t>(config_.hidden);
  const std::size_t e = static_cast<std::size_t>(config_.embed_width());
  const std::size_t P = static_cast<std::size_t>(config_.patch_size);
  const std::size_t V = static_cast<std::size_t>(config_.vocab_size);

  Registry<T> reg(params_, &owners_, seed);
  reg.set_owner(Owner::Char);
  w_.char_embedding = reg.normal("char_embedding", {V, e});
  reg.set_owner(Owner::Patch);
  w_.patch_proj_w = reg.normal("patch_proj.w", {P * e, h});
  w_.patch_proj_b = reg.constant("patch_proj.b", {h}, T(0));
  w_.patch_pos = reg.normal("patch_pos", {static_cast<std::size_t>(config_.max_patches()), h});
  for (int i = 0; i < config_.patch_layers; ++i) {
    w_.patch_blocks.push_back(reg.block("patch_dec.layer" + std::to_string(i), config_.hidden, config_.ffn_mult));
  }
  w_.patch_ln_g = reg.constant("patch_dec.ln_f.g", {h}, T(1));
  w_.patch_ln_b = reg.constant("patch_dec.ln_f.b", {h}, T(0));
  reg.set_owner(Owner::Char);
  w_.char_in_w = reg.normal("char_in.w", {e, h});
  w_.char_pos = reg.normal("char_pos", {P + 1, h});
  for (int i = 0; i < config_.char_layers; ++i) {
    w_.char_blocks.push_back(reg.block("char_dec.layer" + std::to_string(i), config_.hidden, config_.ffn_mult));
  }
  w_.char_ln_g = reg.constant("char_dec.ln_f.g", {h}, T(1));
  w_.char_ln_b = reg.constant("char_dec.ln_f.b", {h}, T(0));
  w_.head_w = reg.normal("head.w", {h, V});
  w_.head_b = reg.constant("head.b", {V}, T(0));
}

template <typename T>
ParamCounts DualDecoderModel<T>::count_params() const {
  ParamCounts c;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    (owners_[i] == Owner::Patch ? c.patch : c.chars) += params_[i].tensor.size();
  }
  return c;
}

namespace {

template <typename T>
nn::Tensor<T> embed_rows(const typename DualDecoderModel<T>::Weights& w, const ModelConfig& cfg,
                         std::span<const Patch* const> patches, std::span<const int> positions) {
  const std::size_t P = static_cast<std::size_t>(cfg.patch_size);
  const std::size_t e = static_cast<std::size_t>(cfg.embed_width());
  std::vector<int> ids;
  ids.reserve(patches.size() * P);
  for (const Patch* p : patches) {
    if (p->ids.size() != P) {
      throw Error(Errc::ShapeMismatch, "patch width " + std::to_string(p->ids.size()) + " != P=" + std::to_string(P));
    }
    ids.insert(ids.end(), p->ids.begin(), p->ids.end());
  }
  auto chars = nn::gather_rows(w.char_embedding, std::span<const int>(ids));
  auto flat = nn::reshape(chars, {patches.size(), P * e});
  auto proj = nn::linear(flat, w.patch_proj_w, w.patch_proj_b);
  return nn::add(proj, nn::gather_rows(w.patch_pos, positions));
}

}  // namespace

template <typename T>
nn::Tensor<T> DualDecoderModel<T>::embed_patches(std::span<const Patch> patches, int first_pos) {
  if (patches.empty()) throw Error(Errc::SequenceTooShort, "no patches to embed");
  if (first_pos < 0 || first_pos + static_cast<int>(patches.size()) > config_.max_patches()) {
    throw Error(Errc::TooManyPatches, std::to_string(first_pos + patches.size()) + " patches exceed capacity " +
                                          std::to_string(config_.max_patches()));
  }
  std::vector<const Patch*> ptrs;
  std::vector<int> positions;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    ptrs.push_back(&patches[i]);
    positions.push_back(first_pos + static_cast<int>(i));
  }
  return embed_rows<T>(w_, config_, ptrs, positions);
}

template <typename T>
nn::Tensor<T> DualDecoderModel<T>::patch_forward(const nn::Tensor<T>& embeddings,
                                                 std::span<const std::size_t> segments) {
  if (embeddings.ndim() != 2 || embeddings.dim(1) != static_cast<std::size_t>(config_.hidden)) {
    throw Error(Errc::ShapeMismatch, "patch_forward expects [n, " + std::to_string(config_.hidden) + "], got " +
                                         nn::shape_str(embeddings.shape()));
  }
  nn::Tensor<T> x = embeddings;
  for (const auto& b : w_.patch_blocks) x = nn::block_forward(b, x, config_.heads, segments, &counters_.patch_area);
  return nn::layer_norm(x, w_.patch_ln_g, w_.patch_ln_b);
}

template <typename T>
nn::Tensor<T> DualDecoderModel<T>::patch_forward(const nn::Tensor<T>& embeddings) {
  auto seg = single_segment(embeddings.dim(0));
  return patch_forward(embeddings, seg);
}

template <typename T>
nn::Tensor<T> DualDecoderModel<T>::char_logits(const nn::Tensor<T>& features, std::span<const CharSegment> segments) {
  if (segments.empty()) throw Error(Errc::SequenceTooShort, "no char streams");
  if (features.ndim() != 2 || features.dim(1) != static_cast<std::size_t>(config_.hidden)) {
    throw Error(Errc::ShapeMismatch, "features must be [n, hidden], got " + nn::shape_str(features.shape()));
  }
  const std::size_t nf = features.dim(0);
  std::vector<int> char_ids, order, positions;
  std::vector<std::size_t> lens;
  for (const auto& seg : segments) {
    if (seg.feature_row >= nf) throw Error(Errc::ShapeMismatch, "feature row out of range");
    if (seg.input_ids.size() > static_cast<std::size_t>(config_.patch_size)) {
      throw Error(Errc::PatchTooLong, std::to_string(seg.input_ids.size()) + " chars exceed P=" +
                                          std::to_string(config_.patch_size));
    }
    order.push_back(static_cast<int>(seg.feature_row));
    positions.push_back(0);
    for (std::size_t t = 0; t < seg.input_ids.size(); ++t) {
      order.push_back(static_cast<int>(nf + char_ids.size()));
      char_ids.push_back(seg.input_ids[t]);
      positions.push_back(static_cast<int>(t + 1));
    }
    lens.push_back(seg.input_ids.size() + 1);
  }
  nn::Tensor<T> stream_src = features;
  if (!char_ids.empty()) {
    auto emb = nn::gather_rows(w_.char_embedding, std::span<const int>(char_ids));
    stream_src = nn::concat_rows(features, nn::linear(emb, w_.char_in_w, nn::Tensor<T>()));
  }
  nn::Tensor<T> x = nn::add(nn::gather_rows(stream_src, std::span<const int>(order)),
                            nn::gather_rows(w_.char_pos, std::span<const int>(positions)));
  for (const auto& b : w_.char_blocks) x = nn::block_forward(b, x, config_.heads, lens, &counters_.char_area);
  x = nn::layer_norm(x, w_.char_ln_g, w_.char_ln_b);
  return nn::linear(x, w_.head_w, w_.head_b);
}

template <typename T>
nn::Tensor<T> DualDecoderModel<T>::char_forward(const nn::Tensor<T>& feature, std::span<const int> chars) {
  std::vector<CharSegment> seg(1);
  seg[0].feature_row = 0;
  seg[0].input_ids.assign(chars.begin(), chars.end());
  nn::Tensor<T> f = feature;
  if (feature.ndim() == 1) f = nn::reshape(feature, {1, feature.dim(0)});
  return char_logits(f, seg);
}

template <typename T>
nn::Tensor<T> DualDecoderModel<T>::next_patch_loss(const PatchSequence& seq) {
  const PatchSequence* one[] = {&seq};
  return batch_loss(one);
}

template <typename T>
nn::Tensor<T> DualDecoderModel<T>::batch_loss(std::span<const PatchSequence* const> batch) {
  if (batch.empty()) throw Error(Errc::SequenceTooShort, "empty batch");
  const int P = config_.patch_size;
  std::vector<const Patch*> inputs;
  std::vector<int> positions;
  std::vector<std::size_t> seg_lens;
  for (const PatchSequence* seq : batch) {
    const std::size_t n = seq->patches.size();
    if (n < 2) throw Error(Errc::SequenceTooShort, "a sequence needs at least 2 patches, got " + std::to_string(n));
    if (seq->patch_size != P) throw Error(Errc::ShapeMismatch, "sequence patch size differs from the model's");
    // The final (EOS) patch is only ever a target.
    if (static_cast<int>(n - 1) > config_.max_patches()) {
      throw Error(Errc::TooManyPatches, std::to_string(n) + " patches exceed capacity " +
                                            std::to_string(config_.max_patches()));
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      inputs.push_back(&seq->patches[i]);
      positions.push_back(static_cast<int>(i));
    }
    seg_lens.push_back(n - 1);
  }
  auto features = patch_forward(embed_rows<T>(w_, config_, inputs, positions), seg_lens);

  std::vector<CharSegment> streams;
  std::vector<int> targets;
  std::size_t row = 0;
  for (const PatchSequence* seq : batch) {
    for (std::size_t i = 0; i + 1 < seq->patches.size(); ++i, ++row) {
      const Patch& t = seq->patches[i + 1];
      const int k = t.content_len + (t.content_len < P ? 1 : 0);  // content plus stop
      CharSegment s;
      s.feature_row = row;
      s.input_ids.assign(t.ids.begin(), t.ids.begin() + (k - 1));
      targets.insert(targets.end(), t.ids.begin(), t.ids.begin() + k);
      streams.push_back(std::move(s));
    }
  }
  auto logits = char_logits(features, streams);
  return nn::cross_entropy(logits, std::span<const int>(targets), -1);
}

template <typename T>
void DualDecoderModel<T>::cost_probe(int num_patches) {
  if (num_patches <= 0 || num_patches > config_.max_patches()) {
    throw Error(Errc::TooManyPatches, "probe length " + std::to_string(num_patches) + " outside capacity");
  }
  nn::NoGradGuard guard;
  const int P = config_.patch_size;
  std::vector<Patch> patches(static_cast<std::size_t>(num_patches), make_patch(std::string(P, 'a'), P));
  auto features = patch_forward(embed_patches(patches, 0));
  std::vector<CharSegment> streams(patches.size());
  for (std::size_t i = 0; i < streams.size(); ++i) {
    streams[i].feature_row = i;
    streams[i].input_ids.assign(static_cast<std::size_t>(P - 1), Vocab::id('a'));
  }
  char_logits(features, streams);
}

template class DualDecoderModel<float>;
template class DualDecoderModel<double>;

// ---------------------------------------------------------------------------
// FlatDecoderModel

void FlatConfig::validate() const {
  if (max_len <= 0 || layers <= 0 || hidden <= 0 || heads <= 0 || ffn_mult <= 0 || vocab_size <= 0) {
    throw Error(Errc::InvalidArgument, "flat config: all sizes must be positive");
  }
  if (hidden % heads != 0) throw Error(Errc::InvalidArgument, "flat config: hidden must be divisible by heads");
}

std::string FlatConfig::to_text() const {
  return "max_len=" + std::to_string(max_len) + "\nlayers=" + std::to_string(layers) +
         "\nhidden=" + std::to_string(hidden) + "\nheads=" + std::to_string(heads) +
         "\nffn_mult=" + std::to_string(ffn_mult) + "\nvocab_size=" + std::to_string(vocab_size) + "\n";
}

std::uint64_t FlatConfig::param_count() const {
  const std::uint64_t h = static_cast<std::uint64_t>(hidden);
  const std::uint64_t V = static_cast<std::uint64_t>(vocab_size);
  return V * h + static_cast<std::uint64_t>(max_len) * h +
         static_cast<std::uint64_t>(layers) * block_param_count(h, static_cast<std::uint64_t>(ffn_mult)) + 2 * h +
         h * V + V;
}

template <typename T>
FlatDecoderModel<T>::FlatDecoderModel(const FlatConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const std::size_t h = static_cast<std::size_t>(config_.hidden);
  const std::size_t V = static_cast<std::size_t>(config_.vocab_size);
  Registry<T> reg(params_, nullptr, seed);
  w_.tok_emb = reg.normal("tok_emb", {V, h});
  w_.pos_emb = reg.normal("pos_emb", {static_cast<std::size_t>(config_.max_len), h});
  for (int i = 0; i < config_.layers; ++i) {
    w_.blocks.push_back(reg.block("flat_dec.layer" + std::to_string(i), config_.hidden, config_.ffn_mult));
  }
  w_.ln_g = reg.constant("flat_dec.ln_f.g", {h}, T(1));
  w_.ln_b = reg.constant("flat_dec.ln_f.b", {h}, T(0));
  w_.head_w = reg.normal("head.w", {h, V});
  w_.head_b = reg.constant("head.b", {V}, T(0));
}

template <typename T>
std::uint64_t FlatDecoderModel<T>::param_count() const {
  std::uint64_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

template <typename T>
nn::Tensor<T> FlatDecoderModel<T>::logits(std::span<const int> ids) {
  if (ids.empty()) throw Error(Errc::SequenceTooShort, "empty sequence");
  if (ids.size() > static_cast<std::size_t>(config_.max_len)) {
    throw Error(Errc::TooManyPatches, std::to_string(ids.size()) + " tokens exceed max_len " +
                                          std::to_string(config_.max_len));
  }
  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int>(i);
  auto x = nn::add(nn::gather_rows(w_.tok_emb, ids), nn::gather_rows(w_.pos_emb, std::span<const int>(positions)));
  auto seg = single_segment(ids.size());
  for (const auto& b : w_.blocks) x = nn::block_forward(b, x, config_.heads, seg, &score_area_);
  x = nn::layer_norm(x, w_.ln_g, w_.ln_b);
  return nn::linear(x, w_.head_w, w_.head_b);
}

template <typename T>
nn::Tensor<T> FlatDecoderModel<T>::sequence_loss(std::span<const int> ids) {
  if (ids.size() < 2) throw Error(Errc::SequenceTooShort, "flat loss needs at least 2 ids");
  auto lg = logits(ids.first(ids.size() - 1));
  return nn::cross_entropy(lg, ids.subspan(1), -1);
}

template <typename T>
void FlatDecoderModel<T>::cost_probe(int len) {
  nn::NoGradGuard guard;
  std::vector<int> ids(static_cast<std::size_t>(len), Vocab::id('a'));
  logits(ids);
}

template class FlatDecoderModel<float>;
template class FlatDecoderModel<double>;

}  // namespace tunes
