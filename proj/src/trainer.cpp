#include "trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "control.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace tunes {

namespace {

std::string double_text(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& s, const char* what) {
  double v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw Error(Errc::BadCheckpoint, std::string("bad ") + what + " '" + s + "'");
  }
  return v;
}

long long parse_int(std::string_view s, const char* what) {
  long long v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw Error(Errc::InvalidArgument, std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

const std::string& meta_at(const Meta& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw Error(Errc::BadCheckpoint, "state is missing '" + key + "'");
  return it->second;
}

}  // namespace

std::size_t CorpusCounts::skipped_total() const {
  std::size_t n = 0;
  for (const auto& [reason, count] : skipped) n += count;
  return n;
}

CorpusRecord prepare_record(const SourceTune& tune, const CorpusOptions& opts) {
  AbcTune parsed = strip_fields(parse_tune(tune.text), opts.keep);
  const ControlCodes codes = extract_control_codes(parsed);
  CorpusRecord r;
  r.id = tune.id;
  r.prefixed_text = render_prefix(codes) + serialize(parsed);
  r.patch_count = static_cast<int>(encode(r.prefixed_text, Vocab{}, opts.patch_size, opts.max_patches).size());
  return r;
}

std::vector<SourceTune> read_sources(const std::vector<std::string>& paths) {
  std::vector<SourceTune> out;
  for (const auto& path : paths) {
    const std::string name = std::filesystem::path(path).filename().string();
    const auto chunks = split_tune_texts(read_file(path));
    for (std::size_t i = 0; i < chunks.size(); ++i) out.push_back({name + ":" + std::to_string(i + 1), chunks[i]});
  }
  return out;
}

CorpusSplit build_corpus_records(const std::vector<SourceTune>& tunes, const CorpusOptions& opts) {
  if (!(opts.val_fraction >= 0.0 && opts.val_fraction < 1.0)) {
    throw Error(Errc::InvalidArgument, "validation fraction must be in [0, 1)");
  }
  CorpusSplit split;
  split.counts.input = tunes.size();
  std::vector<CorpusRecord> accepted;
  for (const auto& t : tunes) {
    try {
      accepted.push_back(prepare_record(t, opts));
    } catch (const Error& e) {
      ++split.counts.skipped[std::string(errc_name(e.code()))];
    }
  }
  const std::size_t n = accepted.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(opts.seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  const auto n_val = static_cast<std::size_t>(std::floor(opts.val_fraction * static_cast<double>(n) + 1e-9));
  std::vector<bool> is_val(n, false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[perm[i]] = true;
  for (std::size_t i = 0; i < n; ++i) (is_val[i] ? split.validation : split.train).push_back(std::move(accepted[i]));
  split.counts.accepted = n;
  split.counts.train = split.train.size();
  split.counts.validation = split.validation.size();
  return split;
}

CorpusCounts build_corpus(const std::vector<std::string>& input_paths, const std::string& out_path,
                          const CorpusOptions& opts) {
  const CorpusSplit split = build_corpus_records(read_sources(input_paths), opts);
  write_corpus(out_path, split.train);
  write_corpus(out_path + ".val", split.validation);
  return split.counts;
}

std::string escape_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\') {
      out += text[i];
      continue;
    }
    if (++i == text.size()) throw Error(Errc::InvalidArgument, "dangling escape in corpus text");
    switch (text[i]) {
      case '\\': out += '\\'; break;
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      default: throw Error(Errc::InvalidArgument, std::string("unknown escape \\") + text[i]);
    }
  }
  return out;
}

std::string format_corpus(const std::vector<CorpusRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += escape_text(r.id) + "\t" + escape_text(r.prefixed_text) + "\t" + std::to_string(r.patch_count) + "\n";
  }
  return out;
}

std::vector<CorpusRecord> parse_corpus(std::string_view text) {
  std::vector<CorpusRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
      throw Error(Errc::InvalidArgument, "corpus line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    }
    CorpusRecord r;
    r.id = unescape_text(line.substr(0, t1));
    r.prefixed_text = unescape_text(line.substr(t1 + 1, t2 - t1 - 1));
    r.patch_count = static_cast<int>(parse_int(line.substr(t2 + 1), "patch count"));
    out.push_back(std::move(r));
  }
  return out;
}

void write_corpus(const std::string& path, const std::vector<CorpusRecord>& records) {
  write_file_atomic(path, format_corpus(records));
}

std::vector<CorpusRecord> read_corpus(const std::string& path) { return parse_corpus(read_file(path)); }

std::size_t target_count(const PatchSequence& seq) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < seq.patches.size(); ++i) {
    const int c = seq.patches[i].content_len;
    n += static_cast<std::size_t>(c + (c < seq.patch_size ? 1 : 0));
  }
  return n;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(DualDecoderModel<float>& model, const std::vector<CorpusRecord>& train,
                 const std::vector<CorpusRecord>& validation, TrainOptions opts)
    : model_(model), opts_(opts) {
  if (opts_.batch <= 0) throw Error(Errc::InvalidArgument, "batch size must be positive");
  if (!(opts_.lr > 0)) throw Error(Errc::InvalidArgument, "learning rate must be positive");
  const auto& cfg = model.config();
  auto load = [&](const std::vector<CorpusRecord>& records, std::vector<PatchSequence>& out,
                  std::vector<std::string>* ids) {
    for (const auto& r : records) {
      try {
        out.push_back(encode(r.prefixed_text, Vocab{}, cfg.patch_size, cfg.max_patches()));
        if (ids) ids->push_back(r.id);
      } catch (const Error&) {
        ++dropped_;
      }
    }
  };
  load(train, train_, &train_ids_);
  load(validation, val_, nullptr);
  if (train_.empty()) throw Error(Errc::InvalidArgument, "no training record fits the model's patch budget");
  for (const auto& p : model_.parameters()) {
    m_.emplace_back(p.tensor.size(), 0.0f);
    v_.emplace_back(p.tensor.size(), 0.0f);
  }
}

const std::vector<std::size_t>& Trainer::epoch_order(std::uint64_t epoch) {
  if (epoch != cached_epoch_) {
    order_.resize(train_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(mix_seed(opts_.seed, epoch));
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
    cached_epoch_ = epoch;
  }
  return order_;
}

std::vector<std::size_t> Trainer::batch_indices(int step) {
  const std::uint64_t n = train_.size();
  std::vector<std::size_t> idx;
  for (int j = 0; j < opts_.batch; ++j) {
    const std::uint64_t g = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(opts_.batch) +
                            static_cast<std::uint64_t>(j);
    idx.push_back(epoch_order(g / n)[g % n]);
  }
  return idx;
}

double Trainer::current_lr() const {
  const double t = static_cast<double>(step_ + 1);
  return opts_.warmup > 0 ? opts_.lr * std::min(1.0, t / opts_.warmup) : opts_.lr;
}

double Trainer::train_step() {
  const auto idx = batch_indices(step_);
  std::vector<const PatchSequence*> batch;
  for (auto i : idx) batch.push_back(&train_[i]);

  auto& params = model_.parameters();
  for (auto& p : params) p.tensor.zero_grad();
  auto loss = model_.batch_loss(batch);
  const double value = loss.item();
  if (!std::isfinite(value)) {
    std::string ids;
    for (auto i : idx) ids += (ids.empty() ? "" : ",") + train_ids_[i];
    throw Error(Errc::NonFiniteLoss, "step " + std::to_string(step_) + " batch [" + ids + "] loss " +
                                         double_text(value));
  }
  nn::backward(loss);

  const double t = static_cast<double>(step_ + 1);
  const float lr = static_cast<float>(current_lr());
  const float b1 = static_cast<float>(opts_.beta1), b2 = static_cast<float>(opts_.beta2);
  const float bc1 = static_cast<float>(1.0 - std::pow(opts_.beta1, t));
  const float bc2 = static_cast<float>(1.0 - std::pow(opts_.beta2, t));
  const float eps = static_cast<float>(opts_.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].tensor.mutable_data();
    auto g = params[i].tensor.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const float gj = g.empty() ? 0.0f : g[j];
      m[j] = b1 * m[j] + (1.0f - b1) * gj;
      v[j] = b2 * v[j] + (1.0f - b2) * gj * gj;
      w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
    }
    params[i].tensor.zero_grad();
  }
  ++step_;
  return value;
}

double Trainer::validation_loss() {
  if (val_.empty()) throw Error(Errc::EmptySample, "no validation records");
  nn::NoGradGuard guard;
  double total = 0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < val_.size(); start += static_cast<std::size_t>(opts_.batch)) {
    std::vector<const PatchSequence*> batch;
    std::size_t targets = 0;
    for (std::size_t i = start; i < std::min(val_.size(), start + static_cast<std::size_t>(opts_.batch)); ++i) {
      batch.push_back(&val_[i]);
      targets += target_count(val_[i]);
    }
    total += model_.batch_loss(batch).item() * static_cast<double>(targets);
    count += targets;
  }
  return total / static_cast<double>(count);
}

std::vector<StepLog> Trainer::run(int steps, const std::function<void(const StepLog&)>& on_step,
                                  const std::function<void()>& on_best) {
  std::vector<StepLog> logs;
  for (int s = 0; s < steps; ++s) {
    StepLog log;
    log.lr = current_lr();
    log.loss = train_step();
    log.step = step_;
    const bool due = opts_.eval_every > 0 && step_ % opts_.eval_every == 0;
    if (!val_.empty() && (due || s + 1 == steps)) {
      log.val_loss = validation_loss();
      if (!have_best_ || *log.val_loss < best_val_) {
        best_val_ = *log.val_loss;
        have_best_ = true;
        if (on_best) on_best();
      }
    }
    if (on_step) on_step(log);
    logs.push_back(log);
  }
  return logs;
}

Container Trainer::state() const {
  Meta meta;
  meta["step"] = std::to_string(step_);
  meta["seed"] = std::to_string(opts_.seed);
  meta["batch"] = std::to_string(opts_.batch);
  meta["lr"] = double_text(opts_.lr);
  meta["warmup"] = std::to_string(opts_.warmup);
  meta["best_val"] = have_best_ ? double_text(best_val_) : "none";
  Container c = model_container(model_, meta);
  const auto& params = model_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<std::uint32_t> shape;
    for (auto d : params[i].tensor.shape()) shape.push_back(static_cast<std::uint32_t>(d));
    c.tensors.push_back({"opt.m/" + params[i].name, shape, m_[i]});
    c.tensors.push_back({"opt.v/" + params[i].name, shape, v_[i]});
  }
  return c;
}

void Trainer::restore(const Container& state) {
  auto loaded = model_from_container(state);
  if (!(loaded->config() == model_.config())) throw Error(Errc::BadCheckpoint, "state was saved for another config");
  if (meta_at(state.meta, "seed") != std::to_string(opts_.seed) ||
      meta_at(state.meta, "batch") != std::to_string(opts_.batch)) {
    throw Error(Errc::BadCheckpoint, "state seed/batch differ from the trainer options");
  }
  model_.assign_from(*loaded);
  auto& params = model_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedTensor* m = state.find("opt.m/" + params[i].name);
    const NamedTensor* v = state.find("opt.v/" + params[i].name);
    if (!m || !v || m->data.size() != m_[i].size() || v->data.size() != v_[i].size()) {
      throw Error(Errc::BadCheckpoint, "optimizer moments missing for '" + params[i].name + "'");
    }
    m_[i] = m->data;
    v_[i] = v->data;
  }
  step_ = static_cast<int>(parse_double(meta_at(state.meta, "step"), "step"));
  const std::string& best = meta_at(state.meta, "best_val");
  have_best_ = best != "none";
  best_val_ = have_best_ ? parse_double(best, "best_val") : 0.0;
}

}  // namespace tunes
