#include "generate.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "error.hpp"
#include "patch.hpp"
#include "runtime.hpp"

namespace tunes {

void SampleOptions::validate() const {
  if (!greedy && !(temperature > 0.0)) throw Error(Errc::InvalidArgument, "temperature must be > 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(Errc::InvalidArgument, "top_p must be in (0, 1]");
  if (max_patches < 0) throw Error(Errc::InvalidArgument, "max_patches must be >= 0");
}

std::vector<int> top_p_keep(std::span<const double> probs, double p) {
  std::vector<int> order;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) order.push_back(static_cast<int>(i));
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return probs[static_cast<std::size_t>(a)] != probs[static_cast<std::size_t>(b)]
               ? probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)]
               : a < b;
  });
  double cum = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    cum += probs[static_cast<std::size_t>(order[i])];
    if (cum >= p) {
      order.resize(i + 1);
      break;
    }
  }
  return order;
}

int pick_token(std::span<const float> logits, std::span<const bool> allowed, const SampleOptions& opts, Rng& rng) {
  int best = -1;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (allowed[i] && (best < 0 || logits[i] > logits[static_cast<std::size_t>(best)])) best = static_cast<int>(i);
  }
  if (best < 0) throw Error(Errc::InvalidArgument, "every token is masked");
  if (opts.greedy) return best;

  const double top = logits[static_cast<std::size_t>(best)];
  std::vector<double> probs(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (allowed[i]) z += (probs[i] = std::exp((logits[i] - top) / opts.temperature));
  }
  for (double& q : probs) q /= z;
  const auto keep = top_p_keep(probs, opts.top_p);
  double mass = 0.0;
  for (int id : keep) mass += probs[static_cast<std::size_t>(id)];
  double u = rng.uniform() * mass;
  for (int id : keep) {
    u -= probs[static_cast<std::size_t>(id)];
    if (u < 0.0) return id;
  }
  return keep.back();
}

namespace {

bool header_complete(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) return false;
    if (text.substr(pos, 2) == "K:") return true;
    pos = nl + 1;
  }
  return false;
}

}  // namespace

Sample sample(const DualDecoderModel<float>& model, std::string_view prompt, const SampleOptions& opts) {
  opts.validate();
  const auto& cfg = model.config();
  const int P = cfg.patch_size;
  try {
    parse_prefix(prompt);
  } catch (const Error& e) {
    throw Error(Errc::InvalidPrompt, e.what());
  }
  Sample out;
  out.text = std::string(prompt);
  // A header or code line without its LF is completed so the next patch
  // starts on a fresh line.
  if (!out.text.empty() && out.text.back() != '\n' && !header_complete(out.text)) out.text += '\n';

  std::vector<Patch> prompt_patches;
  try {
    for (const auto& unit : segment_units(out.text)) prompt_patches.push_back(make_patch(unit, P));
  } catch (const Error& e) {
    throw Error(Errc::InvalidPrompt, e.what());
  }
  const int capacity = cfg.max_patches();
  const int limit = opts.max_patches > 0 ? std::min(opts.max_patches, capacity) : capacity;
  if (1 + static_cast<int>(prompt_patches.size()) > limit) {
    throw Error(Errc::InvalidPrompt, "prompt needs " + std::to_string(prompt_patches.size() + 1) +
                                         " patches, budget is " + std::to_string(limit));
  }
  out.prompt_patches = static_cast<int>(prompt_patches.size());

  DualRuntime rt(model);
  std::vector<float> feature;
  auto feed = [&](const Patch& p) {
    auto f = rt.push_patch(p);
    feature.assign(f.begin(), f.end());
  };
  feed(special_patch(kBos, P));
  for (const auto& p : prompt_patches) feed(p);

  Rng rng(opts.seed);
  const std::size_t V = static_cast<std::size_t>(cfg.vocab_size);
  std::unique_ptr<bool[]> allowed(new bool[V]);
  int count = 1 + out.prompt_patches;
  while (count < limit) {
    auto logits = rt.start_chars(feature);
    std::string chars;
    bool eos = false;
    for (int t = 0; t < P; ++t) {
      std::fill(allowed.get(), allowed.get() + V, true);
      allowed[kBos] = false;
      allowed[kEos] = t == 0 && !opts.fill_budget;
      allowed[kPad] = t > 0;
      const int id = pick_token(logits, std::span<const bool>(allowed.get(), V), opts, rng);
      if (id == kEos) {
        eos = true;
        break;
      }
      if (id == kPad) break;
      chars += Vocab::ch(id);
      if (t + 1 < P) logits = rt.push_char(id);
    }
    if (eos) {
      out.ended = true;
      break;
    }
    out.text += chars;
    out.new_chars += chars.size();
    ++out.new_patches;
    if (++count >= limit) break;
    feed(make_patch(chars, P));
  }
  out.budget_exhausted = !out.ended;
  return out;
}

Sample sample_flat(const FlatDecoderModel<float>& model, std::string_view prompt, const SampleOptions& opts) {
  opts.validate();
  const int limit = model.config().max_len;
  Sample out;
  out.text = std::string(prompt);
  std::vector<int> ids;
  try {
    ids = flat_ids(prompt, false);
  } catch (const Error& e) {
    throw Error(Errc::InvalidPrompt, e.what());
  }
  if (static_cast<int>(ids.size()) >= limit) throw Error(Errc::InvalidPrompt, "prompt fills the whole context");

  FlatRuntime rt(model);
  std::span<const float> logits;
  for (int id : ids) logits = rt.push(id);
  std::vector<float> current(logits.begin(), logits.end());

  Rng rng(opts.seed);
  const std::size_t V = static_cast<std::size_t>(model.config().vocab_size);
  std::unique_ptr<bool[]> allowed(new bool[V]);
  std::fill(allowed.get(), allowed.get() + V, true);
  allowed[kBos] = false;
  allowed[kPad] = false;
  allowed[kEos] = !opts.fill_budget;
  while (true) {
    const int id = pick_token(current, std::span<const bool>(allowed.get(), V), opts, rng);
    if (id == kEos) {
      out.ended = true;
      break;
    }
    out.text += Vocab::ch(id);
    ++out.new_chars;
    if (rt.length() >= limit) break;
    auto next = rt.push(id);
    current.assign(next.begin(), next.end());
  }
  out.budget_exhausted = !out.ended;
  return out;
}

FormDiff check_form(std::string_view generated, const ControlCodes& requested) {
  FormDiff d;
  std::string rest(generated);
  try {
    rest = parse_prefix(generated).remainder;
  } catch (const Error&) {
    // no usable prefix: treat the whole text as the tune
  }
  try {
    d.extracted = extract_control_codes(parse_tune(rest));
  } catch (const Error& e) {
    d.extraction_failed = true;
    d.error = e.what();
    return d;
  }
  d.similarity = eds(render_prefix(requested), render_prefix(d.extracted));
  d.match = d.extracted == requested;

  auto delta = [&](std::string code, int want, int got) {
    if (want != got) d.deltas.push_back({std::move(code), want, got});
  };
  delta("S", requested.section_count(), d.extracted.section_count());
  const int n = std::max(requested.section_count(), d.extracted.section_count());
  for (int k = 0; k < n; ++k) {
    const SectionCodes* a = k < requested.section_count() ? &requested.sections[static_cast<std::size_t>(k)] : nullptr;
    const SectionCodes* b =
        k < d.extracted.section_count() ? &d.extracted.sections[static_cast<std::size_t>(k)] : nullptr;
    delta("B" + std::to_string(k + 1), a ? a->bars : -1, b ? b->bars : -1);
    for (int j = 0; j < k; ++j) {
      delta("E" + std::to_string(k + 1) + "." + std::to_string(j + 1),
            a ? a->similarity[static_cast<std::size_t>(j)] : -1, b ? b->similarity[static_cast<std::size_t>(j)] : -1);
    }
  }
  return d;
}

}  // namespace tunes
