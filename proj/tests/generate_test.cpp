#include "generate.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "error.hpp"

using namespace tunes;

namespace {

// Brute force: every subset size in order of the sorted distribution.
std::vector<int> nucleus_oracle(const std::vector<double>& probs, double p) {
  std::vector<std::pair<double, int>> v;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0) v.emplace_back(-probs[i], static_cast<int>(i));
  }
  std::sort(v.begin(), v.end());
  for (std::size_t k = 1; k <= v.size(); ++k) {
    double mass = 0;
    for (std::size_t i = 0; i < k; ++i) mass -= v[i].first;
    if (mass >= p) {
      std::vector<int> out;
      for (std::size_t i = 0; i < k; ++i) out.push_back(v[i].second);
      return out;
    }
  }
  std::vector<int> out;
  for (auto& [q, id] : v) out.push_back(id);
  return out;
}

const DualDecoderModel<float>& micro_model() {
  static DualDecoderModel<float> m(ModelConfig::micro(), 21);
  return m;
}

ControlCodes codes(std::initializer_list<SectionCodes> s) { return ControlCodes{std::vector<SectionCodes>(s)}; }

}  // namespace

TEST_SUITE("generate") {

TEST_CASE("top-p keeps the minimal prefix with enough mass") {
  Rng rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> probs(1 + rng.below(30));
    double z = 0;
    for (auto& q : probs) {
      q = rng.below(4) == 0 ? 0.0 : std::exp(3 * rng.normal());
      z += q;
    }
    if (z == 0) continue;
    for (auto& q : probs) q /= z;
    const double p = 0.05 + 0.95 * rng.uniform();
    CHECK(top_p_keep(probs, p) == nucleus_oracle(probs, p));
  }
  const std::vector<double> probs{0.1, 0.5, 0.4};
  CHECK(top_p_keep(probs, 0.5) == std::vector<int>{1});
  CHECK(top_p_keep(probs, 0.9) == std::vector<int>{1, 2});
  CHECK(top_p_keep(probs, 1.0) == std::vector<int>{1, 2, 0});
}

TEST_CASE("pick_token respects the mask and the low-temperature limit") {
  const std::vector<float> logits{0.5f, 3.0f, 2.9f, -1.0f};
  bool allowed[] = {true, false, true, true};
  Rng rng(1);
  SampleOptions greedy;
  greedy.greedy = true;
  CHECK(pick_token(logits, allowed, greedy, rng) == 2);
  SampleOptions cold;
  cold.temperature = 1e-4;
  for (int i = 0; i < 50; ++i) CHECK(pick_token(logits, allowed, cold, rng) == 2);
  SampleOptions warm;
  for (int i = 0; i < 200; ++i) CHECK(pick_token(logits, allowed, warm, rng) != 1);
}

TEST_CASE("option validation") {
  SampleOptions o;
  o.temperature = 0;
  CHECK_THROWS_AS(o.validate(), Error);
  o.temperature = 1;
  o.top_p = 0;
  CHECK_THROWS_AS(o.validate(), Error);
  o.top_p = 1.5;
  CHECK_THROWS_AS(o.validate(), Error);
}

TEST_CASE("sampling is deterministic and keeps the prompt verbatim") {
  const std::string prompt = "S:1\nB:2\nK:C\n";
  SampleOptions o;
  o.seed = 4;
  const auto a = sample(micro_model(), prompt, o);
  const auto b = sample(micro_model(), prompt, o);
  CHECK(a.text == b.text);
  CHECK(a.text.rfind(prompt, 0) == 0);
  CHECK(a.prompt_patches == 3);
  CHECK(a.text.size() == prompt.size() + a.new_chars);
  CHECK(1 + a.prompt_patches + a.new_patches <= 8);
  for (char c : a.text) CHECK(Vocab::contains(c));
  o.seed = 5;
  bool differs = false;
  for (int s = 5; s < 10 && !differs; ++s) {
    o.seed = static_cast<std::uint64_t>(s);
    differs = sample(micro_model(), prompt, o).text != a.text;
  }
  CHECK(differs);
}

TEST_CASE("temperature limit equals greedy decoding") {
  SampleOptions g;
  g.greedy = true;
  SampleOptions cold;
  cold.temperature = 1e-6;
  cold.seed = 99;
  CHECK(sample(micro_model(), "S:1\nB:1\n", g).text == sample(micro_model(), "S:1\nB:1\n", cold).text);
}

TEST_CASE("budget and fill") {
  SampleOptions o;
  o.fill_budget = true;
  o.max_patches = 6;
  const auto s = sample(micro_model(), "S:1\nB:1\n", o);
  CHECK_FALSE(s.ended);
  CHECK(s.budget_exhausted);
  CHECK(1 + s.prompt_patches + s.new_patches == 6);
}

TEST_CASE("invalid prompts") {
  CHECK_THROWS_WITH_AS(sample(micro_model(), "X:1\nK:C\n", SampleOptions{}), doctest::Contains("InvalidPrompt"),
                       Error);
  CHECK_THROWS_AS(sample(micro_model(), "S:1\nB:1\nK:C\nabcdefgh|", SampleOptions{}), Error);
  CHECK_THROWS_AS(sample(micro_model(), "S:1\nB:1\nK:C\na|b|c|d|e|", SampleOptions{}), Error);
}

TEST_CASE("an incomplete prompt line is terminated") {
  SampleOptions o;
  o.greedy = true;
  CHECK(sample(micro_model(), "S:1\nB:1", o).text.rfind("S:1\nB:1\n", 0) == 0);
}

TEST_CASE("check_form") {
  const ControlCodes want = codes({{4, {}}, {4, {8}}});
  const std::string tune = "X:1\nK:D\n|:abcd|efga|gfed|c4:|\n|:abcd|efga|gfed|d4:|\n";
  auto d = check_form(tune, want);
  CHECK_FALSE(d.extraction_failed);
  CHECK(d.extracted.section_count() == 2);
  // Prefixed output is accepted too.
  CHECK(check_form(render_prefix(want) + tune, want).similarity == d.similarity);

  const ControlCodes exact = d.extracted;
  const auto same = check_form(tune, exact);
  CHECK(same.match);
  CHECK(same.similarity == 1.0);
  CHECK(same.deltas.empty());

  const auto extra = check_form("X:1\nK:D\n|:abcd|efga|gfed|c4:|\n|:abcd|efga|gfed|d2|d4:|\n", exact);
  CHECK_FALSE(extra.match);
  CHECK(extra.similarity < 1.0);
  REQUIRE_FALSE(extra.deltas.empty());
  CHECK(extra.deltas[0].code == "B2");
  CHECK(extra.deltas[0].requested == 4);
  CHECK(extra.deltas[0].actual == 5);
  CHECK(extra.similarity ==
        doctest::Approx(eds(render_prefix(exact), render_prefix(extra.extracted))).epsilon(1e-15));

  const auto bad = check_form("no tune here", exact);
  CHECK(bad.extraction_failed);
  CHECK(bad.similarity == 0.0);
}

}  // TEST_SUITE
