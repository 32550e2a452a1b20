#include "runtime.hpp"

#include <cmath>

#include "doctest.h"
#include "model.hpp"

using namespace tunes;

namespace {

float max_diff(std::span<const float> a, const nn::Tensor<float>& t, std::size_t row) {
  float worst = 0;
  for (std::size_t c = 0; c < a.size(); ++c) worst = std::max(worst, std::abs(a[c] - t.at(row, c)));
  return worst;
}

}  // namespace

TEST_SUITE("runtime") {

TEST_CASE("cached patch and char steps match the graph forward") {
  DualDecoderModel<float> m(ModelConfig::toy(), 12);
  const auto seq = encode("S:2\nB:2\nB:2\nE:3\nX:1\nM:4/4\nL:1/8\nK:D\n|:abcd efga|gfed c4:|\n|:ABcd e2fe|dcBA G4:|\n");
  const auto features = m.patch_forward(m.embed_patches(seq));
  DualRuntime rt(m);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto f = rt.push_patch(seq.patches[i]);
    CHECK(max_diff(f, features, i) < 1e-4f);
  }
  CHECK(rt.patches() == static_cast<int>(seq.size()));

  const Patch& target = seq.patches[5];
  std::vector<int> chars(target.ids.begin(), target.ids.begin() + target.content_len);
  nn::Tensor<float> row = nn::Tensor<float>::from({1, 64}, std::vector<float>(64));
  for (std::size_t c = 0; c < 64; ++c) row.mutable_data()[c] = features.at(4, c);
  const auto logits = m.char_forward(row, chars);

  std::vector<float> feature(64);
  for (std::size_t c = 0; c < 64; ++c) feature[c] = features.at(4, c);
  auto step = rt.start_chars(feature);
  CHECK(max_diff(step, logits, 0) < 1e-4f);
  for (std::size_t t = 0; t < chars.size(); ++t) {
    step = rt.push_char(chars[t]);
    CHECK(max_diff(step, logits, t + 1) < 1e-4f);
  }
  CHECK(rt.chars() == static_cast<int>(chars.size()));
}

TEST_CASE("runtime refuses to run past capacity") {
  DualDecoderModel<float> m(ModelConfig::micro(), 1);
  DualRuntime rt(m);
  const Patch p = make_patch("ab|", 4);
  for (int i = 0; i < 8; ++i) rt.push_patch(p);
  CHECK_THROWS_AS(rt.push_patch(p), Error);
  rt.reset();
  CHECK(rt.patches() == 0);
}

TEST_CASE("flat runtime matches the graph forward") {
  FlatConfig fc;
  fc.max_len = 64;
  fc.layers = 2;
  fc.hidden = 32;
  fc.heads = 4;
  FlatDecoderModel<float> m(fc, 3);
  const auto ids = flat_ids("X:1\nK:G\n|:GAG GAB:|\n", false);
  const auto logits = m.logits(ids);
  FlatRuntime rt(m);
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(max_diff(rt.push(ids[i]), logits, i) < 1e-4f);
}

}  // TEST_SUITE
