#include "model.hpp"

#include <cmath>

#include "doctest.h"
#include "rng.hpp"
#include "trainer.hpp"

using namespace tunes;

namespace {

const char* kMicroTune = "S:1\nB:1\nK:C\nab|\n";  // four 4-character units at P=4

// Finite differences over every parameter entry of a double-precision model.
// Returns the worst relative error; `floor` keeps near-zero pairs from
// dominating.
double worst_gradient_error(DualDecoderModel<double>& model, const PatchSequence& seq, double floor) {
  for (auto& p : model.parameters()) p.tensor.zero_grad();
  nn::backward(model.next_patch_loss(seq));
  double worst = 0;
  for (auto& p : model.parameters()) {
    std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    auto data = p.tensor.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      const double h = 1e-5;
      double up, down;
      {
        nn::NoGradGuard g;
        data[i] = keep + h;
        up = model.next_patch_loss(seq).item();
        data[i] = keep - h;
        down = model.next_patch_loss(seq).item();
      }
      data[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double a = i < analytic.size() ? analytic[i] : 0.0;
      worst = std::max(worst, std::abs(numeric - a) / std::max(floor, std::abs(numeric) + std::abs(a)));
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("preset parameter counts") {
  const auto toy = analytic_param_counts(ModelConfig::toy());
  CHECK(toy.patch == 184960);
  CHECK(toy.chars == 61267);
  const auto paper = analytic_param_counts(ModelConfig::paper());
  CHECK(paper.patch == 68610048);
  CHECK(paper.chars == 21533091);
  DualDecoderModel<float> m(ModelConfig::toy(), 0);
  CHECK(m.count_params().patch == toy.patch);
  CHECK(m.count_params().chars == toy.chars);
}

TEST_CASE("config text round trip and digest") {
  const auto c = ModelConfig::toy();
  CHECK(ModelConfig::from_text(c.to_text()) == c);
  CHECK(c.digest().size() == 16);
  CHECK(c.digest() != ModelConfig::micro().digest());
  CHECK_THROWS_AS(ModelConfig::preset("huge"), Error);
  ModelConfig bad = c;
  bad.max_len = 1000;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("same seed, same weights") {
  DualDecoderModel<float> a(ModelConfig::micro(), 7), b(ModelConfig::micro(), 7), c(ModelConfig::micro(), 8);
  const auto& pa = a.parameters()[0].tensor;
  CHECK(std::equal(pa.data().begin(), pa.data().end(), b.parameters()[0].tensor.data().begin()));
  CHECK_FALSE(std::equal(pa.data().begin(), pa.data().end(), c.parameters()[0].tensor.data().begin()));
}

TEST_CASE("shapes and errors") {
  DualDecoderModel<float> m(ModelConfig::micro(), 1);
  const auto seq = encode(kMicroTune, Vocab{}, 4, 8);
  auto f = m.patch_forward(m.embed_patches(seq));
  CHECK(f.shape() == nn::Shape{seq.size(), 8});
  const std::vector<int> chars{Vocab::id('a'), Vocab::id('b')};
  CHECK(m.char_forward(nn::Tensor<float>::zeros({1, 8}), chars).shape() == nn::Shape{3, 99});
  const std::vector<int> too_long(5, Vocab::id('a'));
  CHECK_THROWS_AS(m.char_forward(nn::Tensor<float>::zeros({1, 8}), too_long), Error);
  CHECK_THROWS_AS(m.patch_forward(nn::Tensor<float>::zeros({2, 7})), Error);
  PatchSequence one;
  one.patch_size = 4;
  one.patches.push_back(special_patch(kBos, 4));
  CHECK_THROWS_AS(m.next_patch_loss(one), Error);
  const auto wide = encode(kMicroTune, Vocab{}, 8, 8);
  CHECK_THROWS_AS(m.next_patch_loss(wide), Error);
}

TEST_CASE("target count covers content plus stop") {
  const auto seq = encode(kMicroTune, Vocab{}, 4, 8);
  // Four full patches (no stop) and the EOS patch (EOS + stop).
  CHECK(target_count(seq) == 4 * 4 + 2);
}

TEST_CASE("batch loss equals the char-weighted mean of single losses") {
  DualDecoderModel<double> m(ModelConfig::micro(), 2);
  const auto a = encode(kMicroTune, Vocab{}, 4, 8);
  const auto b = encode("S:1\nB:2\nK:D\nd|e|\n", Vocab{}, 4, 8);
  const PatchSequence* both[] = {&a, &b};
  const double la = m.next_patch_loss(a).item(), lb = m.next_patch_loss(b).item();
  const double na = static_cast<double>(target_count(a)), nb = static_cast<double>(target_count(b));
  CHECK(m.batch_loss(both).item() == doctest::Approx((la * na + lb * nb) / (na + nb)).epsilon(1e-12));
}

TEST_CASE("patch decoder is causal") {
  DualDecoderModel<float> m(ModelConfig::micro(), 3);
  Rng rng(1);
  std::vector<Patch> patches;
  for (int i = 0; i < 8; ++i) patches.push_back(make_patch("ab|c", 4));
  const auto base = m.patch_forward(m.embed_patches(patches));
  for (int trial = 0; trial < 20; ++trial) {
    auto moved = patches;
    const std::size_t j = 1 + rng.below(7);
    moved[j].ids[rng.below(4)] = 4 + static_cast<int>(rng.below(95));
    const auto out = m.patch_forward(m.embed_patches(moved));
    for (std::size_t r = 0; r < j; ++r) {
      for (std::size_t c = 0; c < 8; ++c) REQUIRE(out.at(r, c) == base.at(r, c));
    }
  }
}

TEST_CASE("char decoder is causal") {
  DualDecoderModel<float> m(ModelConfig::micro(), 4);
  const auto feature = nn::Tensor<float>::from({1, 8}, {0.1f, -0.2f, 0.3f, 0.0f, 0.5f, -0.1f, 0.2f, 0.4f});
  std::vector<int> chars{10, 20, 30, 40};
  const auto base = m.char_forward(feature, chars);
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto moved = chars;
    const std::size_t t = rng.below(4);
    moved[t] = 4 + static_cast<int>(rng.below(95));
    const auto out = m.char_forward(feature, moved);
    // Input slot t+1 holds chars[t]; rows 0..t never see it.
    for (std::size_t r = 0; r <= t; ++r) {
      for (std::size_t c = 0; c < 99; ++c) REQUIRE(out.at(r, c) == base.at(r, c));
    }
  }
}

TEST_CASE("initial loss is near ln 99") {
  DualDecoderModel<float> m(ModelConfig::toy(), 5);
  const auto seq = encode("S:1\nB:2\nX:1\nM:4/4\nL:1/8\nK:D\n|:abcd efga|gfed c4:|\n");
  CHECK(std::abs(m.next_patch_loss(seq).item() - std::log(99.0)) < 0.3);
}

TEST_CASE("micro gradients match finite differences") {
  DualDecoderModel<double> m(ModelConfig::micro(), 6);
  const auto seq = encode(kMicroTune, Vocab{}, 4, 8);
  CHECK(worst_gradient_error(m, seq, 1e-7) < 1e-3);
}

TEST_CASE("flat model") {
  FlatConfig fc;
  fc.max_len = 64;
  fc.layers = 1;
  fc.hidden = 16;
  fc.heads = 2;
  FlatDecoderModel<float> f(fc, 1);
  CHECK(f.param_count() == fc.param_count());
  const auto ids = flat_ids("abc|\n");
  CHECK(ids.front() == kBos);
  CHECK(ids.back() == kEos);
  CHECK(std::abs(f.sequence_loss(ids).item() - std::log(99.0)) < 0.3);
  const std::vector<int> too_long(65, 5);
  CHECK_THROWS_AS(f.logits(too_long), Error);
}

}  // TEST_SUITE
