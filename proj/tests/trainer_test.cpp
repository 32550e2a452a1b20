#include "trainer.hpp"

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "error.hpp"
#include "fixtures.hpp"
#include "synth.hpp"

using namespace tunes;

namespace {

CorpusSplit synth_split(int n, double val_fraction, std::uint64_t seed = 7) {
  CorpusOptions o;
  o.val_fraction = val_fraction;
  o.max_patches = 32;
  return build_corpus_records(fixtures::sources(synth::corpus(n, seed), "synth"), o);
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("ten valid tunes split 8/2") {
  CorpusOptions o;
  o.val_fraction = 0.2;
  o.seed = 3;
  const auto split = build_corpus_records(fixtures::sources(fixtures::read("trad10.abc"), "trad10.abc"), o);
  CHECK(split.counts.input == 10);
  CHECK(split.counts.accepted == 10);
  CHECK(split.counts.train == 8);
  CHECK(split.counts.validation == 2);
  for (const auto& r : split.train) CHECK(r.prefixed_text.rfind("S:2\n", 0) == 0);
}

TEST_CASE("skip reasons are counted, not thrown") {
  std::string nine = "X:1\nK:C\n";
  for (int i = 0; i < 9; ++i) nine += "ab|cd::";
  nine += "\n";
  const std::string text = nine + "\nX:2\nT:no key\n\nX:3\nK:C\n" + std::string(40, 'a') + "|\n\nX:4\nK:C\nab|cd|\n";
  const auto split = build_corpus_records(fixtures::sources(text, "t"), CorpusOptions{});
  CHECK(split.counts.input == 4);
  CHECK(split.counts.accepted == 1);
  CHECK(split.counts.skipped.at("FormOutOfRange") == 1);
  CHECK(split.counts.skipped.at("MissingKeyField") == 1);
  CHECK(split.counts.skipped.at("PatchOverflow") == 1);
  CHECK(split.counts.accepted + split.counts.skipped_total() == split.counts.input);
}

TEST_CASE("corpus files are deterministic and round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "tunes_trainer_test";
  std::filesystem::create_directories(dir);
  CorpusOptions o;
  o.val_fraction = 0.3;
  o.seed = 11;
  const std::vector<std::string> in{fixtures::path("trad10.abc"), fixtures::path("annotated20.abc")};
  const auto c1 = build_corpus(in, (dir / "a.tsv").string(), o);
  build_corpus(in, (dir / "b.tsv").string(), o);
  CHECK(read_file((dir / "a.tsv").string()) == read_file((dir / "b.tsv").string()));
  CHECK(read_file((dir / "a.tsv.val").string()) == read_file((dir / "b.tsv.val").string()));
  const auto train = read_corpus((dir / "a.tsv").string());
  CHECK(train.size() == c1.train);
  CHECK(read_corpus((dir / "a.tsv.val").string()).size() == c1.validation);
  CHECK(train[0].id.rfind("trad10.abc:", 0) == 0);
  for (const auto& r : train) CHECK(encode(r.prefixed_text).size() == static_cast<std::size_t>(r.patch_count));
  std::filesystem::remove_all(dir);
}

TEST_CASE("escaping") {
  const std::string s = "a\\b\nc\td";
  CHECK(escape_text(s) == "a\\\\b\\nc\\td");
  CHECK(unescape_text(escape_text(s)) == s);
  CHECK_THROWS_AS(unescape_text("bad\\"), Error);
  CHECK_THROWS_AS(parse_corpus("only\ttwo\n"), Error);
}

TEST_CASE("equal seeds give identical loss curves") {
  const auto split = synth_split(12, 0.25);
  auto run = [&] {
    DualDecoderModel<float> m(ModelConfig::toy(), 1);
    TrainOptions o;
    o.batch = 4;
    o.seed = 2;
    o.eval_every = 3;
    Trainer t(m, split.train, split.validation, o);
    std::vector<double> losses;
    for (const auto& s : t.run(6)) {
      losses.push_back(s.loss);
      if (s.val_loss) losses.push_back(*s.val_loss);
    }
    return losses;
  };
  const auto a = run();
  CHECK(a.size() == 8);
  CHECK(a == run());
  CHECK(std::abs(a[0] - std::log(99.0)) < 0.3);
}

TEST_CASE("validation does not touch the state") {
  const auto split = synth_split(10, 0.3);
  DualDecoderModel<float> m(ModelConfig::toy(), 1);
  Trainer t(m, split.train, split.validation, TrainOptions{});
  t.train_step();
  const auto before = encode_container(t.state());
  const double v1 = t.validation_loss();
  CHECK(v1 == t.validation_loss());
  CHECK(encode_container(t.state()) == before);
  for (const auto& p : m.parameters()) CHECK_FALSE(p.tensor.has_grad());
}

TEST_CASE("resume is bitwise identical to an uninterrupted run") {
  const auto split = synth_split(12, 0.0);
  TrainOptions o;
  o.batch = 4;
  o.seed = 5;
  o.warmup = 3;
  DualDecoderModel<float> ref_model(ModelConfig::toy(), 9);
  Trainer ref(ref_model, split.train, {}, o);
  std::vector<double> want;
  for (int i = 0; i < 20; ++i) want.push_back(ref.train_step());

  DualDecoderModel<float> first(ModelConfig::toy(), 9);
  Trainer a(first, split.train, {}, o);
  for (int i = 0; i < 10; ++i) CHECK(a.train_step() == want[static_cast<std::size_t>(i)]);
  const std::string saved = encode_container(a.state());

  DualDecoderModel<float> second(ModelConfig::toy(), 1234);
  Trainer b(second, split.train, {}, o);
  b.restore(decode_container(saved));
  CHECK(b.step() == 10);
  for (int i = 10; i < 20; ++i) CHECK(b.train_step() == want[static_cast<std::size_t>(i)]);

  TrainOptions other = o;
  other.seed = 6;
  DualDecoderModel<float> third(ModelConfig::toy(), 9);
  Trainer c(third, split.train, {}, other);
  CHECK_THROWS_AS(c.restore(decode_container(saved)), Error);
}

TEST_CASE("batches cover each epoch once") {
  const auto split = synth_split(12, 0.0);
  DualDecoderModel<float> m(ModelConfig::toy(), 1);
  TrainOptions o;
  o.batch = 5;
  Trainer t(m, split.train, {}, o);
  REQUIRE(t.train_size() == 12);
  std::vector<int> seen(12);
  for (int step = 0; step < 12; ++step) {
    for (auto i : t.batch_indices(step)) ++seen[i];
  }
  // 60 draws over 12 records: every record exactly 5 times.
  for (int s : seen) CHECK(s == 5);
}

TEST_CASE("non-finite loss aborts with the batch ids") {
  const auto split = synth_split(4, 0.0);
  DualDecoderModel<float> m(ModelConfig::toy(), 1);
  m.parameters()[0].tensor.mutable_data()[Vocab::id('S') * 16] = NAN;
  Trainer t(m, split.train, {}, TrainOptions{});
  CHECK_THROWS_WITH_AS(t.train_step(), doctest::Contains("synth:"), Error);
}

TEST_CASE("records over the model budget are dropped") {
  std::string big = "X:1\nK:C\n";
  for (int i = 0; i < 30; ++i) big += "ab|";
  const auto split = build_corpus_records(fixtures::sources(big + "\n", "big"), CorpusOptions{});
  REQUIRE(split.train.size() == 1);
  DualDecoderModel<float> m(ModelConfig::toy(), 1);
  CHECK_THROWS_AS(Trainer(m, split.train, {}, TrainOptions{}), Error);
}

}  // TEST_SUITE
