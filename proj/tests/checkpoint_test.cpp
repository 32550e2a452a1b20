#include "checkpoint.hpp"

#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "error.hpp"

using namespace tunes;

TEST_SUITE("checkpoint") {

TEST_CASE("container round trip") {
  Container c;
  c.meta = {{"kind", "test"}, {"answer", "42"}};
  c.tensors.push_back({"a", {2, 3}, {1, 2, 3, 4, 5, 6}});
  c.tensors.push_back({"b.c", {1}, {-0.5f}});
  const auto back = decode_container(encode_container(c));
  CHECK(back.meta == c.meta);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.find("a")->shape == std::vector<std::uint32_t>{2, 3});
  CHECK(back.find("b.c")->data == std::vector<float>{-0.5f});
  CHECK(back.find("missing") == nullptr);
}

TEST_CASE("corruption is detected") {
  Container c;
  c.tensors.push_back({"w", {4}, {1, 2, 3, 4}});
  const std::string bytes = encode_container(c);
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_WITH_AS(decode_container(flipped), doctest::Contains("BadCheckpoint"), Error);
  CHECK_THROWS_AS(decode_container(bytes.substr(0, bytes.size() - 3)), Error);
  CHECK_THROWS_AS(decode_container("not a checkpoint"), Error);
}

TEST_CASE("model save and load") {
  const auto dir = std::filesystem::temp_directory_path() / "tunes_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "m.ckpt").string();
  DualDecoderModel<float> m(ModelConfig::micro(), 5);
  save_model(path, m, {{"note", "x"}});
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  const auto back = load_model(path);
  CHECK(back->config() == m.config());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    const auto a = m.parameters()[i].tensor.data();
    const auto b = back->parameters()[i].tensor.data();
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
  const auto meta = read_container(path).meta;
  CHECK(meta.at("config_digest") == m.config().digest());
  CHECK(meta.at("note") == "x");
  // Byte-identical on resave.
  save_model(path + "2", *back, {{"note", "x"}});
  CHECK(read_file(path) == read_file(path + "2"));
  CHECK_THROWS_WITH_AS(load_model((dir / "nope.ckpt").string()), doctest::Contains("nope.ckpt"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a tampered tensor shape is rejected") {
  DualDecoderModel<float> m(ModelConfig::micro(), 5);
  Container c = model_container(m);
  c.tensors[0].shape[0] += 1;
  c.tensors[0].data.resize(c.tensors[0].data.size() + c.tensors[0].shape[1]);
  CHECK_THROWS_AS(model_from_container(c), Error);
}

}  // TEST_SUITE
