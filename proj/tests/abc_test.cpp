#include "abc.hpp"

#include "doctest.h"
#include "error.hpp"
#include "fixtures.hpp"

using namespace tunes;

TEST_SUITE("abc") {

TEST_CASE("parse_tune splits header and body") {
  const auto t = parse_tune("X:1\nT: Kesh \nM:6/8\nK:G\n|:GAG GAB:|\n|:ded dBG:|\n");
  REQUIRE(t.fields.size() == 4);
  CHECK(t.fields[1] == Field{'T', "Kesh"});
  CHECK(*t.field('K') == "G");
  CHECK(t.field('Q') == nullptr);
  CHECK(t.body == "|:GAG GAB:|\n|:ded dBG:|");
}

TEST_CASE("comments, blank lines and CRLF are normalized away") {
  const std::string text = "X:2\r\n% note\r\nK:D\r\n\r\nABcd|efga  \r\n%tail\r\n";
  const auto t = parse_tune(text);
  CHECK(t.body == "ABcd|efga");
  CHECK(normalize(text) == serialize(t));
  CHECK(serialize(t) == "X:2\nK:D\nABcd|efga\n");
}

TEST_CASE("missing key and empty body are errors") {
  auto code_of = [](const char* text) {
    try {
      parse_tune(text);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Io;
  };
  CHECK(code_of("X:1\nT:no key\n") == Errc::MissingKeyField);
  CHECK(code_of("X:1\nabc|def\nK:G\n") == Errc::MissingKeyField);
  CHECK(code_of("X:1\nK:G\n% only a comment\n") == Errc::EmptyBody);
}

TEST_CASE("split_tune_texts drops comment-only chunks") {
  const auto chunks = split_tune_texts("% file header\n% more\n\nX:1\nK:C\nab|\n\n\n \nX:2\nK:C\ncd|\n");
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[1] == "X:2\nK:C\ncd|\n");
}

TEST_CASE("fixture files split into the expected number of tunes") {
  CHECK(split_tune_texts(fixtures::read("trad10.abc")).size() == 10);
  CHECK(split_tune_texts(fixtures::read("annotated20.abc")).size() == 20);
}

TEST_CASE("strip_fields keeps structural tags") {
  const auto t = parse_tune("X:1\nT:Title\nC:Trad\nM:4/4\nL:1/8\nR:reel\nK:D\nabc|\n");
  const auto s = strip_fields(t);
  CHECK(serialize(s) == "X:1\nM:4/4\nL:1/8\nK:D\nabc|\n");
  CHECK_THROWS_AS(strip_fields(t, {'X', 'T'}), Error);
  CHECK_THROWS_AS(strip_fields(t, {}), Error);
}

TEST_CASE("boundary scan uses longest two-character symbols") {
  const auto b = scan_boundaries("|:ab|cd:|ef::gh||ij|]");
  REQUIRE(b.size() == 5);
  CHECK(b[0] == SectionBoundary{Boundary::RepeatOpen, 0});
  CHECK(b[1] == SectionBoundary{Boundary::RepeatClose, 7});
  CHECK(b[2] == SectionBoundary{Boundary::RepeatBoth, 11});
  CHECK(b[3] == SectionBoundary{Boundary::Double, 15});
  CHECK(b[4] == SectionBoundary{Boundary::Final, 19});
}

TEST_CASE("quoted strings and inline fields are opaque") {
  CHECK(scan_boundaries("\"A||B\"ab|cd").empty());
  CHECK(scan_boundaries("ab[M:3|4]cd").empty());
  CHECK(split_bars("\"G|D\"ab|[K:D|A]cd").size() == 2);
  // A bracket chord is not an inline field.
  CHECK(split_bars("[ce]a|b").size() == 2);
}

TEST_CASE("scan_segments rebuilds the body") {
  const std::string body = "|:GAG GAB|ded dBG:|\n|:gag gab|[1 ded:|[2 dBG|]";
  std::string rebuilt;
  for (const auto& s : scan_segments(body)) rebuilt += s.text + std::string(boundary_symbol(s.terminator));
  CHECK(rebuilt == body);
}

TEST_CASE("split_sections drops blank sections and bars") {
  const auto secs = split_sections("|:ab|cd:|\n|:ef|gh||\n");
  REQUIRE(secs.size() == 2);
  CHECK(secs[0].bars == std::vector<std::string>{"ab", "cd"});
  CHECK(secs[1].bars == std::vector<std::string>{"ef", "gh"});
  CHECK(secs[1].terminator == Boundary::Double);
  CHECK(split_bars("ab| |cd|") == std::vector<std::string>{"ab", "cd"});
}

}  // TEST_SUITE
