#include "control.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>

#include "error.hpp"

namespace tunes {

void validate(const ControlCodes& codes) {
  const int s = codes.section_count();
  if (s < kMinSections || s > kMaxSections) {
    throw Error(Errc::FormOutOfRange, "S=" + std::to_string(s) + " outside [1,8]");
  }
  for (int k = 0; k < s; ++k) {
    const auto& sec = codes.sections[k];
    if (sec.bars < kMinBars || sec.bars > kMaxBars) {
      throw Error(Errc::FormOutOfRange,
                  "B=" + std::to_string(sec.bars) + " for section " + std::to_string(k + 1) + " outside [1,32]");
    }
    if (static_cast<int>(sec.similarity.size()) != k) {
      throw Error(Errc::InconsistentCounts, "section " + std::to_string(k + 1) + " carries " +
                                                std::to_string(sec.similarity.size()) + " E codes, expected " +
                                                std::to_string(k));
    }
    for (int e : sec.similarity) {
      if (e < 0 || e >= kSimilarityLevels) {
        throw Error(Errc::FormOutOfRange, "E=" + std::to_string(e) + " outside [0,10]");
      }
    }
  }
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  // Two rows over the shorter string.
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double eds(std::string_view c, std::string_view p) {
  const std::size_t longest = std::max(c.size(), p.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(c, p)) / static_cast<double>(longest);
}

int discretize_eds(double x) {
  constexpr double kTol = 1e-9;
  if (!(x >= -kTol && x <= 1.0 + kTol)) {
    throw Error(Errc::OutOfRange, "similarity " + std::to_string(x) + " outside [0,1]");
  }
  x = std::clamp(x, 0.0, 1.0);
  // The nudge keeps exact halves such as 0.35 (stored as 0.34999...) rounding up.
  return static_cast<int>(std::floor(10.0 * x + 0.5 + kTol));
}

int similarity_level(std::string_view c, std::string_view p) {
  const std::size_t m = std::max(c.size(), p.size());
  if (m == 0) return kSimilarityLevels - 1;
  const std::size_t same = m - levenshtein(c, p);
  // floor(10 * same / m + 1/2)
  return static_cast<int>((20 * same + m) / (2 * m));
}

ControlCodes extract_control_codes_from_body(std::string_view body) {
  const auto sections = split_sections(body);
  ControlCodes codes;
  if (sections.size() < static_cast<std::size_t>(kMinSections) ||
      sections.size() > static_cast<std::size_t>(kMaxSections)) {
    throw Error(Errc::FormOutOfRange, std::to_string(sections.size()) + " sections");
  }
  for (std::size_t k = 0; k < sections.size(); ++k) {
    SectionCodes sc;
    sc.bars = static_cast<int>(sections[k].bars.size());
    if (sc.bars < kMinBars || sc.bars > kMaxBars) {
      throw Error(Errc::FormOutOfRange,
                  "section " + std::to_string(k + 1) + " has " + std::to_string(sc.bars) + " bars");
    }
    for (std::size_t j = 0; j < k; ++j) {
      sc.similarity.push_back(similarity_level(sections[k].text, sections[j].text));
    }
    codes.sections.push_back(std::move(sc));
  }
  return codes;
}

ControlCodes extract_control_codes(const AbcTune& tune) { return extract_control_codes_from_body(tune.body); }

std::string render_prefix(const ControlCodes& codes) {
  validate(codes);
  std::string out = "S:" + std::to_string(codes.section_count()) + "\n";
  for (const auto& sec : codes.sections) {
    out += "B:" + std::to_string(sec.bars) + "\n";
    for (int e : sec.similarity) out += "E:" + std::to_string(e) + "\n";
  }
  return out;
}

namespace {

struct CodeLine {
  char tag;
  int value;
};

// "<tag>:<digits>" and nothing else.
std::optional<CodeLine> parse_code_line(std::string_view line) {
  if (line.size() < 3 || line[1] != ':') return std::nullopt;
  if (line[0] != 'S' && line[0] != 'B' && line[0] != 'E') return std::nullopt;
  std::string_view digits = line.substr(2);
  if (digits.size() > 6) return std::nullopt;
  int v = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  return CodeLine{line[0], v};
}

class LineCursor {
 public:
  explicit LineCursor(std::string_view text) : text_(text) {}

  bool done() const { return pos_ >= text_.size(); }
  int line_no() const { return line_no_; }
  std::size_t pos() const { return pos_; }

  std::string_view peek() const {
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    return text_.substr(pos_, end - pos_);
  }

  void advance() {
    std::size_t end = text_.find('\n', pos_);
    pos_ = end == std::string_view::npos ? text_.size() : end + 1;
    ++line_no_;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_no_ = 1;
};

[[noreturn]] void malformed(const LineCursor& cur, const std::string& what) {
  throw Error(Errc::MalformedPrefix, "line " + std::to_string(cur.line_no()) + ": " + what);
}

}  // namespace

PrefixParse parse_prefix(std::string_view text) {
  LineCursor cur(text);
  auto expect = [&](char tag, int lo, int hi) {
    if (cur.done()) malformed(cur, std::string("expected ") + tag + ": line, found end of text");
    auto line = parse_code_line(cur.peek());
    if (!line) malformed(cur, std::string("expected ") + tag + ": line, found '" + std::string(cur.peek()) + "'");
    if (line->tag != tag) {
      if (tag != 'S' && (line->tag == 'B' || line->tag == 'E')) {
        throw Error(Errc::InconsistentCounts, "line " + std::to_string(cur.line_no()) + ": found " +
                                                  line->tag + ": where " + tag + ": was expected");
      }
      malformed(cur, std::string("expected ") + tag + ": line");
    }
    if (line->value < lo || line->value > hi) {
      throw Error(Errc::FormOutOfRange, "line " + std::to_string(cur.line_no()) + ": " + tag + "=" +
                                            std::to_string(line->value) + " outside [" + std::to_string(lo) +
                                            "," + std::to_string(hi) + "]");
    }
    cur.advance();
    return line->value;
  };

  PrefixParse result;
  const int s = expect('S', kMinSections, kMaxSections);
  for (int k = 0; k < s; ++k) {
    SectionCodes sec;
    sec.bars = expect('B', kMinBars, kMaxBars);
    for (int j = 0; j < k; ++j) sec.similarity.push_back(expect('E', 0, kSimilarityLevels - 1));
    result.codes.sections.push_back(std::move(sec));
  }
  if (!cur.done()) {
    auto extra = parse_code_line(cur.peek());
    if (extra && (extra->tag == 'B' || extra->tag == 'E')) {
      throw Error(Errc::InconsistentCounts,
                  "line " + std::to_string(cur.line_no()) + ": code line beyond the " + std::to_string(s) +
                      " declared sections");
    }
  }
  result.remainder = std::string(text.substr(cur.pos()));
  return result;
}

}  // namespace tunes
