#include "abc.hpp"

#include <array>
#include <cctype>

#include "error.hpp"

namespace tunes {

namespace {

constexpr std::array<std::pair<std::string_view, Boundary>, 6> kSymbols{{
    {"[|", Boundary::SectionOpen},
    {"||", Boundary::Double},
    {"|]", Boundary::Final},
    {"|:", Boundary::RepeatOpen},
    {"::", Boundary::RepeatBoth},
    {":|", Boundary::RepeatClose},
}};

bool is_blank(std::string_view s) {
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view rtrim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// CR/CRLF to LF, then split. The final line may be empty.
std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      lines.push_back(std::move(cur));
      cur.clear();
    } else if (c == '\n') {
      lines.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  lines.push_back(std::move(cur));
  return lines;
}

bool is_field_line(std::string_view line) {
  return line.size() >= 2 && std::isupper(static_cast<unsigned char>(line[0])) && line[1] == ':';
}

bool is_comment(std::string_view line) { return !line.empty() && line.front() == '%'; }

// Index one past an opaque region (quoted string or inline field) starting
// at i, or i itself when none starts there.
std::size_t skip_opaque(std::string_view body, std::size_t i) {
  const std::size_t n = body.size();
  if (body[i] == '"') {
    std::size_t j = body.find('"', i + 1);
    return j == std::string_view::npos ? n : j + 1;
  }
  if (body[i] == '[' && i + 2 < n && std::isalpha(static_cast<unsigned char>(body[i + 1])) &&
      body[i + 2] == ':') {
    std::size_t j = body.find(']', i + 3);
    return j == std::string_view::npos ? n : j + 1;
  }
  return i;
}

}  // namespace

const std::string* AbcTune::field(char tag) const {
  for (const auto& f : fields) {
    if (f.tag == tag) return &f.value;
  }
  return nullptr;
}

std::string_view boundary_symbol(Boundary kind) {
  for (const auto& [sym, k] : kSymbols) {
    if (k == kind) return sym;
  }
  return "";
}

const std::set<char>& structural_tags() {
  static const std::set<char> tags{'X', 'L', 'M', 'K'};
  return tags;
}

AbcTune parse_tune(std::string_view text) {
  AbcTune tune;
  bool in_body = false;
  std::string body;
  for (const auto& raw : split_lines(text)) {
    std::string_view line = rtrim(raw);
    if (line.empty() || is_comment(line)) continue;
    if (in_body) {
      if (!body.empty()) body.push_back('\n');
      body.append(line);
      continue;
    }
    if (!is_field_line(line)) {
      throw Error(Errc::MissingKeyField, "body text before any K: field: '" + std::string(line) + "'");
    }
    tune.fields.push_back({line[0], std::string(trim(line.substr(2)))});
    if (line[0] == 'K') in_body = true;
  }
  if (!in_body) throw Error(Errc::MissingKeyField, "tune has no K: field");
  if (body.empty()) throw Error(Errc::EmptyBody, "tune has no body after K:");
  tune.body = std::move(body);
  return tune;
}

std::string normalize(std::string_view text) {
  std::string out;
  bool in_header = true;
  for (const auto& raw : split_lines(text)) {
    std::string_view line = rtrim(raw);
    if (line.empty() || is_comment(line)) continue;
    if (in_header && is_field_line(line)) {
      out.append(line.substr(0, 2));
      out.append(trim(line.substr(2)));
      if (line[0] == 'K') in_header = false;
    } else {
      out.append(line);
    }
    out.push_back('\n');
  }
  return out;
}

std::string serialize(const AbcTune& tune) {
  std::string out;
  for (const auto& f : tune.fields) {
    out.push_back(f.tag);
    out.push_back(':');
    out.append(f.value);
    out.push_back('\n');
  }
  out.append(tune.body);
  out.push_back('\n');
  return out;
}

std::vector<std::string> split_tune_texts(std::string_view text) {
  std::vector<std::string> chunks;
  std::string cur;
  bool has_content = false;
  auto flush = [&] {
    if (has_content) chunks.push_back(cur);
    cur.clear();
    has_content = false;
  };
  for (const auto& line : split_lines(text)) {
    if (is_blank(line)) {
      flush();
      continue;
    }
    cur.append(line);
    cur.push_back('\n');
    if (!is_comment(line)) has_content = true;
  }
  flush();
  return chunks;
}

AbcTune strip_fields(const AbcTune& tune, const std::set<char>& keep) {
  if (keep.empty()) throw Error(Errc::InvalidArgument, "strip_fields: keep set is empty");
  AbcTune out;
  out.body = tune.body;
  for (const auto& f : tune.fields) {
    if (keep.count(f.tag)) out.fields.push_back(f);
  }
  if (!out.field('K')) throw Error(Errc::MissingKeyField, "strip_fields removed the K: field");
  return out;
}

std::vector<SectionBoundary> scan_boundaries(std::string_view body) {
  std::vector<SectionBoundary> found;
  std::size_t i = 0;
  while (i < body.size()) {
    std::size_t skip = skip_opaque(body, i);
    if (skip != i) {
      i = skip;
      continue;
    }
    bool matched = false;
    if (i + 1 < body.size()) {
      std::string_view two = body.substr(i, 2);
      for (const auto& [sym, kind] : kSymbols) {
        if (two == sym) {
          found.push_back({kind, i});
          i += 2;
          matched = true;
          break;
        }
      }
    }
    if (!matched) ++i;
  }
  return found;
}

std::vector<Section> scan_segments(std::string_view body) {
  std::vector<Section> segments;
  std::size_t start = 0;
  for (const auto& b : scan_boundaries(body)) {
    Section s;
    s.text = std::string(body.substr(start, b.offset - start));
    s.terminator = b.kind;
    s.offset = start;
    segments.push_back(std::move(s));
    start = b.offset + 2;
  }
  Section tail;
  tail.text = std::string(body.substr(start));
  tail.terminator = Boundary::EndOfBody;
  tail.offset = start;
  segments.push_back(std::move(tail));
  return segments;
}

std::vector<Section> split_sections(std::string_view body) {
  std::vector<Section> sections;
  for (auto& seg : scan_segments(body)) {
    if (is_blank(seg.text)) continue;
    seg.bars = split_bars(seg.text);
    sections.push_back(std::move(seg));
  }
  return sections;
}

std::vector<std::string> split_bars(std::string_view text) {
  std::vector<std::string> bars;
  std::size_t start = 0;
  std::size_t i = 0;
  auto emit = [&](std::size_t end) {
    std::string_view frag = text.substr(start, end - start);
    if (!is_blank(frag)) bars.emplace_back(frag);
  };
  while (i < text.size()) {
    std::size_t skip = skip_opaque(text, i);
    if (skip != i) {
      i = skip;
      continue;
    }
    if (text[i] == '|') {
      emit(i);
      start = i + 1;
    }
    ++i;
  }
  emit(text.size());
  return bars;
}

std::vector<std::string> split_bars(const Section& section) { return split_bars(section.text); }

}  // namespace tunes
