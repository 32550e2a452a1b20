#include "patch.hpp"

#include <cctype>

#include "error.hpp"

namespace tunes {

namespace {

bool is_blank(std::string_view s) {
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

bool is_opener(std::string_view two) { return two == "|:" || two == "[|"; }

bool is_boundary(std::string_view two) {
  return two == "[|" || two == "||" || two == "|]" || two == "|:" || two == "::" || two == ":|";
}

std::size_t skip_opaque(std::string_view s, std::size_t i) {
  if (s[i] == '"') {
    std::size_t j = s.find('"', i + 1);
    return j == std::string_view::npos ? s.size() : j + 1;
  }
  if (s[i] == '[' && i + 2 < s.size() && std::isalpha(static_cast<unsigned char>(s[i + 1])) && s[i + 2] == ':') {
    std::size_t j = s.find(']', i + 3);
    return j == std::string_view::npos ? s.size() : j + 1;
  }
  return i;
}

struct Split {
  std::vector<std::string> units;
  bool has_key = false;
  std::size_t body_units = 0;
};

Split split_units(std::string_view text) {
  Split out;
  std::size_t pos = 0;
  while (pos < text.size() && !out.has_key) {
    std::size_t nl = text.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? text.size() : nl + 1;
    std::string_view line = text.substr(pos, end - pos);
    out.units.emplace_back(line);
    if (line.size() >= 2 && line[0] == 'K' && line[1] == ':') out.has_key = true;
    pos = end;
  }

  std::string_view body = text.substr(pos);
  const std::size_t n = body.size();
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t skip = skip_opaque(body, i);
    if (skip != i) {
      i = skip;
      continue;
    }
    std::size_t end;
    if (i + 1 < n && is_boundary(body.substr(i, 2))) {
      if (is_opener(body.substr(i, 2)) && is_blank(body.substr(start, i - start))) {
        i += 2;
        continue;
      }
      end = i + 2;
    } else if (body[i] == '|') {
      end = i + 1;
    } else {
      ++i;
      continue;
    }
    while (end < n && std::isspace(static_cast<unsigned char>(body[end]))) ++end;
    out.units.emplace_back(body.substr(start, end - start));
    ++out.body_units;
    start = i = end;
  }
  if (start < n) {
    std::string_view rest = body.substr(start);
    if (is_blank(rest) && out.body_units > 0) {
      out.units.back().append(rest);
    } else {
      out.units.emplace_back(rest);
      if (!is_blank(rest)) ++out.body_units;
    }
  }
  return out;
}

}  // namespace

int Vocab::id(char c) {
  if (c == '\n') return 3;
  if (c >= ' ' && c <= '~') return 4 + (c - ' ');
  throw Error(Errc::UnknownChar, "character code " + std::to_string(static_cast<unsigned char>(c)) +
                                     " is not in the vocabulary");
}

char Vocab::ch(int id) {
  if (id == 3) return '\n';
  if (id >= 4 && id < kSize) return static_cast<char>(' ' + (id - 4));
  throw Error(Errc::InvalidArgument, "id " + std::to_string(id) + " is not a character");
}

Patch make_patch(std::string_view text, int patch_size) {
  if (static_cast<int>(text.size()) > patch_size) {
    throw Error(Errc::PatchOverflow, "patch of " + std::to_string(text.size()) + " characters exceeds P=" +
                                         std::to_string(patch_size));
  }
  Patch p;
  p.ids.assign(patch_size, kPad);
  for (std::size_t i = 0; i < text.size(); ++i) p.ids[i] = Vocab::id(text[i]);
  p.content_len = static_cast<int>(text.size());
  return p;
}

Patch special_patch(int id, int patch_size) {
  Patch p;
  p.ids.assign(patch_size, kPad);
  p.ids[0] = id;
  p.content_len = 1;
  return p;
}

std::vector<std::string> segment_units(std::string_view text) { return split_units(text).units; }

std::vector<std::string> segment(std::string_view prefixed_text, int patch_size) {
  if (is_blank(prefixed_text)) throw Error(Errc::EmptyInput, "nothing to segment");
  Split split = split_units(prefixed_text);
  if (!split.has_key) throw Error(Errc::MissingKeyField, "no K: line before the body");
  if (split.body_units == 0) throw Error(Errc::EmptyBody, "tune body is empty");
  for (std::size_t i = 0; i < split.units.size(); ++i) {
    if (static_cast<int>(split.units[i].size()) > patch_size) {
      throw Error(Errc::PatchOverflow, "unit " + std::to_string(i) + " has " +
                                           std::to_string(split.units[i].size()) + " characters (P=" +
                                           std::to_string(patch_size) + ")");
    }
  }
  return split.units;
}

PatchSequence encode(std::string_view prefixed_text, const Vocab&, int patch_size, int max_patches) {
  auto units = segment(prefixed_text, patch_size);
  if (static_cast<int>(units.size()) + 2 > max_patches) {
    throw Error(Errc::Truncated, std::to_string(units.size() + 2) + " patches exceed the budget of " +
                                     std::to_string(max_patches));
  }
  PatchSequence seq;
  seq.patch_size = patch_size;
  seq.patches.reserve(units.size() + 2);
  seq.patches.push_back(special_patch(kBos, patch_size));
  for (const auto& u : units) seq.patches.push_back(make_patch(u, patch_size));
  seq.patches.push_back(special_patch(kEos, patch_size));
  return seq;
}

std::string patch_text(const Patch& patch) {
  std::string out;
  for (int i = 0; i < patch.content_len; ++i) {
    if (Vocab::is_char(patch.ids[i])) out.push_back(Vocab::ch(patch.ids[i]));
  }
  return out;
}

std::string decode(const PatchSequence& seq, const Vocab&) {
  std::string out;
  for (const auto& p : seq.patches) out += patch_text(p);
  return out;
}

}  // namespace tunes
