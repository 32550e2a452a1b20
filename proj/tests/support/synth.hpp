#pragma once

// Deterministic reel-like tunes sized for the toy preset (<= 32 patches).
// Later sections are either fresh or a copy of an earlier section with some
// bars rewritten, so the E levels cover the whole range.

#include <cstdint>
#include <string>
#include <vector>

#include "rng.hpp"

namespace synth {

inline std::string bar(tunes::Rng& rng, bool last) {
  static const std::string scale = "DEFGABcdefg";
  int pos = 3 + static_cast<int>(rng.below(5));
  auto step = [&] {
    pos += static_cast<int>(rng.below(5)) - 2;
    pos = pos < 0 ? 1 : pos >= static_cast<int>(scale.size()) ? static_cast<int>(scale.size()) - 2 : pos;
    return scale[static_cast<std::size_t>(pos)];
  };
  std::string s;
  if (last) {
    s += step();
    s += step();
    s += step();
    s += ' ';
    s += step();
    s += '4';
    return s;
  }
  for (int i = 0; i < 8; ++i) {
    if (i == 4) s += ' ';
    s += step();
  }
  return s;
}

inline std::vector<std::string> fresh_section(tunes::Rng& rng, int bars) {
  std::vector<std::string> out;
  for (int i = 0; i < bars; ++i) out.push_back(bar(rng, i + 1 == bars));
  return out;
}

struct Form {
  std::vector<int> bars;
};

inline const std::vector<Form>& forms() {
  static const std::vector<Form> f{{{8}}, {{4, 4}}, {{8, 8}}, {{4, 8}}, {{8, 4}}, {{4, 4, 4}}, {{4, 4, 8}}};
  return f;
}

inline std::string tune(tunes::Rng& rng, int number) {
  static const char* keys[] = {"D", "G", "A", "Em", "Ador", "Bm"};
  const Form& form = forms()[rng.below(forms().size())];
  std::vector<std::vector<std::string>> sections;
  for (int bars : form.bars) {
    std::vector<std::size_t> same;
    for (std::size_t j = 0; j < sections.size(); ++j) {
      if (static_cast<int>(sections[j].size()) == bars) same.push_back(j);
    }
    if (!same.empty() && rng.below(2) == 0) {
      auto sec = sections[same[rng.below(same.size())]];
      const int rewrites = static_cast<int>(rng.below(static_cast<std::uint64_t>(bars) + 1));
      for (int r = 0; r < rewrites; ++r) {
        const std::size_t i = rng.below(sec.size());
        sec[i] = bar(rng, i + 1 == sec.size());
      }
      sections.push_back(sec);
    } else {
      sections.push_back(fresh_section(rng, bars));
    }
  }
  std::string t = "X:" + std::to_string(number) + "\nT:Synthetic " + std::to_string(number) +
                  "\nR:reel\nM:4/4\nL:1/8\nK:" + keys[rng.below(6)] + "\n";
  for (const auto& sec : sections) {
    t += "|:";
    for (std::size_t i = 0; i < sec.size(); ++i) t += sec[i] + (i + 1 == sec.size() ? ":|\n" : "|");
  }
  return t;
}

// `count` tunes separated by blank lines.
inline std::string corpus(int count, std::uint64_t seed) {
  tunes::Rng rng(seed);
  std::string out;
  for (int i = 1; i <= count; ++i) out += tune(rng, i) + "\n";
  return out;
}

}  // namespace synth
