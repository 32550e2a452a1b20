#pragma once

// Musical-form control codes:
//   S  number of sections (1..8)
//   B  bars in a section (1..32)
//   E  edit-distance similarity level (0..10) of a section against each
//      earlier section
//
// Serialized as a prefix of LF-terminated lines placed before the tune:
//   S:<s>
//   B:<b1>
//   B:<b2>
//   E:<e2,1>
//   B:<b3>
//   E:<e3,1>
//   E:<e3,2>
//   ...

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "abc.hpp"

namespace tunes {

inline constexpr int kMinSections = 1;
inline constexpr int kMaxSections = 8;
inline constexpr int kMinBars = 1;
inline constexpr int kMaxBars = 32;
inline constexpr int kSimilarityLevels = 11;

struct SectionCodes {
  int bars = 0;
  std::vector<int> similarity;  // one level per earlier section, ascending

  bool operator==(const SectionCodes&) const = default;
};

struct ControlCodes {
  std::vector<SectionCodes> sections;

  int section_count() const { return static_cast<int>(sections.size()); }

  bool operator==(const ControlCodes&) const = default;
};

// Throws FormOutOfRange / InconsistentCounts when an invariant is broken.
void validate(const ControlCodes& codes);

std::size_t levenshtein(std::string_view a, std::string_view b);

// 1 - lev(c,p) / max(|c|,|p|). Two empty strings are identical: 1.
double eds(std::string_view c, std::string_view p);

// round(10 x), halves rounded up. Throws OutOfRange outside [0,1] (+-1e-9).
int discretize_eds(double x);

// discretize_eds(eds(c, p)) evaluated in exact integer arithmetic.
int similarity_level(std::string_view c, std::string_view p);

ControlCodes extract_control_codes(const AbcTune& tune);
ControlCodes extract_control_codes_from_body(std::string_view body);

std::string render_prefix(const ControlCodes& codes);

struct PrefixParse {
  ControlCodes codes;
  std::string remainder;
};

// Consumes exactly the control-code lines at the start of `text`.
PrefixParse parse_prefix(std::string_view text);

}  // namespace tunes
