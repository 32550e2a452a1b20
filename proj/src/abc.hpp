#pragma once

// ABC notation: tune parsing, text normalization and the section/bar
// structure that the form control codes are computed from.

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace tunes {

struct Field {
  char tag = 0;
  std::string value;

  bool operator==(const Field&) const = default;
};

struct AbcTune {
  std::vector<Field> fields;  // header fields in source order
  std::string body;           // lines after K:, joined by '\n', no trailing newline

  // First value with the given tag, or nullptr.
  const std::string* field(char tag) const;

  bool operator==(const AbcTune&) const = default;
};

// Section boundary symbols. EndOfBody is only ever a section terminator.
enum class Boundary {
  SectionOpen,   // [|
  Double,        // ||
  Final,         // |]
  RepeatOpen,    // |:
  RepeatBoth,    // ::
  RepeatClose,   // :|
  EndOfBody,
};

std::string_view boundary_symbol(Boundary kind);

struct SectionBoundary {
  Boundary kind;
  std::size_t offset;

  bool operator==(const SectionBoundary&) const = default;
};

// A piece of the body between two boundaries. `offset` is the byte index of
// `text` inside the body.
struct Section {
  std::string text;
  std::vector<std::string> bars;
  Boundary terminator = Boundary::EndOfBody;
  std::size_t offset = 0;
};

// Tags kept by strip_fields() by default: the machine-interpretable header.
const std::set<char>& structural_tags();

// Parses one tune. Comment lines (starting with '%') and blank lines are
// dropped, line endings are normalized to LF and trailing whitespace is
// trimmed. Everything up to and including the first K: line is header.
AbcTune parse_tune(std::string_view text);

// Canonical text form of a tune; serialize(parse_tune(t)) == normalize(t).
std::string normalize(std::string_view text);

std::string serialize(const AbcTune& tune);

// Splits a multi-tune file into per-tune chunks at blank lines. Chunks made
// only of comment lines are discarded.
std::vector<std::string> split_tune_texts(std::string_view text);

AbcTune strip_fields(const AbcTune& tune, const std::set<char>& keep = structural_tags());

// Left-to-right scan for the six two-character boundary symbols. Quoted
// strings ("...") and inline fields ([K:...]) are skipped.
std::vector<SectionBoundary> scan_boundaries(std::string_view body);

// Every span between boundaries, including blank ones. Concatenating
// text + boundary_symbol(terminator) over the result rebuilds the body.
std::vector<Section> scan_segments(std::string_view body);

// Non-blank sections with their bars filled in.
std::vector<Section> split_sections(std::string_view body);

// Splits at single '|' characters; blank fragments are dropped.
std::vector<std::string> split_bars(std::string_view section_text);
std::vector<std::string> split_bars(const Section& section);

}  // namespace tunes
