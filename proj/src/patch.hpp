#pragma once

// Bar patching: prefixed tune text -> fixed-width character patches.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tunes {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kDefaultPatchSize = 32;
inline constexpr int kDefaultMaxPatches = 128;  // 4096 / 32

// 3 specials, LF, and the 95 printable ASCII characters.
class Vocab {
 public:
  static constexpr int kSize = 99;

  static bool contains(char c) { return c == '\n' || (c >= ' ' && c <= '~'); }
  static int id(char c);  // throws UnknownChar
  static char ch(int id);  // only for character ids
  static bool is_char(int id) { return id >= 3 && id < kSize; }
  int size() const { return kSize; }
};

struct Patch {
  std::vector<int> ids;  // exactly P entries
  int content_len = 0;

  bool operator==(const Patch&) const = default;
};

struct PatchSequence {
  int patch_size = kDefaultPatchSize;
  std::vector<Patch> patches;  // BOS patch first, EOS patch last

  std::size_t size() const { return patches.size(); }
};

Patch make_patch(std::string_view text, int patch_size);
Patch special_patch(int id, int patch_size);

// Units without validation. Lines up to and including the first K: line are
// one unit each; after that every bar with its delimiter (and following
// whitespace) is a unit. Used for partial prompts.
std::vector<std::string> segment_units(std::string_view text);

// segment_units() for a complete prefixed tune: requires a K: line and a
// non-empty body, and every unit must fit in `patch_size` characters.
std::vector<std::string> segment(std::string_view prefixed_text, int patch_size = kDefaultPatchSize);

PatchSequence encode(std::string_view prefixed_text, const Vocab& vocab = Vocab{},
                     int patch_size = kDefaultPatchSize, int max_patches = kDefaultMaxPatches);

// Patch text without specials or padding.
std::string patch_text(const Patch& patch);

std::string decode(const PatchSequence& seq, const Vocab& vocab = Vocab{});

}  // namespace tunes
