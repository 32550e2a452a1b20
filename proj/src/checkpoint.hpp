#pragma once

// Self-describing tensor container:
//
//   "TFCKPT01" | u32 version | u32 meta_len | meta (key=value lines)
//   | u32 count | count x { u32 name_len | name | u32 ndim | u32 dims[ndim] | f32 data[] }
//   | u64 FNV-1a of everything before it
//
// All integers and floats little-endian.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "model.hpp"

namespace tunes {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using Meta = std::map<std::string, std::string>;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> data;
};

struct Container {
  Meta meta;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

std::string format_meta(const Meta& meta);
Meta parse_meta(const std::string& text);

std::string encode_container(const Container& c);
Container decode_container(const std::string& bytes);  // throws BadCheckpoint

// Writes to "<path>.tmp" then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);  // throws Io naming the path

void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path);

// Model parameters as named tensors, and the inverse. The config travels in
// the meta under its own keys plus "config_digest".
Container model_container(const DualDecoderModel<float>& model, const Meta& extra = {});
std::unique_ptr<DualDecoderModel<float>> model_from_container(const Container& c);

void save_model(const std::string& path, const DualDecoderModel<float>& model, const Meta& extra = {});
std::unique_ptr<DualDecoderModel<float>> load_model(const std::string& path);

}  // namespace tunes
