#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "abc.hpp"
#include "trainer.hpp"

namespace fixtures {

inline std::string read(const std::string& name) {
  std::ifstream in(std::string(TUNES_TEST_DATA) + "/" + name, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string path(const std::string& name) { return std::string(TUNES_TEST_DATA) + "/" + name; }

// (X value, expected codes joined by spaces) per line of a .expected file.
inline std::vector<std::pair<std::string, std::string>> expected(const std::string& name) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(read(name));
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    out.emplace_back(line.substr(2, tab - 2), line.substr(tab + 1));
  }
  return out;
}

inline std::vector<tunes::SourceTune> sources(const std::string& text, const std::string& stem) {
  std::vector<tunes::SourceTune> out;
  int i = 0;
  for (auto& t : tunes::split_tune_texts(text)) out.push_back({stem + ":" + std::to_string(++i), t});
  return out;
}

}  // namespace fixtures
