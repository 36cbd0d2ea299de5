#pragma once

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "backstory/error.hpp"

namespace backstory::util {

using OrderedJson = nlohmann::ordered_json;

// Canonical single-line serialization: insertion-ordered keys, no spaces,
// UTF-8 passed through unescaped.
inline std::string dump_line(const OrderedJson& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

inline std::ofstream open_for_write(const std::filesystem::path& path,
                                    bool append = false) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, append ? std::ios::app | std::ios::binary
                                 : std::ios::trunc | std::ios::binary);
  if (!out) {
    throw IoError("cannot open '" + path.string() +
                  "' for writing: " + std::strerror(errno));
  }
  return out;
}

// Calls fn(json, line_number) for each non-blank line.
inline void for_each_jsonl(
    const std::filesystem::path& path,
    const std::function<void(const OrderedJson&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() +
                  "' for reading: " + std::strerror(errno));
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    OrderedJson j;
    try {
      j = OrderedJson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), lineno,
                       line);
    }
    fn(j, lineno);
  }
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
}

}  // namespace backstory::util
