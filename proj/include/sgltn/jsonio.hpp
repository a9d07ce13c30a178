#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "sgltn/tensor.hpp"

namespace sgltn {

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  check(bool(in), "cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // report the line of the offending byte
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw Error(path + ":" + std::to_string(line) + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  check(bool(out), "cannot write " + path);
  out << j.dump(2) << "\n";
  check(bool(out), "write failed for " + path);
}

// Rejects config objects carrying keys outside the expected set.
inline void reject_unknown_keys(const nlohmann::json& obj, const std::vector<std::string>& known,
                                const std::string& where) {
  check(obj.is_object(), where + ": expected a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& k : known) ok = ok || (it.key() == k);
    check(ok, where + ": unknown key \"" + it.key() + "\"");
  }
}

}  // namespace sgltn
