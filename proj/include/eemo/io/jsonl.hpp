#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eemo/error.hpp"
#include "eemo/io/table.hpp"
#include "eemo/text.hpp"

namespace eemo::io {

struct JsonLine {
  std::size_t line = 0;  // 1-based
  nlohmann::json value;
};

inline std::vector<JsonLine> parse_jsonl(std::string_view content, std::string_view source = "input") {
  std::vector<JsonLine> out;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    try {
      out.push_back({line_no, nlohmann::json::parse(line)});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kParse, std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<JsonLine> read_jsonl(const std::string& path) { return parse_jsonl(read_file(path), path); }

inline std::string to_jsonl(const std::vector<nlohmann::json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

}  // namespace eemo::io

namespace eemo::io {

// Per-line outcome; malformed lines become errors instead of aborting the read.
struct LenientLine {
  std::size_t line = 0;
  std::optional<nlohmann::json> value;
  std::string error;
};

inline std::vector<LenientLine> read_jsonl_lenient(const std::string& path) {
  std::vector<LenientLine> out;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(read_file(path), '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    LenientLine l{line_no, std::nullopt, {}};
    try {
      l.value = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      l.error = e.what();
    }
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace eemo::io
