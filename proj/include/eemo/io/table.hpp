#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "eemo/error.hpp"
#include "eemo/text.hpp"

namespace eemo::io {

// A small delimited-text reader shared by the lexicon, matrix, mapping and
// projection formats. Lines starting with '#' carry `key: value` directives;
// blank lines are skipped. The delimiter is a tab if the first data line
// contains one, otherwise a comma.
struct DelimitedTable {
  std::map<std::string, std::string> directives;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

inline DelimitedTable parse_delimited(std::string_view content) {
  DelimitedTable table;
  char delim = 0;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = text::trim(line.substr(1));
      const auto colon = body.find(':');
      if (colon != std::string_view::npos) {
        table.directives[text::lower(text::trim(body.substr(0, colon)))] =
            std::string(text::trim(body.substr(colon + 1)));
      }
      continue;
    }
    if (delim == 0) delim = line.find('\t') != std::string_view::npos ? '\t' : ',';
    std::vector<std::string> cells;
    for (auto& cell : text::split(line, delim)) cells.emplace_back(text::trim(cell));
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(line_no);
  }
  return table;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline DelimitedTable load_delimited(const std::string& path) {
  return parse_delimited(read_file(path));
}

inline double parse_real(std::string_view s, std::string_view context = {}) {
  s = text::trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw Error(ErrorKind::kParse,
                "not a finite number: '" + std::string(s) + "'" +
                    (context.empty() ? "" : " (" + std::string(context) + ")"));
  }
  return value;
}

}  // namespace eemo::io
