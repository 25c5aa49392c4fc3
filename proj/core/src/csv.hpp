#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace d2t::detail {

struct CsvRow {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the row starts
};

// RFC 4180: comma separated, fields optionally double-quoted, "" escapes a
// quote, quoted fields may span lines. Throws ParseError on an unterminated
// quote.
std::vector<CsvRow> read_csv(std::string_view text);

}  // namespace d2t::detail
