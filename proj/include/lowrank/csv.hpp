#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lowrank {

using CsvRow = std::vector<std::string>;

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);

/// Header plus rows, CRLF line endings.
std::string format_csv(const CsvRow& header, const std::vector<CsvRow>& rows);
void write_csv(const std::filesystem::path& path, const CsvRow& header, const std::vector<CsvRow>& rows);

/// Parses CSV text into records (the header is the first record). Throws
/// ParseError on an unterminated quote or stray characters after a quote.
std::vector<CsvRow> parse_csv(std::string_view text);

/// Shortest text that parses back to exactly `v`.
std::string format_number(double v);

}  // namespace lowrank
