#pragma once

#include <string>
#include <vector>

namespace bspm {

/// Writes content to path atomically (temp file in the same directory,
/// then rename). Throws DataError on I/O failure.
void atomic_write_file(const std::string& path, const std::string& content);

/// Reads a whole file. Throws DataError if the file cannot be opened.
std::string read_file(const std::string& path);

/// Splits one CSV line on commas. No quoting; fields are trimmed of
/// surrounding whitespace and '\r'.
std::vector<std::string> split_csv_line(const std::string& line);

/// Parses a double, rejecting trailing garbage and non-finite text.
/// Throws DataError naming context on failure.
double parse_double(const std::string& text, const std::string& context);

/// Parses a non-negative integer. Throws DataError on failure.
long parse_long(const std::string& text, const std::string& context);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

} // namespace bspm
