#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mmot {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Strict parse of a full token; throws ParseError.
double parse_double(std::string_view token);
long long parse_integer(std::string_view token);

std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

/// Reads the next line with any `#` comment removed that is not blank.
bool next_content_line(std::istream& in, std::string& line);

/// Parses `<magic> v1 key=value ...`; throws ParseError on a wrong magic or version.
std::map<std::string, std::string> parse_header(std::string_view line, std::string_view magic);
const std::string& header_field(const std::map<std::string, std::string>& fields,
                                const std::string& key);

}  // namespace mmot
