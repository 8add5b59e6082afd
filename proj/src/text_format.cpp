#include "mmot/text_format.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <string>

#include "mmot/error.hpp"

namespace mmot {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

double parse_double(std::string_view token) {
  token = trim(token);
  if (token == "inf" || token == "+inf") return INFINITY;
  if (token == "-inf") return -INFINITY;
  double value = 0;
  const char* first = token.data();
  if (!token.empty() && token.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
    fail(ErrorKind::ParseError, "not a number: '" + std::string(token) + "'");
  }
  return value;
}

long long parse_integer(std::string_view token) {
  token = trim(token);
  long long value = 0;
  const char* first = token.data();
  if (!token.empty() && token.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
    fail(ErrorKind::ParseError, "not an integer: '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) {
    text.remove_prefix(1);
  }
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
    text.remove_suffix(1);
  }
  return text;
}

bool next_content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (!trim(line).empty()) return true;
  }
  return false;
}

std::map<std::string, std::string> parse_header(std::string_view line, std::string_view magic) {
  auto tokens = split_ws(line);
  if (tokens.size() < 2 || tokens[0] != magic) {
    fail(ErrorKind::ParseError, "expected header starting with '" + std::string(magic) + "'");
  }
  if (tokens[1] != "v1") {
    fail(ErrorKind::ParseError, "unsupported format version '" + std::string(tokens[1]) + "'");
  }
  std::map<std::string, std::string> fields;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    auto eq = tokens[i].find('=');
    if (eq == std::string_view::npos || eq == 0) {
      fail(ErrorKind::ParseError, "malformed header field '" + std::string(tokens[i]) + "'");
    }
    fields.emplace(std::string(tokens[i].substr(0, eq)), std::string(tokens[i].substr(eq + 1)));
  }
  return fields;
}

const std::string& header_field(const std::map<std::string, std::string>& fields,
                                const std::string& key) {
  auto it = fields.find(key);
  if (it == fields.end()) fail(ErrorKind::ParseError, "header is missing '" + key + "'");
  return it->second;
}

}  // namespace mmot
