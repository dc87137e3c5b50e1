#include "castkit/json_util.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "castkit/error.hpp"

namespace castkit {

namespace {

// nlohmann reports a byte offset; convert it to line:column for humans.
std::string locate(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

bool is_blank(std::string_view s) {
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  return true;
}

}  // namespace

std::vector<JsonLine> parse_jsonl(std::string_view text, bool tolerate_torn_tail) {
  std::vector<JsonLine> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    const bool terminated = nl != std::string_view::npos;
    std::string_view line = text.substr(pos, terminated ? nl - pos : std::string_view::npos);
    ++line_no;
    pos = terminated ? nl + 1 : text.size();
    if (is_blank(line)) continue;
    try {
      out.push_back({line_no, json::parse(line)});
    } catch (const json::parse_error& e) {
      if (tolerate_torn_tail && !terminated) break;
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<JsonLine> read_jsonl(const std::filesystem::path& path, bool tolerate_torn_tail) {
  try {
    return parse_jsonl(read_text_file(path), tolerate_torn_tail);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json parse_json_document(std::string_view text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + locate(text, e.byte == 0 ? 0 : e.byte - 1) + ": " +
                     e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  return parse_json_document(read_text_file(path), path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed: " + path.string());
}

json round_numbers(const json& value, int digits) {
  if (value.is_number_float()) {
    const double v = value.get<double>();
    if (!std::isfinite(v)) return nullptr;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return std::strtod(buf, nullptr);
  }
  if (value.is_object()) {
    json out = json::object();
    for (auto it = value.begin(); it != value.end(); ++it) out[it.key()] = round_numbers(*it, digits);
    return out;
  }
  if (value.is_array()) {
    json out = json::array();
    for (const auto& v : value) out.push_back(round_numbers(v, digits));
    return out;
  }
  return value;
}

const json& require_field(const json& obj, std::string_view key, std::string_view context) {
  if (!obj.is_object()) throw ParseError(std::string(context) + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(std::string(context) + "." + std::string(key) + ": missing");
  return *it;
}

std::string require_string(const json& obj, std::string_view key, std::string_view context) {
  const json& v = require_field(obj, key, context);
  if (!v.is_string())
    throw ParseError(std::string(context) + "." + std::string(key) + ": expected a string");
  return v.get<std::string>();
}

double require_number(const json& obj, std::string_view key, std::string_view context) {
  const json& v = require_field(obj, key, context);
  if (!v.is_number())
    throw ParseError(std::string(context) + "." + std::string(key) + ": expected a number");
  return v.get<double>();
}

}  // namespace castkit
