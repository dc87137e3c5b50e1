#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace castkit {

using json = nlohmann::json;

/// One parsed line of a JSON-lines document, with its 1-based line number.
struct JsonLine {
  std::size_t line = 0;
  json value;
};

/// Parses a JSON-lines text. Blank lines are skipped. When `tolerate_torn_tail`
/// is set, an unparsable final line that is not newline-terminated is dropped
/// instead of raising (a writer crashed mid-append).
std::vector<JsonLine> parse_jsonl(std::string_view text, bool tolerate_torn_tail = false);
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path, bool tolerate_torn_tail = false);

/// Whole-document JSON parse; errors report line and column.
json parse_json_document(std::string_view text, const std::string& origin);
json read_json_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Rounds every floating-point number in `value` to `digits` significant
/// digits. Non-finite numbers become null.
json round_numbers(const json& value, int digits = 6);

/// Strongly-typed field access with field-path context in error messages.
const json& require_field(const json& obj, std::string_view key, std::string_view context);
std::string require_string(const json& obj, std::string_view key, std::string_view context);
double require_number(const json& obj, std::string_view key, std::string_view context);

}  // namespace castkit
