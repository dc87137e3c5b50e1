#include "castkit/text.hpp"

#include <algorithm>
#include <cctype>

#include "castkit/error.hpp"
#include "castkit/json_util.hpp"

namespace castkit {

namespace {

bool is_ascii_punct(char c) { return static_cast<unsigned char>(c) < 0x80 && std::ispunct(static_cast<unsigned char>(c)); }

bool looks_like_jsonl(std::string_view text) {
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    return c == '{';
  }
  return false;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> optional_number(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ParseError(std::string(key) + ": expected a number");
  return it->get<double>();
}

}  // namespace

TokenSequence normalize_text(std::string_view text) {
  TokenSequence out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && is_ascii_punct(text[b])) ++b;
    while (e > b && is_ascii_punct(text[e - 1])) --e;
    if (b < e) {
      std::string tok(text.substr(b, e - b));
      for (char& c : tok)
        if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

Script::Script(std::vector<TranscriptTurn> turns) : turns_(std::move(turns)) {
  for (const auto& t : turns_) {
    turn_tokens_.push_back(normalize_text(t.text));
    tokens_.insert(tokens_.end(), turn_tokens_.back().begin(), turn_tokens_.back().end());
  }
  if (tokens_.empty()) throw ValidationError("script has no non-empty turn");
}

Script parse_script(std::string_view text, const std::string& origin) {
  std::vector<TranscriptTurn> turns;
  if (looks_like_jsonl(text)) {
    for (const auto& line : parse_jsonl(text)) {
      const std::string ctx = origin + ":" + std::to_string(line.line);
      TranscriptTurn t;
      if (line.value.contains("speaker_id"))
        t.speaker_id = require_string(line.value, "speaker_id", ctx);
      else
        t.speaker_id = require_string(line.value, "speaker", ctx);
      t.text = require_string(line.value, "text", ctx);
      try {
        t.start_s = optional_number(line.value, "start");
        t.end_s = optional_number(line.value, "end");
      } catch (const ParseError& e) {
        throw ParseError(ctx + ": " + e.what());
      }
      turns.push_back(std::move(t));
    }
  } else {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view line = trim(text.substr(pos, nl - pos));
      pos = nl + 1;
      if (line.empty()) continue;
      const std::size_t colon = line.find(':');
      // Speaker tags are short: at most three words and 40 characters.
      bool tagged = colon != std::string_view::npos && colon > 0 && colon <= 40;
      if (tagged) {
        const auto tag = line.substr(0, colon);
        tagged = std::count(tag.begin(), tag.end(), ' ') <= 2;
      }
      if (tagged) {
        turns.push_back({std::string(trim(line.substr(0, colon))),
                         std::string(trim(line.substr(colon + 1))), std::nullopt, std::nullopt});
      } else if (!turns.empty()) {
        turns.back().text += " ";
        turns.back().text += line;
      } else {
        throw ParseError(origin + ": first line is not of the form 'SPEAKER: text'");
      }
    }
  }
  if (turns.empty()) throw ValidationError(origin + ": script has no turns");
  try {
    return Script(std::move(turns));
  } catch (const ValidationError& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

Script read_script(const std::filesystem::path& path) {
  return parse_script(read_text_file(path), path.string());
}

TokenSequence read_transcript_tokens(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  if (!looks_like_jsonl(text)) return normalize_text(text);
  TokenSequence out;
  for (const auto& line : parse_jsonl(text)) {
    auto toks = normalize_text(require_string(line.value, "text", path.string() + ":" + std::to_string(line.line)));
    out.insert(out.end(), toks.begin(), toks.end());
  }
  return out;
}

}  // namespace castkit
