#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace castkit {

/// Normalized word tokens. Never contains empty strings.
using TokenSequence = std::vector<std::string>;

/// Lowercases ASCII letters, splits on whitespace, strips leading and
/// trailing ASCII punctuation from each token and drops tokens left empty.
/// Intra-word apostrophes and hyphens survive; numbers are not expanded.
TokenSequence normalize_text(std::string_view text);

struct TranscriptTurn {
  std::string speaker_id;
  std::string text;
  std::optional<double> start_s;
  std::optional<double> end_s;
};

/// A conversation script: ordered turns plus the shared token stream.
class Script {
 public:
  Script() = default;
  explicit Script(std::vector<TranscriptTurn> turns);

  const std::vector<TranscriptTurn>& turns() const { return turns_; }
  const std::vector<TokenSequence>& turn_tokens() const { return turn_tokens_; }
  /// All turns' tokens concatenated in order.
  const TokenSequence& tokens() const { return tokens_; }

 private:
  std::vector<TranscriptTurn> turns_;
  std::vector<TokenSequence> turn_tokens_;
  TokenSequence tokens_;
};

/// Accepts JSON-lines turns ({"speaker_id"|"speaker", "text", "start"?, "end"?})
/// or tagged plain text, one "SPEAKER: text" per line. Untagged lines in the
/// plain form continue the previous turn.
Script parse_script(std::string_view text, const std::string& origin = "<script>");
Script read_script(const std::filesystem::path& path);

/// Plain text or JSON-lines turns, flattened to one token stream.
TokenSequence read_transcript_tokens(const std::filesystem::path& path);

}  // namespace castkit
