#pragma once

#include <array>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "castkit/error.hpp"
#include "castkit/json_util.hpp"
#include "castkit/text.hpp"

namespace castkit::judge {

/// The model kept answering outside the response schema.
class ModelResponseError : public ParseError {
 public:
  ModelResponseError(const std::string& what, std::string raw, int attempts)
      : ParseError(what), raw_(std::move(raw)), attempts_(attempts) {}
  const std::string& raw_response() const { return raw_; }
  int attempts() const { return attempts_; }

 private:
  std::string raw_;
  int attempts_;
};

struct JudgeConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  int max_retries = 2;
  double timeout_s = 60.0;
  int parallelism = 2;  // concurrent requests

  void validate() const;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

/// A chat-completion backend. Implementations must be safe to call from
/// several threads at once.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the assistant message text. Throws TransportError on failure.
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

/// OpenAI-style HTTP chat completion:
///   POST <endpoint_url> {"model", "messages", "temperature"}
///   -> {"choices": [{"message": {"content": "..."}}]}
/// The bearer token is read from the environment variable named in the
/// config; no header is sent when it is unset.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(JudgeConfig config);
  std::string complete(const std::vector<ChatMessage>& messages) override;

  static json request_body(const JudgeConfig& config, const std::vector<ChatMessage>& messages);
  /// Extracts choices[0].message.content; throws ParseError otherwise.
  static std::string response_content(std::string_view body);

 private:
  JudgeConfig config_;
};

inline constexpr std::array<const char*, 6> kCriteria = {
    "coherence", "engagingness", "diversity", "informativeness", "speaker_difference", "overall"};

enum class PresentationOrder {
  Forward,       // script A shown first
  Swapped,       // script B shown first
  SwapAveraged,  // combination of both
};

std::string to_string(PresentationOrder order);

/// Integer scores in [-3, 3] per criterion. Positive values favour script B.
struct ComparativeVerdict {
  std::map<std::string, int> scores;
  std::string evidence;
  PresentationOrder order = PresentationOrder::Forward;
};

struct PairJudgement {
  ComparativeVerdict final_verdict;
  ComparativeVerdict forward;   // as returned, B presented second
  ComparativeVerdict swapped;   // as returned, B presented first (sign not flipped)
  std::string prompt_version;
  std::string model;
};

json to_json(const ComparativeVerdict& v);
json to_json(const PairJudgement& j);

/// Extracts the first balanced JSON object from a model response, tolerating
/// code fences and surrounding prose.
json extract_json_object(std::string_view text);

/// Parses one judging response. Every criterion must be present with an
/// integer in [-3, 3].
ComparativeVerdict parse_verdict(std::string_view response, PresentationOrder order);

std::string render_pair_prompt(const Script& first, const Script& second);

/// Judges B against A twice with the presentation order swapped and
/// combines per criterion as round_half_away((forward - swapped) / 2).
PairJudgement judge_pair(const Script& a, const Script& b, ChatClient& client, const JudgeConfig& config);

struct ScriptPair {
  std::string id;
  std::string category;
  Script a;
  Script b;
};

/// judge_pair over many pairs with at most config.parallelism in flight.
std::vector<PairJudgement> judge_batch(std::span<const ScriptPair> pairs, ChatClient& client,
                                       const JudgeConfig& config);

/// Per-category and overall means of the final verdict scores.
/// Result: category -> criterion -> mean; the key "Overall" spans all pairs.
std::map<std::string, std::map<std::string, double>> aggregate_verdicts(
    std::span<const ScriptPair> pairs, std::span<const PairJudgement> judgements);

struct JustificationScore {
  std::string summary;
  int score = 0;  // 1..5
};

struct JustificationRequest {
  std::string prompt;
  std::map<std::string, std::string> label_to_system;  // "System A" -> name
};

/// Systems with no comments are left out of the prompt.
JustificationRequest render_justification_prompt(const std::map<std::string, std::vector<std::string>>& comments,
                                                 const std::string& question);

std::map<std::string, JustificationScore> parse_justification_scores(std::string_view response,
                                                                    const JustificationRequest& request);

/// One request per question covering every system with comments. Responses
/// whose scores are not integers in [1, 5] are retried.
std::map<std::string, JustificationScore> score_justifications(
    const std::map<std::string, std::vector<std::string>>& comments, const std::string& question,
    ChatClient& client, const JudgeConfig& config);

}  // namespace castkit::judge
