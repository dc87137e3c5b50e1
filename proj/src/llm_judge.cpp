#include "castkit/llm_judge.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>

#include "httplib.h"
#include "castkit/prompts.hpp"

namespace castkit::judge {

void JudgeConfig::validate() const {
  if (max_retries < 0) throw ValidationError("max_retries must be >= 0");
  if (!(timeout_s > 0)) throw ValidationError("timeout must be positive");
  if (parallelism < 1) throw ValidationError("parallelism must be >= 1");
  if (endpoint_url.empty()) throw ValidationError("endpoint URL is empty");
}

HttpChatClient::HttpChatClient(JudgeConfig config) : config_(std::move(config)) { config_.validate(); }

json HttpChatClient::request_body(const JudgeConfig& config, const std::vector<ChatMessage>& messages) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", config.model}, {"messages", msgs}, {"temperature", config.temperature}};
}

std::string HttpChatClient::response_content(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("chat response is not JSON: ") + e.what());
  }
  try {
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw ParseError("chat response lacks choices[0].message.content");
  }
}

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages) {
  const std::string& url = config_.endpoint_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  const auto secs = static_cast<time_t>(config_.timeout_s);
  const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  auto res = client.Post(path, headers, request_body(config_, messages).dump(), "application/json");
  if (!res) throw TransportError("request to " + origin + " failed: " + httplib::to_string(res.error()), 1);
  if (res->status != 200)
    throw TransportError("chat endpoint returned HTTP " + std::to_string(res->status), 1);
  try {
    return response_content(res->body);
  } catch (const ParseError& e) {
    throw TransportError(e.what(), 1);
  }
}

std::string to_string(PresentationOrder order) {
  switch (order) {
    case PresentationOrder::Forward: return "forward";
    case PresentationOrder::Swapped: return "swapped";
    case PresentationOrder::SwapAveraged: return "swap_averaged";
  }
  return "?";
}

json to_json(const ComparativeVerdict& v) {
  json scores = json::object();
  for (const auto& [k, s] : v.scores) scores[k] = s;
  return {{"scores", scores}, {"evidence", v.evidence}, {"order", to_string(v.order)}};
}

json to_json(const PairJudgement& j) {
  return {{"final", to_json(j.final_verdict)},
          {"forward", to_json(j.forward)},
          {"swapped", to_json(j.swapped)},
          {"prompt_version", j.prompt_version},
          {"model", j.model}};
}

json extract_json_object(std::string_view text) {
  const auto open = text.find('{');
  if (open == std::string_view::npos) throw ParseError("response contains no JSON object");
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) {
      try {
        return json::parse(text.substr(open, i - open + 1));
      } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON object in response: ") + e.what());
      }
    }
  }
  throw ParseError("unterminated JSON object in response");
}

namespace {

bool is_integer(const json& v) { return v.is_number_integer() || v.is_number_unsigned(); }

std::string render_script(const Script& s) {
  std::string out;
  for (const auto& t : s.turns()) {
    out += t.speaker_id;
    out += ": ";
    out += t.text;
    out += '\n';
  }
  return out;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

// Sends the request until `parse` accepts the answer or the retry budget is
// spent. Transport failures and schema violations share the budget.
template <class Parse>
auto ask(ChatClient& client, const std::vector<ChatMessage>& messages, const JudgeConfig& config, Parse parse)
    -> decltype(parse(std::string())) {
  const int attempts = config.max_retries + 1;
  std::string last_raw, last_error;
  bool last_was_transport = false;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    std::string raw;
    try {
      raw = client.complete(messages);
    } catch (const TransportError& e) {
      last_error = e.what();
      last_was_transport = true;
      continue;
    }
    try {
      return parse(raw);
    } catch (const Error& e) {
      last_raw = std::move(raw);
      last_error = e.what();
      last_was_transport = false;
    }
  }
  if (last_was_transport)
    throw TransportError(last_error + " (after " + std::to_string(attempts) + " attempts)", attempts);
  throw ModelResponseError(last_error + " (after " + std::to_string(attempts) + " attempts)", last_raw, attempts);
}

}  // namespace

ComparativeVerdict parse_verdict(std::string_view response, PresentationOrder order) {
  const json obj = extract_json_object(response);
  if (!obj.contains("scores") || !obj["scores"].is_object()) throw ParseError("response lacks a \"scores\" object");
  const json& scores = obj["scores"];
  ComparativeVerdict v;
  v.order = order;
  for (const char* c : kCriteria) {
    auto it = scores.find(c);
    if (it == scores.end()) throw ParseError(std::string("response lacks score for \"") + c + "\"");
    if (!is_integer(*it)) throw ParseError(std::string("score for \"") + c + "\" is not an integer");
    const auto s = it->get<long long>();
    if (s < -3 || s > 3) throw ParseError(std::string("score for \"") + c + "\" outside [-3, 3]");
    v.scores[c] = static_cast<int>(s);
  }
  if (auto it = obj.find("evidence"); it != obj.end())
    v.evidence = it->is_string() ? it->get<std::string>() : it->dump();
  return v;
}

std::string render_pair_prompt(const Script& first, const Script& second) {
  std::string prompt = prompts::kJudgePair;
  replace_all(prompt, "{{SCRIPT_1}}", render_script(first));
  replace_all(prompt, "{{SCRIPT_2}}", render_script(second));
  return prompt;
}

PairJudgement judge_pair(const Script& a, const Script& b, ChatClient& client, const JudgeConfig& config) {
  config.validate();
  auto run = [&](const Script& first, const Script& second, PresentationOrder order) {
    const std::vector<ChatMessage> messages = {{"user", render_pair_prompt(first, second)}};
    return ask(client, messages, config, [order](const std::string& raw) { return parse_verdict(raw, order); });
  };

  PairJudgement j;
  j.prompt_version = prompts::kJudgePairVersion;
  j.model = config.model;
  if (config.parallelism > 1) {
    auto swapped = std::async(std::launch::async, run, std::cref(b), std::cref(a), PresentationOrder::Swapped);
    j.forward = run(a, b, PresentationOrder::Forward);
    j.swapped = swapped.get();
  } else {
    j.forward = run(a, b, PresentationOrder::Forward);
    j.swapped = run(b, a, PresentationOrder::Swapped);
  }

  j.final_verdict.order = PresentationOrder::SwapAveraged;
  for (const char* c : kCriteria) {
    const double mean = (j.forward.scores.at(c) - j.swapped.scores.at(c)) / 2.0;
    j.final_verdict.scores[c] = static_cast<int>(std::round(mean));  // half away from zero
  }
  j.final_verdict.evidence = "[forward] " + j.forward.evidence + "\n[swapped] " + j.swapped.evidence;
  return j;
}

std::vector<PairJudgement> judge_batch(std::span<const ScriptPair> pairs, ChatClient& client,
                                       const JudgeConfig& config) {
  config.validate();
  std::vector<PairJudgement> out(pairs.size());
  std::vector<std::exception_ptr> errors(pairs.size());
  // Each pair already issues its two requests concurrently when allowed.
  JudgeConfig inner = config;
  const int workers_wanted = std::max(1, config.parallelism / 2);
  inner.parallelism = config.parallelism >= 2 ? 2 : 1;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < pairs.size();) {
      try {
        out[i] = judge_pair(pairs[i].a, pairs[i].b, client, inner);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(workers_wanted), pairs.size());
  for (std::size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::map<std::string, std::map<std::string, double>> aggregate_verdicts(std::span<const ScriptPair> pairs,
                                                                        std::span<const PairJudgement> judgements) {
  if (pairs.size() != judgements.size()) throw ValidationError("pairs and judgements differ in count");
  if (pairs.empty()) throw ValidationError("no judgements to aggregate");
  std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> acc;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (const auto& [criterion, score] : judgements[i].final_verdict.scores) {
      for (const std::string& key : {std::string("Overall"), pairs[i].category}) {
        auto& [sum, n] = acc[key][criterion];
        sum += score;
        ++n;
      }
    }
  }
  std::map<std::string, std::map<std::string, double>> out;
  for (const auto& [category, per] : acc)
    for (const auto& [criterion, sn] : per) out[category][criterion] = sn.first / static_cast<double>(sn.second);
  return out;
}

JustificationRequest render_justification_prompt(const std::map<std::string, std::vector<std::string>>& comments,
                                                 const std::string& question) {
  JustificationRequest req;
  std::string block;
  int index = 0;
  for (const auto& [system, list] : comments) {
    std::vector<std::string> kept;
    for (const auto& c : list)
      if (c.find_first_not_of(" \t\r\n") != std::string::npos) kept.push_back(c);
    if (kept.empty()) continue;
    std::string label = "System ";
    if (index < 26) {
      label += static_cast<char>('A' + index);
    } else {
      label += std::to_string(index + 1);
    }
    ++index;
    req.label_to_system[label] = system;
    block += "[" + label + "]\n";
    for (const auto& c : kept) block += "- " + c + "\n";
    block += "\n";
  }
  if (req.label_to_system.empty()) throw ValidationError("no system has any justification comment");
  req.prompt = prompts::kJustification;
  replace_all(req.prompt, "{{QUESTION}}", question);
  replace_all(req.prompt, "{{COMMENTS}}", block);
  return req;
}

std::map<std::string, JustificationScore> parse_justification_scores(std::string_view response,
                                                                    const JustificationRequest& request) {
  const json obj = extract_json_object(response);
  if (!obj.contains("systems") || !obj["systems"].is_object())
    throw ParseError("response lacks a \"systems\" object");
  const json& systems = obj["systems"];
  std::map<std::string, JustificationScore> out;
  for (const auto& [label, system] : request.label_to_system) {
    auto it = systems.find(label);
    if (it == systems.end() || !it->is_object()) throw ParseError("response lacks entry for \"" + label + "\"");
    const json& entry = *it;
    if (!entry.contains("score") || !is_integer(entry["score"]))
      throw ParseError("score for \"" + label + "\" is not an integer");
    const auto score = entry["score"].get<long long>();
    if (score < 1 || score > 5) throw ParseError("score for \"" + label + "\" outside [1, 5]");
    if (!entry.contains("summary") || !entry["summary"].is_string())
      throw ParseError("summary for \"" + label + "\" missing");
    out[system] = {entry["summary"].get<std::string>(), static_cast<int>(score)};
  }
  return out;
}

std::map<std::string, JustificationScore> score_justifications(
    const std::map<std::string, std::vector<std::string>>& comments, const std::string& question,
    ChatClient& client, const JudgeConfig& config) {
  config.validate();
  const JustificationRequest req = render_justification_prompt(comments, question);
  const std::vector<ChatMessage> messages = {{"user", req.prompt}};
  return ask(client, messages, config,
             [&req](const std::string& raw) { return parse_justification_scores(raw, req); });
}

}  // namespace castkit::judge
