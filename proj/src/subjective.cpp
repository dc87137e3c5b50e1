#include "castkit/subjective.hpp"

#include <algorithm>
#include <cmath>

#include "castkit/error.hpp"

namespace castkit::subjective {

namespace {

bool is_blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

std::string opt_string(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return "";
  if (!it->is_string()) throw ParseError(ctx + std::string(key) + ": expected a string");
  return it->get<std::string>();
}

}  // namespace

SubmissionRecord parse_submission(const json& j) {
  if (!j.is_object()) throw ParseError("submission: expected an object");
  if (auto it = j.find("schema_version"); it != j.end()) {
    if (!it->is_number_integer() || it->get<int>() != kSubmissionSchemaVersion)
      throw ParseError("schema_version: unsupported (expected " + std::to_string(kSubmissionSchemaVersion) + ")");
  }
  SubmissionRecord s;
  s.test_id = require_string(j, "test_id", "submission");
  s.judger_id = require_string(j, "judger_id", "submission");
  s.page_id = require_string(j, "page_id", "submission");
  if (s.judger_id.empty()) throw ParseError("submission.judger_id: empty");
  s.kind = parse_test_kind(require_string(j, "test_kind", "submission"));
  s.submission_id = opt_string(j, "submission_id", "submission.");
  s.started_at = opt_string(j, "started_at", "submission.");
  s.submitted_at = opt_string(j, "submitted_at", "submission.");
  s.received_at = opt_string(j, "received_at", "submission.");

  if (s.kind == TestKind::Mushra) {
    const json& ratings = require_field(j, "ratings", "submission");
    if (!ratings.is_object()) throw ParseError("submission.ratings: expected an object");
    for (auto it = ratings.begin(); it != ratings.end(); ++it) {
      if (!it->is_number()) throw ParseError("submission.ratings." + it.key() + ": expected a number");
      s.ratings[it.key()] = it->get<double>();
    }
  } else {
    const json& answers = require_field(j, "answers", "submission");
    if (!answers.is_object()) throw ParseError("submission.answers: expected an object");
    for (auto it = answers.begin(); it != answers.end(); ++it) {
      const std::string path = "submission.answers." + it.key();
      const json& choice = require_field(*it, "choice", path);
      if (!choice.is_number_integer() && !choice.is_number_unsigned())
        throw ParseError(path + ".choice: expected an integer");
      Answer a;
      a.choice = choice.get<int>();
      a.justification = opt_string(*it, "justification", path + ".");
      s.answers[it.key()] = std::move(a);
    }
  }
  return s;
}

json to_json(const SubmissionRecord& s) {
  json j = {{"schema_version", kSubmissionSchemaVersion},
            {"submission_id", s.submission_id},
            {"test_id", s.test_id},
            {"judger_id", s.judger_id},
            {"page_id", s.page_id},
            {"test_kind", to_string(s.kind)}};
  if (s.kind == TestKind::Mushra) {
    json r = json::object();
    for (const auto& [k, v] : s.ratings) r[k] = v;
    j["ratings"] = r;
  } else {
    json a = json::object();
    for (const auto& [k, v] : s.answers) a[k] = {{"choice", v.choice}, {"justification", v.justification}};
    j["answers"] = a;
  }
  if (!s.started_at.empty()) j["started_at"] = s.started_at;
  if (!s.submitted_at.empty()) j["submitted_at"] = s.submitted_at;
  if (!s.received_at.empty()) j["received_at"] = s.received_at;
  return j;
}

void validate_submission(const SubmissionRecord& s, const TestConfig& config) {
  if (s.test_id != config.test_id) throw ValidationError("test_id: '" + s.test_id + "' does not match the test");
  if (s.kind != config.kind) throw ValidationError("test_kind: expected " + to_string(config.kind));
  const Page* page = config.find_page(s.page_id);
  if (!page) throw ValidationError("page_id: unknown page '" + s.page_id + "'");

  if (s.kind == TestKind::Mushra) {
    for (const auto& st : page->stimuli)
      if (!s.ratings.count(st.stimulus_id)) throw ValidationError("ratings." + st.stimulus_id + ": missing");
    for (const auto& [id, v] : s.ratings) {
      const bool on_page = std::any_of(page->stimuli.begin(), page->stimuli.end(),
                                       [&](const Stimulus& st) { return st.stimulus_id == id; });
      if (!on_page) throw ValidationError("ratings." + id + ": not a rated stimulus of this page");
      if (!(v >= 0.0 && v <= 100.0)) throw ValidationError("ratings." + id + ": outside [0, 100]");
    }
    return;
  }
  for (const auto& q : config.questions) {
    auto it = s.answers.find(q.question_id);
    if (it == s.answers.end()) throw ValidationError("answers." + q.question_id + ": missing");
    if (it->second.choice < q.min || it->second.choice > q.max)
      throw ValidationError("answers." + q.question_id + ".choice: outside [" + std::to_string(q.min) + ", " +
                            std::to_string(q.max) + "]");
    if (config.require_justification && is_blank(it->second.justification))
      throw ValidationError("answers." + q.question_id + ".justification: required");
  }
  for (const auto& [qid, _] : s.answers)
    if (!config.find_question(qid)) throw ValidationError("answers." + qid + ": unknown question");
}

std::vector<SubmissionRecord> read_submissions(const std::filesystem::path& path) {
  std::vector<SubmissionRecord> out;
  for (const auto& line : read_jsonl(path, /*tolerate_torn_tail=*/true)) {
    try {
      out.push_back(parse_submission(line.value));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line.line) + ": " + e.what());
    }
  }
  return out;
}

AnchorMap anchors_from_config(const TestConfig& config) {
  AnchorMap out;
  if (config.kind != TestKind::Mushra) return out;
  for (const auto& p : config.pages) {
    AnchorLabels a;
    for (const auto& s : p.stimuli) {
      if (s.role == StimulusRole::HighAnchor) a.hq = s.stimulus_id;
      if (s.role == StimulusRole::LowAnchor) a.lq = s.stimulus_id;
    }
    out[p.page_id] = a;
  }
  return out;
}

JudgerStats compute_judger_stats(std::span<const SubmissionRecord> submissions, const AnchorMap& anchors) {
  JudgerStats st;
  std::size_t lq_last = 0, hq_top2 = 0;
  for (const auto& s : submissions) {
    if (s.kind != TestKind::Mushra) continue;
    if (st.pages == 0) st.judger_id = s.judger_id;
    else if (s.judger_id != st.judger_id) throw ValidationError("submissions from more than one judger");
    auto a = anchors.find(s.page_id);
    if (a == anchors.end() || a->second.hq.empty() || a->second.lq.empty())
      throw ValidationError("page '" + s.page_id + "' has no anchor labels");
    auto hq_it = s.ratings.find(a->second.hq);
    auto lq_it = s.ratings.find(a->second.lq);
    if (hq_it == s.ratings.end() || lq_it == s.ratings.end())
      throw ValidationError("page '" + s.page_id + "': anchor stimulus not rated by judger " + s.judger_id);

    bool lq_strictly_lowest = true;
    std::size_t above_hq = 0;
    for (const auto& [id, v] : s.ratings) {
      if (id != a->second.lq && v <= lq_it->second) lq_strictly_lowest = false;
      if (id != a->second.hq && v > hq_it->second) ++above_hq;
    }
    if (lq_strictly_lowest) ++lq_last;
    if (above_hq <= 1) ++hq_top2;
    ++st.pages;
  }
  if (st.pages == 0) throw ValidationError("no MUSHRA submissions to analyse");
  st.lq_last_pct = 100.0 * static_cast<double>(lq_last) / static_cast<double>(st.pages);
  st.hq_top2_pct = 100.0 * static_cast<double>(hq_top2) / static_cast<double>(st.pages);
  return st;
}

std::map<std::string, JudgerStats> compute_all_judger_stats(std::span<const SubmissionRecord> submissions,
                                                            const AnchorMap& anchors) {
  std::map<std::string, std::vector<SubmissionRecord>> by_judger;
  for (const auto& s : submissions)
    if (s.kind == TestKind::Mushra) by_judger[s.judger_id].push_back(s);
  std::map<std::string, JudgerStats> out;
  for (const auto& [judger, subs] : by_judger) out[judger] = compute_judger_stats(subs, anchors);
  return out;
}

FilterResult filter_judgers(const std::map<std::string, JudgerStats>& stats, double lq_threshold,
                            double hq_threshold) {
  for (double t : {lq_threshold, hq_threshold})
    if (!(t > 0.0 && t <= 100.0)) throw ValidationError("filter thresholds must lie in (0, 100]");
  FilterResult r;
  for (const auto& [judger, s] : stats) {
    const bool keep = s.lq_last_pct >= lq_threshold && s.hq_top2_pct > hq_threshold;
    (keep ? r.kept : r.excluded).push_back(judger);
  }
  return r;
}

std::vector<SubmissionRecord> keep_judgers(std::span<const SubmissionRecord> submissions,
                                           const std::vector<std::string>& kept) {
  std::vector<SubmissionRecord> out;
  for (const auto& s : submissions)
    if (std::find(kept.begin(), kept.end(), s.judger_id) != kept.end()) out.push_back(s);
  return out;
}

MushraAggregate aggregate_mushra(std::span<const SubmissionRecord> kept, const TestConfig& config) {
  std::map<std::string, std::vector<double>> pooled;
  std::map<std::string, std::map<std::string, std::vector<double>>> by_judger;
  std::set<std::string> judgers;
  MushraAggregate out;
  for (const auto& s : kept) {
    if (s.kind != TestKind::Mushra) continue;
    judgers.insert(s.judger_id);
    ++out.pages;
    for (const auto& [id, v] : s.ratings) {
      const Stimulus* st = config.find_stimulus(id);
      if (!st) throw ValidationError("rating for unknown stimulus '" + id + "'");
      pooled[st->label()].push_back(v);
      by_judger[s.judger_id][st->label()].push_back(v);
    }
  }
  if (pooled.empty()) throw ValidationError("no kept MUSHRA submissions to aggregate");
  for (const auto& [system, xs] : pooled) out.per_system[system] = stats::box(xs);
  for (const auto& [judger, per] : by_judger)
    for (const auto& [system, xs] : per) out.per_judger[judger][system] = stats::box(xs);
  out.judgers = judgers.size();
  return out;
}

AttentionResult validate_attention(const SubmissionRecord& submission, const AttentionKey& key,
                                   std::span<const Question> questions) {
  AttentionResult r;
  for (const auto& [qid, expected] : key) {
    auto it = submission.answers.find(qid);
    bool ok = false;
    if (it != submission.answers.end()) {
      const auto q = std::find_if(questions.begin(), questions.end(),
                                  [&](const Question& x) { return x.question_id == qid; });
      if (expected.is_string() && q == questions.end())
        throw ValidationError("attention key for " + qid + " is a label but the question is unknown");
      const int want = q != questions.end() ? resolve_expected_choice(*q, expected) : expected.get<int>();
      ok = it->second.choice == want;
    }
    if (!ok) r.failures.push_back(qid);
  }
  r.pass = r.failures.empty();
  return r;
}

AttentionScreen apply_attention_policy(std::span<const SubmissionRecord> submissions, const TestConfig& config,
                                       AttentionPolicy policy) {
  AttentionScreen out;
  for (const auto& s : submissions) {
    const Page* page = config.find_page(s.page_id);
    if (s.kind != TestKind::Questionnaire || !page || page->attention_keys.empty()) {
      out.kept.push_back(s);
      continue;
    }
    const auto r = validate_attention(s, page->attention_keys, config.questions);
    if (!r.pass) out.failed[s.judger_id + "/" + s.page_id] = r.failures;
    if (r.pass || policy == AttentionPolicy::WarnOnly) out.kept.push_back(s);
  }
  return out;
}

MosGrid direct_mos(std::span<const SubmissionRecord> submissions, const TestConfig& config) {
  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> acc;
  for (const auto& s : submissions) {
    if (s.kind != TestKind::Questionnaire) continue;
    const Page* page = config.find_page(s.page_id);
    if (!page) throw ValidationError("submission for unknown page '" + s.page_id + "'");
    const std::string system = page->stimuli.front().label();
    for (const auto& [qid, a] : s.answers) {
      const Question* q = config.find_question(qid);
      if (!q || q->type != Question::Type::Scale5 || page->attention_keys.count(qid)) continue;
      auto& [sum, n] = acc[{system, qid}];
      sum += a.choice;
      ++n;
    }
  }
  MosGrid out;
  for (const auto& [cell, sn] : acc) out[cell] = sn.first / static_cast<double>(sn.second);
  return out;
}

std::map<std::pair<std::string, std::string>, CombinedCell> combine_mos(const MosGrid& direct,
                                                                       const MosGrid& justification) {
  if (direct.empty()) throw ValidationError("empty MOS grid");
  for (const auto& [cell, _] : justification)
    if (!direct.count(cell))
      throw ValidationError("justification score for " + cell.first + "/" + cell.second + " has no direct score");
  std::map<std::pair<std::string, std::string>, CombinedCell> out;
  for (const auto& [cell, d] : direct) {
    auto it = justification.find(cell);
    if (it == justification.end()) out[cell] = {d, true};
    else out[cell] = {(d + it->second) / 2.0, false};
  }
  return out;
}

std::map<std::string, std::vector<std::string>> collect_justifications(std::span<const SubmissionRecord> submissions,
                                                                       const TestConfig& config,
                                                                       const std::string& question_id) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& s : submissions) {
    if (s.kind != TestKind::Questionnaire) continue;
    const Page* page = config.find_page(s.page_id);
    if (!page || page->attention_keys.count(question_id)) continue;
    auto it = s.answers.find(question_id);
    if (it == s.answers.end() || is_blank(it->second.justification)) continue;
    out[page->stimuli.front().label()].push_back(it->second.justification);
  }
  return out;
}

json to_json(const JudgerStats& s) {
  return {{"judger_id", s.judger_id}, {"pages", s.pages}, {"lq_last_pct", s.lq_last_pct}, {"hq_top2_pct", s.hq_top2_pct}};
}

json to_json(const stats::BoxStats& b) {
  return {{"n", b.n}, {"mean", b.mean}, {"median", b.median}, {"q1", b.q1}, {"q3", b.q3}, {"min", b.min}, {"max", b.max}};
}

json to_json(const MushraAggregate& a) {
  json systems = json::object();
  for (const auto& [k, b] : a.per_system) systems[k] = to_json(b);
  json judgers = json::object();
  for (const auto& [j, per] : a.per_judger)
    for (const auto& [k, b] : per) judgers[j][k] = to_json(b);
  return {{"judgers", a.judgers}, {"pages", a.pages}, {"systems", systems}, {"per_judger", judgers}};
}

}  // namespace castkit::subjective
