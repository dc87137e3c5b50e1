#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "castkit/json_util.hpp"
#include "castkit/stats.hpp"
#include "castkit/test_config.hpp"

namespace castkit::subjective {

inline constexpr int kSubmissionSchemaVersion = 1;

struct Answer {
  int choice = 0;
  std::string justification;
};

/// One judger's response to one test page.
struct SubmissionRecord {
  std::string submission_id;  // assigned by the service
  std::string test_id;
  std::string judger_id;
  std::string page_id;
  TestKind kind = TestKind::Mushra;
  std::map<std::string, double> ratings;  // mushra: stimulus id -> 0..100
  std::map<std::string, Answer> answers;  // questionnaire: question id -> answer
  std::string started_at;
  std::string submitted_at;
  std::string received_at;  // assigned by the service
};

/// Schema check with field paths in errors (e.g. "answers.Q3.choice").
SubmissionRecord parse_submission(const json& j);
json to_json(const SubmissionRecord& s);

/// Checks a submission against its test: page exists, kind matches, every
/// stimulus/question answered within range, and justifications present when
/// the test requires them. Errors name the offending field.
void validate_submission(const SubmissionRecord& s, const TestConfig& config);

std::vector<SubmissionRecord> read_submissions(const std::filesystem::path& path);

/// Which hidden stimulus on a MUSHRA page is the high and the low anchor.
struct AnchorLabels {
  std::string hq;
  std::string lq;
};
using AnchorMap = std::map<std::string, AnchorLabels>;  // page id -> anchors

AnchorMap anchors_from_config(const TestConfig& config);

struct JudgerStats {
  std::string judger_id;
  std::size_t pages = 0;
  double lq_last_pct = 0;  // LQ strictly lowest
  double hq_top2_pct = 0;  // at most one stimulus rated above HQ
};

/// Statistics over one judger's MUSHRA submissions.
JudgerStats compute_judger_stats(std::span<const SubmissionRecord> submissions, const AnchorMap& anchors);

/// Stats for every judger found in `submissions` (MUSHRA pages only).
std::map<std::string, JudgerStats> compute_all_judger_stats(std::span<const SubmissionRecord> submissions,
                                                            const AnchorMap& anchors);

struct FilterResult {
  std::vector<std::string> kept;
  std::vector<std::string> excluded;
};

/// A judger is kept when lq_last_pct >= lq_threshold and
/// hq_top2_pct > hq_threshold.
FilterResult filter_judgers(const std::map<std::string, JudgerStats>& stats, double lq_threshold = 90.0,
                            double hq_threshold = 50.0);

std::vector<SubmissionRecord> keep_judgers(std::span<const SubmissionRecord> submissions,
                                           const std::vector<std::string>& kept);

struct MushraAggregate {
  std::map<std::string, stats::BoxStats> per_system;
  std::map<std::string, std::map<std::string, stats::BoxStats>> per_judger;  // judger -> system -> stats
  std::size_t judgers = 0;
  std::size_t pages = 0;
};

/// Pools every rating by system label across pages and judgers.
MushraAggregate aggregate_mushra(std::span<const SubmissionRecord> kept, const TestConfig& config);

/// Question id -> expected answer (integer choice or scale label).
using AttentionKey = std::map<std::string, json>;

struct AttentionResult {
  bool pass = true;
  std::vector<std::string> failures;  // question ids
};

/// A missing answer counts as a failure. `questions` resolves label-valued
/// keys; may be empty when every key is an integer.
AttentionResult validate_attention(const SubmissionRecord& submission, const AttentionKey& key,
                                   std::span<const Question> questions = {});

enum class AttentionPolicy { WarnOnly, Exclude };

struct AttentionScreen {
  std::vector<SubmissionRecord> kept;
  std::map<std::string, std::vector<std::string>> failed;  // submission/page key -> question ids
};

AttentionScreen apply_attention_policy(std::span<const SubmissionRecord> submissions, const TestConfig& config,
                                       AttentionPolicy policy = AttentionPolicy::Exclude);

/// (system, question) -> mean score.
using MosGrid = std::map<std::pair<std::string, std::string>, double>;

/// Mean direct scores of Scale5 questions per system. A question that is an
/// attention check on a page does not contribute from that page.
MosGrid direct_mos(std::span<const SubmissionRecord> submissions, const TestConfig& config);

struct CombinedCell {
  double value = 0;
  bool direct_only = false;  // no justification score for this cell
};

/// Cell-wise mean of direct and justification-based scores.
std::map<std::pair<std::string, std::string>, CombinedCell> combine_mos(const MosGrid& direct,
                                                                       const MosGrid& justification);

/// Comments for one question grouped by system, for justification scoring.
std::map<std::string, std::vector<std::string>> collect_justifications(std::span<const SubmissionRecord> submissions,
                                                                       const TestConfig& config,
                                                                       const std::string& question_id);

json to_json(const JudgerStats& s);
json to_json(const stats::BoxStats& b);
json to_json(const MushraAggregate& a);

}  // namespace castkit::subjective
