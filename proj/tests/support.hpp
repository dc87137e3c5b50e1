// Shared fixtures and reference implementations for the test binaries. The
// oracles here are written separately from the library code on purpose and
// favour the most literal formulation over speed.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "castkit/audio.hpp"
#include "castkit/json_util.hpp"
#include "castkit/segments.hpp"
#include "castkit/speech_metrics.hpp"
#include "castkit/subjective.hpp"
#include "castkit/test_config.hpp"

namespace castkit::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> n{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("castkit_test_" + std::to_string(stamp) + "_" + std::to_string(n++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline AudioBuffer sine(double freq, double amplitude, double seconds, int rate = 48000, int channels = 1,
                        double phase = 0.0) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  std::vector<float> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = static_cast<float>(amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate + phase));
  return AudioBuffer(std::vector<std::vector<float>>(static_cast<std::size_t>(channels), x), rate);
}

inline double db_to_amp(double db) { return std::pow(10.0, db / 20.0); }

inline double rms(std::span<const float> x) {
  double s = 0;
  for (float v : x) s += static_cast<double>(v) * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

// ---- oracles ---------------------------------------------------------------

/// Textbook Levenshtein distance over word sequences (two-row formulation).
inline std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double oracle_cos(const std::vector<double>& a, const std::vector<double>& b) {
  return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
}

/// One minus the mean cosine over every ordered pair of distinct speakers.
inline double oracle_sptd(const std::vector<std::vector<double>>& speakers) {
  const std::size_t n = speakers.size();
  double sum = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        sum += oracle_cos(speakers[i], speakers[j]);
        ++pairs;
      }
  return 1.0 - sum / static_cast<double>(pairs);
}

inline double oracle_distinct(const std::vector<std::string>& t, std::size_t n) {
  std::set<std::vector<std::string>> seen;
  const std::size_t total = t.size() - n + 1;
  for (std::size_t i = 0; i < total; ++i) seen.insert(std::vector<std::string>(t.begin() + i, t.begin() + i + n));
  return static_cast<double>(seen.size()) / static_cast<double>(total);
}

inline double oracle_mattr(const std::vector<std::string>& t, std::size_t w) {
  double sum = 0;
  const std::size_t windows = t.size() - w + 1;
  for (std::size_t i = 0; i < windows; ++i) {
    std::set<std::string> types(t.begin() + i, t.begin() + i + w);
    sum += static_cast<double>(types.size()) / static_cast<double>(w);
  }
  return sum / static_cast<double>(windows);
}

inline double oracle_entropy(const std::vector<std::string>& t) {
  std::map<std::string, double> counts;
  for (const auto& w : t) counts[w] += 1;
  double h = 0;
  for (const auto& [_, c] : counts) {
    const double p = c / static_cast<double>(t.size());
    h -= p * std::log2(p);
  }
  return h;
}

/// Speaker changes among segments whose start lies in [start, end).
inline std::size_t oracle_changes(const std::vector<segments::DiarizationSegment>& segs, double start, double end) {
  std::vector<std::string> order;
  for (const auto& s : segs)
    if (s.start_s >= start - 1e-9 && s.start_s < end - 1e-9) order.push_back(s.speaker_id);
  std::size_t c = 0;
  for (std::size_t i = 1; i < order.size(); ++i) c += order[i] != order[i - 1];
  return c;
}

inline std::vector<segments::DiarizationSegment> alternating_turns(double turn_s, double total_s, double gap_s = 0.0,
                                                                    std::vector<std::string> speakers = {"A", "B"}) {
  std::vector<segments::DiarizationSegment> out;
  std::size_t k = 0;
  for (double t = 0; t + turn_s <= total_s + 1e-9; t += turn_s, ++k)
    out.push_back({speakers[k % speakers.size()], t, t + turn_s - gap_s});
  return out;
}

// ---- listening-test fixtures ---------------------------------------------------

inline constexpr int kPanelPages = 17;

struct PanelRow {
  int judger;
  double lq_last_pct;
  double hq_top2_pct;
};

/// Per-judger anchor statistics of a 20-judger, 17-page dialogue test.
inline const std::vector<PanelRow>& panel_stats() {
  static const std::vector<PanelRow> rows = {
      {1, 94.12, 88.24},  {2, 100, 88.24},   {3, 100, 58.82},   {4, 100, 58.82},   {5, 100, 94.12},
      {6, 100, 64.71},    {7, 100, 17.65},   {8, 100, 58.82},   {9, 100, 64.71},   {10, 100, 94.12},
      {11, 94.12, 94.12}, {12, 100, 82.35},  {13, 100, 64.71},  {14, 100, 82.35},  {15, 100, 88.24},
      {16, 100, 58.82},   {17, 100, 64.71},  {18, 76.47, 47.06}, {19, 100, 52.94}, {20, 100, 35.29}};
  return rows;
}

/// Page count k out of 17 matching a two-decimal percentage.
inline int pages_for(double pct) {
  for (int k = 0; k <= kPanelPages; ++k)
    if (std::fabs(100.0 * k / kPanelPages - pct) < 0.006) return k;
  return -1;
}

inline const std::vector<std::string>& mushra_systems() {
  static const std::vector<std::string> s = {"PodAgent", "MoonCast", "MOSS-TTSD", "NotebookLM"};
  return s;
}

/// MUSHRA test with `pages` pages: reference, HQ, LQ and four systems each.
inline json mushra_config_json(int pages = kPanelPages, const std::string& test_id = "dialogue") {
  json p = json::array();
  for (int i = 0; i < pages; ++i) {
    const std::string pre = "p" + std::to_string(i) + "_";
    json stimuli = json::array({{{"stimulus_id", pre + "s0"}, {"audio", "a.wav"}, {"role", "hq"}},
                                {{"stimulus_id", pre + "s1"}, {"audio", "a.wav"}, {"role", "lq"}}});
    for (std::size_t k = 0; k < mushra_systems().size(); ++k)
      stimuli.push_back({{"stimulus_id", pre + "s" + std::to_string(k + 2)},
                         {"audio", "a.wav"},
                         {"system", mushra_systems()[k]}});
    p.push_back({{"page_id", "page" + std::to_string(i)},
                 {"reference", {{"stimulus_id", pre + "ref"}, {"audio", "a.wav"}}},
                 {"stimuli", stimuli}});
  }
  return {{"test_id", test_id}, {"kind", "mushra"}, {"title", "Dialogue naturalness"}, {"pages", p}};
}

/// One judger's pages: LQ strictly lowest on the first `lq_k` pages (tied
/// with a system otherwise), HQ in the top two on the first `hq_k` pages.
inline std::vector<subjective::SubmissionRecord> judger_pages(const std::string& test_id, const std::string& judger,
                                                              int lq_k, int hq_k, int pages = kPanelPages,
                                                              double offset = 0.0) {
  std::vector<subjective::SubmissionRecord> out;
  for (int i = 0; i < pages; ++i) {
    const std::string pre = "p" + std::to_string(i) + "_";
    subjective::SubmissionRecord s;
    s.test_id = test_id;
    s.judger_id = judger;
    s.page_id = "page" + std::to_string(i);
    s.kind = TestKind::Mushra;
    const bool hq_top = i < hq_k;
    s.ratings[pre + "s0"] = hq_top ? 90 : 55;
    s.ratings[pre + "s2"] = 40 + offset;  // PodAgent
    s.ratings[pre + "s3"] = 60 + offset;  // MoonCast
    s.ratings[pre + "s4"] = 70 + offset;  // MOSS-TTSD
    s.ratings[pre + "s5"] = 80 + offset;  // NotebookLM
    s.ratings[pre + "s1"] = i < lq_k ? 10 : 40 + offset;
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<subjective::SubmissionRecord> panel_submissions(const std::string& test_id = "dialogue") {
  std::vector<subjective::SubmissionRecord> all;
  for (const auto& r : panel_stats()) {
    auto pages = judger_pages(test_id, std::to_string(r.judger), pages_for(r.lq_last_pct), pages_for(r.hq_top2_pct));
    all.insert(all.end(), pages.begin(), pages.end());
  }
  return all;
}

/// Questionnaire with seven 5-point questions and a speaker-count question.
/// Page 0 checks attention: two speakers, and "Neutral" on the music question
/// because its stimulus has no music or effects.
inline json questionnaire_config_json(const std::vector<std::string>& systems = {"PodAgent", "MoonCast"}) {
  const std::vector<std::string> labels = {"Very poor", "Poor", "Neutral", "Good", "Very good"};
  json qs = json::array();
  const char* ids[] = {"Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7"};
  for (const char* id : ids) qs.push_back({{"question_id", id}, {"text", std::string("Rate aspect ") + id}, {"labels", labels}});
  qs.push_back({{"question_id", "Q8"}, {"text", "How many speakers?"}, {"type", "count"}, {"min", 1}, {"max", 6}});
  json pages = json::array();
  for (std::size_t i = 0; i < systems.size(); ++i) {
    json page = {{"page_id", "q" + std::to_string(i)},
                 {"stimuli", json::array({{{"stimulus_id", "x" + std::to_string(i)},
                                           {"audio", "fml.wav"},
                                           {"system", systems[i]},
                                           {"has_mse", i != 0}}})}};
    if (i == 0) page["attention_keys"] = {{"Q8", 2}, {"Q6", "Neutral"}};
    pages.push_back(page);
  }
  return {{"test_id", "mos"}, {"kind", "questionnaire"}, {"require_justification", true},
          {"questions", qs},  {"pages", pages}};
}

inline subjective::SubmissionRecord questionnaire_answers(const std::string& judger, const std::string& page,
                                                          int score, int speakers = 2, int q6 = 3) {
  subjective::SubmissionRecord s;
  s.test_id = "mos";
  s.judger_id = judger;
  s.page_id = page;
  s.kind = TestKind::Questionnaire;
  for (int q = 1; q <= 7; ++q) s.answers["Q" + std::to_string(q)] = {score, "because " + std::to_string(q)};
  s.answers["Q6"].choice = q6;
  s.answers["Q8"] = {speakers, "heard two voices"};
  return s;
}

}  // namespace castkit::testing
