#include <fstream>

#include "doctest.h"
#include "castkit/error.hpp"
#include "castkit/report.hpp"
#include "castkit/subjective.hpp"
#include "support.hpp"

using namespace castkit;
using namespace castkit::testing;
using namespace castkit::subjective;

namespace {

std::map<std::string, JudgerStats> panel_stats_map() {
  std::map<std::string, JudgerStats> out;
  for (const auto& r : panel_stats()) {
    const auto id = std::to_string(r.judger);
    out[id] = {id, kPanelPages, r.lq_last_pct, r.hq_top2_pct};
  }
  return out;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("judger statistics from raw ratings reproduce the panel percentages") {
  const auto config = parse_test_config(mushra_config_json());
  const auto anchors = anchors_from_config(config);
  const auto subs = panel_submissions();
  const auto stats = compute_all_judger_stats(subs, anchors);
  REQUIRE(stats.size() == 20);
  for (const auto& r : panel_stats()) {
    const auto& s = stats.at(std::to_string(r.judger));
    CHECK(s.pages == 17);
    CHECK(std::fabs(s.lq_last_pct - r.lq_last_pct) < 0.005);
    CHECK(std::fabs(s.hq_top2_pct - r.hq_top2_pct) < 0.005);
  }
  CHECK(stats.at("1").lq_last_pct == doctest::Approx(100.0 * 16 / 17));
  CHECK(stats.at("7").hq_top2_pct == doctest::Approx(100.0 * 3 / 17));
  CHECK(stats.at("2").lq_last_pct == 100.0);
}

TEST_CASE("spammer filter on the 20-judger panel") {
  const auto f = filter_judgers(panel_stats_map());
  CHECK(as_set(f.excluded) == std::set<std::string>{"7", "18", "20"});
  CHECK(f.kept.size() == 17);
  CHECK(as_set(f.kept).count("19"));
}

TEST_CASE("filter boundaries") {
  std::map<std::string, JudgerStats> s = {{"a", {"a", 17, 90.0, 50.0}},
                                          {"b", {"b", 17, 90.0, 50.01}},
                                          {"c", {"c", 17, 89.99, 100}},
                                          {"d", {"d", 17, 100, 52.94}}};
  const auto f = filter_judgers(s);
  CHECK(as_set(f.kept) == std::set<std::string>{"b", "d"});
  CHECK_THROWS_AS(filter_judgers(s, 0, 50), ValidationError);
  CHECK_THROWS_AS(filter_judgers(s, 90, 100.5), ValidationError);
  CHECK_NOTHROW(filter_judgers(s, 100, 100));
}

TEST_CASE("filter is monotone in both thresholds") {
  const auto stats = panel_stats_map();
  for (double lq = 5; lq <= 100; lq += 5)
    for (double hq = 5; hq <= 100; hq += 5) {
      const auto base = as_set(filter_judgers(stats, lq, hq).kept);
      const auto up_lq = as_set(filter_judgers(stats, std::min(100.0, lq + 5), hq).kept);
      const auto up_hq = as_set(filter_judgers(stats, lq, std::min(100.0, hq + 5)).kept);
      for (const auto& k : up_lq) CHECK(base.count(k));
      for (const auto& k : up_hq) CHECK(base.count(k));
    }
}

TEST_CASE("tie semantics and relabel invariance") {
  const auto config = parse_test_config(mushra_config_json(1));
  const auto anchors = anchors_from_config(config);
  SubmissionRecord s;
  s.test_id = "dialogue";
  s.judger_id = "j";
  s.page_id = "page0";
  s.ratings = {{"p0_s0", 80}, {"p0_s1", 20}, {"p0_s2", 20}, {"p0_s3", 80}, {"p0_s4", 90}, {"p0_s5", 30}};
  std::vector<SubmissionRecord> one = {s};
  auto st = compute_judger_stats(one, anchors);
  CHECK(st.lq_last_pct == 0.0);    // LQ tied with a system
  CHECK(st.hq_top2_pct == 100.0);  // HQ tied for second place
  one[0].ratings["p0_s3"] = 85;
  CHECK(compute_judger_stats(one, anchors).hq_top2_pct == 0.0);

  // Permuting the system ratings among non-anchor stimuli changes nothing.
  std::mt19937 rng(11);
  std::vector<double> sys = {s.ratings.at("p0_s2"), s.ratings.at("p0_s3"), s.ratings.at("p0_s4"),
                             s.ratings.at("p0_s5")};
  const auto ref = compute_judger_stats(std::vector<SubmissionRecord>{s}, anchors);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(sys.begin(), sys.end(), rng);
    auto p = s;
    for (int k = 0; k < 4; ++k) p.ratings["p0_s" + std::to_string(k + 2)] = sys[static_cast<std::size_t>(k)];
    const auto got = compute_judger_stats(std::vector<SubmissionRecord>{p}, anchors);
    CHECK(got.lq_last_pct == ref.lq_last_pct);
    CHECK(got.hq_top2_pct == ref.hq_top2_pct);
  }
}

TEST_CASE("judger statistics errors") {
  const auto config = parse_test_config(mushra_config_json(2));
  auto subs = judger_pages("dialogue", "x", 2, 2, 2);
  AnchorMap partial = anchors_from_config(config);
  partial.erase("page1");
  CHECK_THROWS_AS(compute_judger_stats(subs, partial), ValidationError);
  auto mixed = subs;
  mixed[1].judger_id = "y";
  CHECK_THROWS_AS(compute_judger_stats(mixed, anchors_from_config(config)), ValidationError);
  CHECK_THROWS_AS(compute_judger_stats(std::vector<SubmissionRecord>{}, anchors_from_config(config)),
                  ValidationError);
}

TEST_CASE("MUSHRA aggregation") {
  const auto config = parse_test_config(mushra_config_json(1));
  SUBCASE("single judger, single page") {
    auto subs = judger_pages("dialogue", "j1", 1, 1, 1);
    const auto agg = aggregate_mushra(subs, config);
    CHECK(agg.per_system.at("NotebookLM").mean == 80);
    CHECK(agg.per_system.at("PodAgent").mean == 40);
    CHECK(agg.per_system.at("HQ").mean == 90);
    CHECK(agg.judgers == 1);
    CHECK(agg.pages == 1);
  }
  SUBCASE("two judgers disagreeing") {
    auto subs = judger_pages("dialogue", "j1", 1, 1, 1);
    auto more = judger_pages("dialogue", "j2", 1, 1, 1, 20);
    subs.insert(subs.end(), more.begin(), more.end());
    const auto agg = aggregate_mushra(subs, config);
    CHECK(agg.per_system.at("MoonCast").mean == 70);
    CHECK(agg.per_system.at("MoonCast").median == 70);
    CHECK(agg.per_system.at("MoonCast").n == 2);
  }
  CHECK_THROWS_AS(aggregate_mushra(std::vector<SubmissionRecord>{}, config), ValidationError);
}

TEST_CASE("filter then aggregate: excluded judgers never appear, pooled mean is consistent") {
  const auto config = parse_test_config(mushra_config_json());
  std::vector<SubmissionRecord> subs;
  int j = 0;
  for (const auto& r : panel_stats()) {
    auto pages = judger_pages("dialogue", std::to_string(r.judger), pages_for(r.lq_last_pct),
                              pages_for(r.hq_top2_pct), kPanelPages, static_cast<double>(j++ % 7));
    subs.insert(subs.end(), pages.begin(), pages.end());
  }
  const auto f = filter_judgers(compute_all_judger_stats(subs, anchors_from_config(config)));
  const auto kept = keep_judgers(subs, f.kept);
  CHECK(kept.size() == 17u * 17u);
  const auto agg = aggregate_mushra(kept, config);
  CHECK(agg.judgers == 17);
  CHECK_FALSE(agg.per_judger.count("7"));
  CHECK_FALSE(agg.per_judger.count("18"));
  for (const auto& sys : mushra_systems()) {
    double weighted = 0;
    std::size_t n = 0;
    for (const auto& [judger, per] : agg.per_judger) {
      weighted += per.at(sys).mean * static_cast<double>(per.at(sys).n);
      n += per.at(sys).n;
    }
    CHECK(agg.per_system.at(sys).n == n);
    CHECK(agg.per_system.at(sys).mean == doctest::Approx(weighted / static_cast<double>(n)));
  }
  const auto j_agg = to_json(agg);
  CHECK(j_agg["judgers"] == 17);
  CHECK(j_agg["systems"].contains("PodAgent"));
}

TEST_CASE("submission parsing and validation") {
  const auto q = parse_test_config(questionnaire_config_json());
  auto good = questionnaire_answers("j", "q0", 4);
  CHECK_NOTHROW(validate_submission(good, q));
  const auto round = parse_submission(to_json(good));
  CHECK(round.answers.at("Q8").choice == 2);
  CHECK(round.kind == TestKind::Questionnaire);

  auto missing_just = good;
  missing_just.answers["Q3"].justification = "  ";
  CHECK_THROWS_WITH_AS(validate_submission(missing_just, q), doctest::Contains("answers.Q3.justification"),
                       ValidationError);
  auto out_of_range = good;
  out_of_range.answers["Q8"].choice = 9;
  CHECK_THROWS_WITH_AS(validate_submission(out_of_range, q), doctest::Contains("Q8"), ValidationError);
  auto unanswered = good;
  unanswered.answers.erase("Q2");
  CHECK_THROWS_WITH_AS(validate_submission(unanswered, q), doctest::Contains("Q2"), ValidationError);
  auto wrong_page = good;
  wrong_page.page_id = "nope";
  CHECK_THROWS_AS(validate_submission(wrong_page, q), ValidationError);

  json bad = to_json(good);
  bad["answers"]["Q3"]["choice"] = "four";
  CHECK_THROWS_WITH_AS(parse_submission(bad), doctest::Contains("answers.Q3.choice"), ParseError);
  bad = to_json(good);
  bad["schema_version"] = 2;
  CHECK_THROWS_AS(parse_submission(bad), Error);

  const auto m = parse_test_config(mushra_config_json(1));
  auto ms = judger_pages("dialogue", "j", 1, 1, 1);
  CHECK_NOTHROW(validate_submission(ms[0], m));
  ms[0].ratings["p0_s2"] = 101;
  CHECK_THROWS_AS(validate_submission(ms[0], m), ValidationError);
  ms[0].ratings.erase("p0_s2");
  CHECK_THROWS_WITH_AS(validate_submission(ms[0], m), doctest::Contains("p0_s2"), ValidationError);
}

TEST_CASE("submission files tolerate a torn final line") {
  TempDir dir;
  const auto path = dir / "subs.jsonl";
  {
    std::ofstream out(path);
    for (const auto& s : judger_pages("dialogue", "j", 2, 2, 2)) out << to_json(s).dump() << "\n";
    out << "{\"test_id\": \"dialo";
  }
  CHECK(read_submissions(path).size() == 2);
}

TEST_CASE("attention checks") {
  const auto config = parse_test_config(questionnaire_config_json());
  const auto& page = *config.find_page("q0");
  const auto pass = validate_attention(questionnaire_answers("j", "q0", 4), page.attention_keys, config.questions);
  CHECK(pass.pass);
  CHECK(pass.failures.empty());

  const auto music = validate_attention(questionnaire_answers("j", "q0", 4, 2, 5), page.attention_keys,
                                        config.questions);
  CHECK_FALSE(music.pass);
  CHECK(music.failures == std::vector<std::string>{"Q6"});

  const auto both = validate_attention(questionnaire_answers("j", "q0", 4, 3, 1), page.attention_keys,
                                       config.questions);
  CHECK(both.failures.size() == 2);

  auto missing = questionnaire_answers("j", "q0", 4);
  missing.answers.erase("Q8");
  const auto m = validate_attention(missing, page.attention_keys, config.questions);
  CHECK_FALSE(m.pass);
  CHECK(m.failures == std::vector<std::string>{"Q8"});

  AttentionKey int_only = {{"Q8", 2}};
  CHECK(validate_attention(questionnaire_answers("j", "q0", 4), int_only).pass);

  std::vector<SubmissionRecord> subs = {questionnaire_answers("good", "q0", 4),
                                        questionnaire_answers("bad", "q0", 4, 3),
                                        questionnaire_answers("bad", "q1", 4)};
  const auto screened = apply_attention_policy(subs, config);
  CHECK(screened.kept.size() == 2);
  CHECK(screened.failed.size() == 1);
  CHECK(screened.failed.count("bad/q0"));
  CHECK(apply_attention_policy(subs, config, AttentionPolicy::WarnOnly).kept.size() == 3);
}

TEST_CASE("direct MOS skips attention questions on their page") {
  const auto config = parse_test_config(questionnaire_config_json());
  std::vector<SubmissionRecord> subs = {questionnaire_answers("a", "q0", 4), questionnaire_answers("b", "q0", 2),
                                        questionnaire_answers("a", "q1", 5, 2, 1)};
  const auto grid = direct_mos(subs, config);
  CHECK(grid.at({"PodAgent", "Q1"}) == 3.0);
  CHECK_FALSE(grid.count({"PodAgent", "Q6"}));
  CHECK(grid.at({"MoonCast", "Q6"}) == 1.0);
  CHECK_FALSE(grid.count({"MoonCast", "Q8"}));
  const auto just = collect_justifications(subs, config, "Q2");
  CHECK(just.at("PodAgent").size() == 2);
}

TEST_CASE("combine_mos") {
  MosGrid direct = {{{"MOSS-TTSD", "Information Delivery"}, 4.0}, {{"PodAgent", "Music/Sound Effects"}, 2.4}};
  MosGrid just = {{{"MOSS-TTSD", "Information Delivery"}, 3.0}, {{"PodAgent", "Music/Sound Effects"}, 2.0}};
  const auto c = combine_mos(direct, just);
  CHECK(c.at({"MOSS-TTSD", "Information Delivery"}).value == doctest::Approx(3.5));
  CHECK(c.at({"PodAgent", "Music/Sound Effects"}).value == doctest::Approx(2.2));
  CHECK_FALSE(c.at({"PodAgent", "Music/Sound Effects"}).direct_only);

  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(1, 5);
  MosGrid x;
  for (int s = 0; s < 5; ++s)
    for (int q = 0; q < 7; ++q) x[{"s" + std::to_string(s), "q" + std::to_string(q)}] = u(rng);
  for (const auto& [cell, v] : combine_mos(x, x)) CHECK(v.value == doctest::Approx(x.at(cell)).epsilon(1e-15));

  MosGrid partial = {{{"MOSS-TTSD", "Information Delivery"}, 3.0}};
  const auto p = combine_mos(direct, partial);
  CHECK(p.at({"PodAgent", "Music/Sound Effects"}).value == 2.4);
  CHECK(p.at({"PodAgent", "Music/Sound Effects"}).direct_only);
  CHECK_THROWS_AS(combine_mos({}, {}), ValidationError);
  MosGrid stray = {{{"Other", "Q"}, 3.0}};
  CHECK_THROWS_AS(combine_mos(direct, stray), ValidationError);
}

TEST_CASE("system reports") {
  SystemMetrics loud_only{"A", {{"audio", {{"s_idl", 0.8}}}}};
  const auto one = build_system_report(loud_only);
  CHECK(one["audio"]["s_idl"]["raw"] == 0.8);
  for (const char* f : {"text", "speech", "subjective"}) CHECK(one[f] == "not evaluated");

  std::vector<SystemMetrics> two = {{"A", {{"text", {{"distinct_2", 0.4}}}, {"speech", {{"wer", 0.1}}}}},
                                    {"B", {{"text", {{"distinct_2", 0.8}}}, {"speech", {{"wer", 0.3}}}}}};
  const auto reports = build_reports(two);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0]["text"]["distinct_2"]["normalized"] == 0.0);
  CHECK(reports[1]["text"]["distinct_2"]["normalized"] == 1.0);
  CHECK(reports[0]["speech"]["wer"]["normalized"] == 1.0);
  CHECK(reports[1]["speech"]["wer"]["normalized"] == 0.0);

  SystemMetrics mos{"C", {}};
  for (const char* q : {"Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7"}) mos.families["subjective"][q] = 3.0;
  const auto r = build_system_report(mos);
  CHECK(r["radar"].size() == 7);
  CHECK(r["radar"][0].contains("axis"));

  CHECK_THROWS_AS(parse_system_metrics(json{{"system", "X"}, {"visual", {{"m", 1}}}}), ValidationError);
  const auto parsed = parse_system_metrics(json{{"system", "X"}, {"audio", {{"s_tp", 1.0}, {"smr", nullptr}}}});
  CHECK(parsed.families.at("audio").size() == 1);
}
