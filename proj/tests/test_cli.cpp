#include <fstream>
#include <sstream>

#include "doctest.h"
#include "castkit/audio.hpp"
#include "castkit/cli.hpp"
#include "support.hpp"

using namespace castkit;
using namespace castkit::testing;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "castkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("every subcommand has help") {
  for (const char* sub : {"manifest", "loudness", "truepeak", "lra", "score-loudness", "wer", "sim", "sptd", "smr",
                          "text-metrics", "judge", "segments", "fml", "filter-judgers", "aggregate", "report",
                          "serve"}) {
    const auto r = run({sub, "--help"});
    CHECK_MESSAGE(r.code == kExitOk, sub);
    CHECK_MESSAGE(r.out.find("Usage") != std::string::npos, sub);
  }
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("usage errors exit 2, metric errors exit 1") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"no-such-command"}).code == kExitUsage);
  CHECK(run({"wer"}).code == kExitUsage);
  CHECK(run({"loudness", "/definitely/missing.wav"}).code == kExitUsage);

  TempDir dir;
  std::ofstream(dir / "one.jsonl") << "{\"speaker_id\":\"A\",\"file_id\":\"ep\",\"vector\":[1,0]}\n"
                                      "{\"speaker_id\":\"A\",\"file_id\":\"ep\",\"vector\":[0,1]}\n";
  const auto r = run({"sptd", "--embeddings", (dir / "one.jsonl").string()});
  CHECK(r.code == kExitMetricError);
  CHECK(r.err.find("need ≥ 2 speakers") != std::string::npos);
}

TEST_CASE("wer and loudness output") {
  TempDir dir;
  std::ofstream(dir / "ref.txt") << "the cat sat on the mat";
  std::ofstream(dir / "hyp.txt") << "the cat sat on mat";
  auto r = run({"wer", (dir / "ref.txt").string(), (dir / "hyp.txt").string()});
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  CHECK(j["wer"].get<double>() == doctest::Approx(1.0 / 6).epsilon(1e-5));
  CHECK(j["deletions"] == 1);

  write_wav(dir / "tone.wav", sine(997, db_to_amp(-23), 10, 48000, 2));
  r = run({"loudness", (dir / "tone.wav").string()});
  REQUIRE(r.code == 0);
  j = json::parse(r.out);
  CHECK(std::fabs(j["idl"].get<double>() + 23) <= 0.1);
  CHECK(j.contains("tp"));
  CHECK(j.contains("lra"));

  write_wav(dir / "silent.wav", AudioBuffer::silence(4, 48000));
  r = run({"score-loudness", (dir / "silent.wav").string(), "-o", (dir / "s.json").string()});
  CHECK(r.code == 0);
  CHECK(r.err.find("silent") != std::string::npos);
  std::ifstream in(dir / "s.json");
  j = json::parse(in);
  CHECK(j["s_idl"] == 0.0);
  CHECK(j["silent_input"] == true);
  CHECK(j["idl"].is_null());
  CHECK(j["non_finite"]["idl"] == "-inf");

  r = run({"score-loudness", "--idl", "-23", "--tp", "0", "--lra", "20"});
  REQUIRE(r.code == 0);
  j = json::parse(r.out);
  CHECK(j["s_idl"].get<double>() == doctest::Approx(std::exp(-0.0858 * 5)).epsilon(1e-5));
}

TEST_CASE("filter-judgers on the 20-judger panel") {
  TempDir dir;
  {
    std::ofstream out(dir / "stats.jsonl");
    for (const auto& r : panel_stats())
      out << json{{"judger_id", r.judger}, {"lq_last_pct", r.lq_last_pct}, {"hq_top2_pct", r.hq_top2_pct}}.dump()
          << "\n";
  }
  auto r = run({"filter-judgers", (dir / "stats.jsonl").string()});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["excluded"] == json({"18", "20", "7"}));
  CHECK(j["kept_count"] == 17);

  CHECK(run({"filter-judgers", (dir / "stats.jsonl").string(), "--lq-threshold", "0"}).code == kExitUsage);
}

TEST_CASE("aggregate from raw submissions") {
  TempDir dir;
  std::ofstream(dir / "test.json") << mushra_config_json().dump();
  {
    std::ofstream out(dir / "subs.jsonl");
    for (const auto& s : panel_submissions()) out << subjective::to_json(s).dump() << "\n";
  }
  auto r = run({"aggregate", (dir / "subs.jsonl").string(), "--config", (dir / "test.json").string()});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["filter"]["kept_count"] == 17);
  CHECK(j["mushra"]["judgers"] == 17);
  CHECK(j["mushra"]["systems"]["NotebookLM"]["mean"] == 80);
}

TEST_CASE("segments and fml") {
  TempDir dir;
  {
    std::ofstream out(dir / "ep.rttm");
    for (const auto& s : alternating_turns(5, 60))
      out << "SPEAKER ep 1 " << s.start_s << " " << (s.end_s - s.start_s) << " <NA> <NA> " << s.speaker_id
          << " <NA> <NA>\n";
  }
  auto r = run({"segments", "--diarization", (dir / "ep.rttm").string(), "--duration", "60"});
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  REQUIRE(j.is_array());
  CHECK(j[0]["start_s"] == 0.0);

  write_wav(dir / "ep.wav", sine(220, 0.1, 300, 8000));
  r = run({"fml", (dir / "ep.wav").string(), "--write", (dir / "fml.wav").string()});
  REQUIRE(r.code == 0);
  j = json::parse(r.out);
  CHECK(j["windows"] == 3);
  CHECK(j["output_duration_s"].get<double>() == doctest::Approx(181.5));
  CHECK(decode_wav(dir / "fml.wav").duration_s() == doctest::Approx(181.5));
}
