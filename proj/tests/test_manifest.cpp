#include <fstream>

#include "doctest.h"
#include "castkit/audio.hpp"
#include "castkit/error.hpp"
#include "castkit/manifest.hpp"
#include "support.hpp"

using namespace castkit;
using namespace castkit::testing;

namespace {

const std::vector<std::string> kCategories = {
    "Fiction",  "History", "Comedy",  "News",     "Science", "Business", "Education", "Health", "Sports",
    "Society",  "Arts",    "Music",   "Religion", "Tech",    "Leisure",  "Kids",      "Crime"};

json taxonomy_json(std::size_t cats = 17) {
  json topics = json::object();
  std::vector<std::string> names(kCategories.begin(), kCategories.begin() + static_cast<std::ptrdiff_t>(cats));
  for (const auto& c : names) topics[c] = {c + " topic 1", c + " topic 2", c + " topic 3"};
  return {{"categories", names}, {"topics", topics}};
}

// One episode per topic; every fifth is tagged as a generated system.
json full_taxonomy_json() {
  json eps = json::array();
  int n = 0;
  for (const auto& c : kCategories)
    for (int t = 1; t <= 3; ++t, ++n)
      eps.push_back({{"id", "ep" + std::to_string(n)},
                     {"category", c},
                     {"topic", c + " topic " + std::to_string(t)},
                     {"source_url", "https://example.org/" + std::to_string(n)},
                     {"system", n % 5 == 0 ? "podagent" : "human"}});
  return {{"schema_version", 1}, {"taxonomy", taxonomy_json()}, {"episodes", eps}};
}

}  // namespace

TEST_CASE("minimal manifest") {
  json doc = {{"taxonomy", taxonomy_json(2)},
              {"episodes",
               {{{"id", "a"}, {"category", "Fiction"}, {"topic", "Fiction topic 1"}, {"source_url", "u"}},
                {{"id", "b"}, {"category", "History"}, {"topic", "History topic 3"}, {"transcript_path", "b.txt"}}}}};
  const auto m = parse_manifest(doc, "/data");
  REQUIRE(m.episodes.size() == 2);
  CHECK(m.episodes[0].system == "human");
  CHECK(m.episodes[1].transcript_path.value() == fs::path("/data/b.txt"));
  CHECK_THROWS_AS(check_topic_profile(m.taxonomy), ValidationError);
}

TEST_CASE("off-taxonomy and duplicate records are named") {
  json doc = full_taxonomy_json();
  doc["episodes"][4]["category"] = "Cooking";
  doc["episodes"][9]["topic"] = "Not a topic";
  try {
    parse_manifest(doc, {});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.offenders() == std::vector<std::string>{"ep4", "ep9"});
    CHECK(std::string(e.what()).find("ep4") != std::string::npos);
  }
  doc = full_taxonomy_json();
  doc["episodes"][7]["id"] = "ep2";
  try {
    parse_manifest(doc, {});
    FAIL("expected a duplicate-id error");
  } catch (const ValidationError& e) {
    CHECK(e.offenders() == std::vector<std::string>{"ep2"});
  }
  doc = full_taxonomy_json();
  doc["episodes"][0].erase("topic");
  CHECK_THROWS_WITH_AS(parse_manifest(doc, {}), doctest::Contains("topic"), ParseError);
  doc = full_taxonomy_json();
  doc["taxonomy"]["topics"]["Fiction"][1] = "Fiction topic 1";
  CHECK_THROWS_AS(parse_manifest(doc, {}), ValidationError);
}

TEST_CASE("Topic profile: 17 categories x 3 topics") {
  const auto m = parse_manifest(full_taxonomy_json(), {});
  CHECK(m.taxonomy.categories.size() == 17);
  CHECK(m.taxonomy.topic_count() == 51);
  CHECK(m.episodes.size() == 51);
  CHECK_NOTHROW(check_topic_profile(m.taxonomy));
  CHECK_THROWS_AS(check_topic_profile(m.taxonomy, 16), ValidationError);
}

TEST_CASE("select_by_category") {
  const auto m = parse_manifest(full_taxonomy_json(), {});
  const auto fiction = select_by_category(m.episodes, m.taxonomy, "Fiction");
  REQUIRE(fiction.size() == 3);
  CHECK(fiction[0].id == "ep0");
  CHECK(fiction[2].id == "ep2");
  const auto history = select_by_category(m.episodes, m.taxonomy, "History");
  std::set<std::string> systems;
  for (const auto& r : history) {
    CHECK(r.category == "History");
    systems.insert(r.system);
  }
  CHECK(systems.size() == 2);  // filter ignores the system tag
  CHECK(select_by_category({}, m.taxonomy, "Fiction").empty());
  CHECK_THROWS_AS(select_by_category(m.episodes, m.taxonomy, "Cooking"), ValidationError);

  std::set<std::string> seen;
  std::size_t total = 0;
  for (const auto& c : m.taxonomy.categories)
    for (const auto& r : select_by_category(m.episodes, m.taxonomy, c)) {
      CHECK(seen.insert(r.id).second);
      ++total;
    }
  CHECK(total == m.episodes.size());
}

TEST_CASE("round trip through a file") {
  TempDir dir;
  json doc = full_taxonomy_json();
  doc["episodes"][3]["diarization_path"] = "ann/ep3.rttm";
  const auto path = dir / "manifest.json";
  std::ofstream(path) << doc.dump(2);
  const auto m1 = load_manifest(path);
  CHECK(m1.episodes[3].diarization_path.value() == dir.path() / "ann/ep3.rttm");
  const auto path2 = dir / "again.json";
  std::ofstream(path2) << to_json(m1, dir.path()).dump(2);
  const auto m2 = load_manifest(path2);
  CHECK(m2.episodes == m1.episodes);
  CHECK(m2.taxonomy.categories == m1.taxonomy.categories);
  CHECK(to_json(m2, dir.path())["episodes"][3]["diarization_path"] == "ann/ep3.rttm");

  std::ofstream(dir / "broken.json") << "{\"taxonomy\": ";
  CHECK_THROWS_AS(load_manifest(dir / "broken.json"), ParseError);
  CHECK_THROWS_AS(load_manifest(dir / "missing.json"), Error);
}

TEST_CASE("audio references are checked") {
  TempDir dir;
  write_wav(dir / "ep0.wav", sine(440, 0.2, 0.5, 16000));
  std::ofstream(dir / "junk.wav") << "not audio";
  const auto digest = sha256_file(dir / "ep0.wav");
  CHECK(digest.size() == 64);

  json doc = {{"taxonomy", taxonomy_json(1)},
              {"episodes",
               {{{"id", "ep0"},
                 {"category", "Fiction"},
                 {"topic", "Fiction topic 1"},
                 {"audio_path", "ep0.wav"},
                 {"sha256", digest}}}}};
  CHECK_NOTHROW(parse_manifest(doc, dir.path()));
  doc["episodes"][0]["sha256"] = std::string(64, '0');
  CHECK_THROWS_WITH_AS(parse_manifest(doc, dir.path()), doctest::Contains("ep0"), ValidationError);
  doc["episodes"][0].erase("sha256");
  doc["episodes"][0]["audio_path"] = "junk.wav";
  CHECK_THROWS_AS(parse_manifest(doc, dir.path()), Error);
  doc["episodes"][0]["audio_path"] = "absent.wav";
  CHECK_THROWS_AS(parse_manifest(doc, dir.path()), ValidationError);
  ManifestOptions lax;
  lax.check_audio = false;
  CHECK_NOTHROW(parse_manifest(doc, dir.path(), lax));
}

TEST_CASE("sha256 of a known input") {
  TempDir dir;
  std::ofstream(dir / "abc.txt") << "abc";
  CHECK(sha256_file(dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
