#include "castkit/manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>

#include "castkit/audio.hpp"
#include "castkit/error.hpp"

namespace castkit {

namespace fs = std::filesystem;

bool Taxonomy::has_category(const std::string& c) const { return topics.count(c) > 0; }

bool Taxonomy::has_topic(const std::string& c, const std::string& t) const {
  auto it = topics.find(c);
  return it != topics.end() && std::find(it->second.begin(), it->second.end(), t) != it->second.end();
}

std::size_t Taxonomy::topic_count() const {
  std::size_t n = 0;
  for (const auto& [_, ts] : topics) n += ts.size();
  return n;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char b[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

namespace {

Taxonomy parse_taxonomy(const json& j) {
  Taxonomy t;
  const json& cats = require_field(j, "categories", "taxonomy");
  const json& topics = require_field(j, "topics", "taxonomy");
  if (!cats.is_array()) throw ParseError("taxonomy.categories: expected an array");
  if (!topics.is_object()) throw ParseError("taxonomy.topics: expected an object");
  for (std::size_t i = 0; i < cats.size(); ++i) {
    if (!cats[i].is_string()) throw ParseError("taxonomy.categories[" + std::to_string(i) + "]: expected a string");
    const auto c = cats[i].get<std::string>();
    if (t.topics.count(c)) throw ValidationError("taxonomy: duplicate category '" + c + "'", {c});
    t.categories.push_back(c);
    t.topics[c];
  }
  for (auto it = topics.begin(); it != topics.end(); ++it) {
    const std::string ctx = "taxonomy.topics." + it.key();
    if (!t.topics.count(it.key())) throw ValidationError(ctx + ": category not declared", {it.key()});
    if (!it->is_array()) throw ParseError(ctx + ": expected an array");
    std::set<std::string> seen;
    for (const auto& topic : *it) {
      if (!topic.is_string()) throw ParseError(ctx + ": topics must be strings");
      const auto s = topic.get<std::string>();
      if (!seen.insert(s).second) throw ValidationError(ctx + ": duplicate topic '" + s + "'", {it.key()});
      t.topics[it.key()].push_back(s);
    }
  }
  return t;
}

std::optional<fs::path> opt_path(const json& j, const char* key, const fs::path& base, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ParseError(ctx + "." + key + ": expected a string");
  fs::path p = it->get<std::string>();
  return p.is_absolute() || base.empty() ? p : (base / p).lexically_normal();
}

std::string rel(const fs::path& p, const fs::path& base) {
  if (base.empty()) return p.string();
  auto r = p.lexically_relative(base);
  if (r.empty() || *r.begin() == "..") return p.string();
  return r.string();
}

}  // namespace

Manifest parse_manifest(const json& doc, const fs::path& base_dir, const ManifestOptions& opt) {
  if (!doc.is_object()) throw ParseError("manifest: expected an object");
  if (auto it = doc.find("schema_version"); it != doc.end() && *it != kManifestSchemaVersion)
    throw ParseError("manifest.schema_version: unsupported");
  Manifest m;
  m.taxonomy = parse_taxonomy(require_field(doc, "taxonomy", "manifest"));
  const json& eps = require_field(doc, "episodes", "manifest");
  if (!eps.is_array()) throw ParseError("manifest.episodes: expected an array");

  std::set<std::string> ids;
  std::vector<std::string> duplicates, off_taxonomy;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const std::string ctx = "episodes[" + std::to_string(i) + "]";
    const json& e = eps[i];
    EpisodeRecord r;
    r.id = require_string(e, "id", ctx);
    r.category = require_string(e, "category", ctx);
    r.topic = require_string(e, "topic", ctx);
    r.source_url = e.contains("source_url") ? require_string(e, "source_url", ctx) : "";
    r.system = e.contains("system") ? require_string(e, "system", ctx) : "human";
    r.audio_path = opt_path(e, "audio_path", base_dir, ctx);
    r.transcript_path = opt_path(e, "transcript_path", base_dir, ctx);
    r.diarization_path = opt_path(e, "diarization_path", base_dir, ctx);
    r.embeddings_path = opt_path(e, "embeddings_path", base_dir, ctx);
    if (e.contains("sha256")) {
      auto h = require_string(e, "sha256", ctx);
      std::transform(h.begin(), h.end(), h.begin(), [](unsigned char c) { return std::tolower(c); });
      r.sha256 = h;
    }
    if (!ids.insert(r.id).second) duplicates.push_back(r.id);
    if (!m.taxonomy.has_topic(r.category, r.topic)) off_taxonomy.push_back(r.id);
    m.episodes.push_back(std::move(r));
  }
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  if (!duplicates.empty()) throw ValidationError("duplicate episode ids: " + join(duplicates), duplicates);
  if (!off_taxonomy.empty())
    throw ValidationError("category/topic not in taxonomy for episodes: " + join(off_taxonomy), off_taxonomy);

  if (opt.check_audio) {
    for (const auto& r : m.episodes) {
      if (!r.audio_path) continue;
      if (!fs::exists(*r.audio_path))
        throw ValidationError("episode " + r.id + ": audio file missing: " + r.audio_path->string(), {r.id});
      if (r.sha256 && sha256_file(*r.audio_path) != *r.sha256)
        throw ValidationError("episode " + r.id + ": sha256 mismatch", {r.id});
      try {
        (void)decode_wav(*r.audio_path);
      } catch (const Error& e) {
        throw ValidationError("episode " + r.id + ": audio does not decode: " + e.what(), {r.id});
      }
    }
  }
  return m;
}

Manifest load_manifest(const fs::path& path, const ManifestOptions& opt) {
  return parse_manifest(read_json_file(path), path.parent_path(), opt);
}

json to_json(const Manifest& m, const fs::path& base_dir) {
  json topics = json::object();
  for (const auto& c : m.taxonomy.categories) topics[c] = m.taxonomy.topics.at(c);
  json eps = json::array();
  for (const auto& r : m.episodes) {
    json e = {{"id", r.id}, {"category", r.category}, {"topic", r.topic}, {"source_url", r.source_url},
              {"system", r.system}};
    if (r.audio_path) e["audio_path"] = rel(*r.audio_path, base_dir);
    if (r.sha256) e["sha256"] = *r.sha256;
    if (r.transcript_path) e["transcript_path"] = rel(*r.transcript_path, base_dir);
    if (r.diarization_path) e["diarization_path"] = rel(*r.diarization_path, base_dir);
    if (r.embeddings_path) e["embeddings_path"] = rel(*r.embeddings_path, base_dir);
    eps.push_back(std::move(e));
  }
  return {{"schema_version", kManifestSchemaVersion},
          {"taxonomy", {{"categories", m.taxonomy.categories}, {"topics", topics}}},
          {"episodes", eps}};
}

void check_topic_profile(const Taxonomy& t, std::size_t categories) {
  if (t.categories.size() != categories)
    throw ValidationError("expected " + std::to_string(categories) + " categories, found " +
                          std::to_string(t.categories.size()));
  std::vector<std::string> bad;
  for (const auto& c : t.categories)
    if (t.topics.at(c).size() != 3) bad.push_back(c);
  if (!bad.empty()) throw ValidationError("categories without exactly 3 topics", bad);
}

std::vector<EpisodeRecord> select_by_category(const std::vector<EpisodeRecord>& records, const Taxonomy& taxonomy,
                                              const std::string& category) {
  if (!taxonomy.has_category(category)) throw ValidationError("unknown category '" + category + "'");
  std::vector<EpisodeRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [&](const EpisodeRecord& r) { return r.category == category; });
  return out;
}

}  // namespace castkit
