#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "castkit/json_util.hpp"

namespace castkit {

inline constexpr int kManifestSchemaVersion = 1;

struct Taxonomy {
  std::vector<std::string> categories;                      // ordered
  std::map<std::string, std::vector<std::string>> topics;   // category -> topics

  bool has_category(const std::string& c) const;
  bool has_topic(const std::string& c, const std::string& t) const;
  std::size_t topic_count() const;
};

struct EpisodeRecord {
  std::string id;
  std::string category;
  std::string topic;
  std::string source_url;
  std::string system;
  std::optional<std::filesystem::path> audio_path;  // absolute after load
  std::optional<std::string> sha256;                // hex, lowercase
  std::optional<std::filesystem::path> transcript_path;
  std::optional<std::filesystem::path> diarization_path;
  std::optional<std::filesystem::path> embeddings_path;

  bool operator==(const EpisodeRecord&) const = default;
};

struct Manifest {
  Taxonomy taxonomy;
  std::vector<EpisodeRecord> episodes;
};

struct ManifestOptions {
  bool check_audio = true;  // existence, decodability and sha256 of audio_path
};

/// Parses and validates a manifest document. Relative media paths resolve
/// against `base_dir`.
Manifest parse_manifest(const json& doc, const std::filesystem::path& base_dir, const ManifestOptions& opt = {});
Manifest load_manifest(const std::filesystem::path& path, const ManifestOptions& opt = {});

/// Paths are written relative to `base_dir` when they lie below it.
json to_json(const Manifest& m, const std::filesystem::path& base_dir = {});

/// Topic profile: `categories` categories, each with exactly three topics.
void check_topic_profile(const Taxonomy& t, std::size_t categories = 17);

std::vector<EpisodeRecord> select_by_category(const std::vector<EpisodeRecord>& records, const Taxonomy& taxonomy,
                                              const std::string& category);

/// Lowercase hex SHA-256 of a file's content.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace castkit
