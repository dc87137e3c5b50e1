#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "castkit/text.hpp"

namespace castkit {

/// Result of aligning a hypothesis against a reference.
struct WerResult {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_length = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  double wer() const { return static_cast<double>(errors()) / static_cast<double>(reference_length); }
};

/// Minimum-edit alignment with unit costs. When several alignments are
/// optimal the backtrace prefers substitution/match, then insertion, then
/// deletion. Throws ValidationError on an empty reference.
WerResult align_words(const TokenSequence& reference, const TokenSequence& hypothesis);

inline double wer(const TokenSequence& reference, const TokenSequence& hypothesis) {
  return align_words(reference, hypothesis).wer();
}

/// A speaker or utterance embedding produced by an external model.
struct EmbeddingVector {
  std::string speaker_id;
  std::string file_id;
  std::vector<double> values;
};

/// dot(a, b) / (|a| |b|). Throws on dimension mismatch or a zero vector.
double cosine_sim(std::span<const double> a, std::span<const double> b);
inline double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine_sim(a.values, b.values);
}

/// One unit-norm embedding per speaker, in first-appearance order. Speakers
/// with several embeddings are mean-pooled, then renormalized.
std::vector<EmbeddingVector> pool_by_speaker(std::span<const EmbeddingVector> embeddings);

/// Speaker timbre difference: 1 - mean pairwise cosine similarity over the
/// N >= 2 distinct speakers in `embeddings`.
double sptd(std::span<const EmbeddingVector> embeddings);

enum class SimMode {
  PerUtterance,  // mean of per-utterance cosine against the reference voice
  Pooled,        // cosine of the pooled synthesized embedding
};

struct SimResult {
  std::map<std::string, double> per_speaker;
  double episode_mean = 0.0;
};

/// Compares synthesized-speech embeddings with each speaker's reference
/// voice. Every synthesized speaker must have a reference.
SimResult speaker_similarity(std::span<const EmbeddingVector> synthesized,
                             std::span<const EmbeddingVector> references,
                             SimMode mode = SimMode::PerUtterance);

/// JSON-lines {"speaker_id", "file_id", "vector": [...]}.
std::vector<EmbeddingVector> read_embeddings(const std::filesystem::path& path);
std::vector<EmbeddingVector> parse_embeddings(std::string_view text, const std::string& origin);

enum class ExternalMetric { SIG, BAK, OVRL, P808_MOS, CASP };

std::string to_string(ExternalMetric m);

struct ExternalScoreRecord {
  std::string file_id;
  ExternalMetric metric;
  double value;
};

/// Scores computed by external models (DNSMOS, CASP). Accepts CSV with the
/// exact header `file_id,metric,value` or JSON-lines with those keys.
/// DNSMOS values must lie in [1, 5], CASP in [0, 1].
std::vector<ExternalScoreRecord> parse_external_scores(std::string_view text, const std::string& origin);
std::vector<ExternalScoreRecord> ingest_external_scores(const std::filesystem::path& path);

}  // namespace castkit
