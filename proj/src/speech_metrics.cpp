#include "castkit/speech_metrics.hpp"

#include <cmath>
#include <sstream>

#include "castkit/error.hpp"
#include "castkit/json_util.hpp"

namespace castkit {

WerResult align_words(const TokenSequence& reference, const TokenSequence& hypothesis) {
  if (reference.empty()) throw ValidationError("WER needs a non-empty reference");
  const std::size_t n = reference.size(), m = hypothesis.size();
  // cost[i][j]: edit distance between reference[0, i) and hypothesis[0, j).
  std::vector<std::vector<std::size_t>> cost(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) cost[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) cost[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = cost[i - 1][j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      cost[i][j] = std::min({diag, cost[i][j - 1] + 1, cost[i - 1][j] + 1});
    }
  }

  WerResult r;
  r.reference_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = reference[i - 1] == hypothesis[j - 1];
      if (cost[i][j] == cost[i - 1][j - 1] + (same ? 0 : 1)) {
        if (!same) ++r.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && cost[i][j] == cost[i][j - 1] + 1) {
      ++r.insertions;
      --j;
    } else {
      ++r.deletions;
      --i;
    }
  }
  return r;
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ValidationError("embedding dimension mismatch: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0) || !(nb > 0)) throw ValidationError("cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

namespace {

void check_embedding(const EmbeddingVector& e, std::size_t dim) {
  if (e.values.size() != dim)
    throw ValidationError("embedding for speaker '" + e.speaker_id + "' has dimension " +
                          std::to_string(e.values.size()) + ", expected " + std::to_string(dim));
  double norm = 0;
  for (double v : e.values) {
    if (!std::isfinite(v)) throw ValidationError("embedding for speaker '" + e.speaker_id + "' is not finite");
    norm += v * v;
  }
  if (!(norm > 0)) throw ValidationError("embedding for speaker '" + e.speaker_id + "' has zero norm");
}

std::vector<double> normalized(std::vector<double> v) {
  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (!(norm > 0)) throw ValidationError("pooled embedding has zero norm");
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

std::vector<EmbeddingVector> pool_by_speaker(std::span<const EmbeddingVector> embeddings) {
  std::vector<EmbeddingVector> pooled;
  std::vector<std::size_t> counts;
  if (embeddings.empty()) return pooled;
  const std::size_t dim = embeddings.front().values.size();
  for (const auto& e : embeddings) {
    check_embedding(e, dim);
    auto it = std::find_if(pooled.begin(), pooled.end(),
                           [&](const EmbeddingVector& p) { return p.speaker_id == e.speaker_id; });
    if (it == pooled.end()) {
      pooled.push_back({e.speaker_id, e.file_id, e.values});
      counts.push_back(1);
    } else {
      for (std::size_t k = 0; k < dim; ++k) it->values[k] += e.values[k];
      ++counts[static_cast<std::size_t>(it - pooled.begin())];
    }
  }
  for (auto& p : pooled) p.values = normalized(std::move(p.values));
  return pooled;
}

double sptd(std::span<const EmbeddingVector> embeddings) {
  const auto speakers = pool_by_speaker(embeddings);
  const std::size_t n = speakers.size();
  if (n < 2) throw ValidationError("SPTD: need ≥ 2 speakers, got " + std::to_string(n));
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sum += cosine_sim(speakers[i], speakers[j]);
  return 1.0 - 2.0 / (static_cast<double>(n) * static_cast<double>(n - 1)) * sum;
}

SimResult speaker_similarity(std::span<const EmbeddingVector> synthesized,
                             std::span<const EmbeddingVector> references, SimMode mode) {
  if (synthesized.empty()) throw ValidationError("no synthesized embeddings");
  const auto refs = pool_by_speaker(references);
  auto find_ref = [&](const std::string& speaker) -> const EmbeddingVector& {
    for (const auto& r : refs)
      if (r.speaker_id == speaker) return r;
    throw ValidationError("no reference embedding for speaker '" + speaker + "'");
  };

  SimResult out;
  if (mode == SimMode::Pooled) {
    for (const auto& s : pool_by_speaker(synthesized))
      out.per_speaker[s.speaker_id] = cosine_sim(s, find_ref(s.speaker_id));
  } else {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& s : synthesized) {
      auto& [sum, n] = acc[s.speaker_id];
      sum += cosine_sim(s, find_ref(s.speaker_id));
      ++n;
    }
    for (const auto& [speaker, sn] : acc) out.per_speaker[speaker] = sn.first / static_cast<double>(sn.second);
  }
  double total = 0;
  for (const auto& [_, v] : out.per_speaker) total += v;
  out.episode_mean = total / static_cast<double>(out.per_speaker.size());
  return out;
}

std::vector<EmbeddingVector> parse_embeddings(std::string_view text, const std::string& origin) {
  std::vector<EmbeddingVector> out;
  for (const auto& line : parse_jsonl(text)) {
    const std::string ctx = origin + ":" + std::to_string(line.line);
    EmbeddingVector e;
    e.speaker_id = require_string(line.value, "speaker_id", ctx);
    if (line.value.contains("file_id")) e.file_id = require_string(line.value, "file_id", ctx);
    const json& vec = require_field(line.value, "vector", ctx);
    if (!vec.is_array() || vec.empty()) throw ParseError(ctx + ".vector: expected a non-empty array");
    for (const auto& v : vec) {
      if (!v.is_number()) throw ParseError(ctx + ".vector: expected numbers");
      e.values.push_back(v.get<double>());
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<EmbeddingVector> read_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(read_text_file(path), path.string());
}

std::string to_string(ExternalMetric m) {
  switch (m) {
    case ExternalMetric::SIG: return "SIG";
    case ExternalMetric::BAK: return "BAK";
    case ExternalMetric::OVRL: return "OVRL";
    case ExternalMetric::P808_MOS: return "P808_MOS";
    case ExternalMetric::CASP: return "CASP";
  }
  return "?";
}

namespace {

ExternalScoreRecord make_score(const std::string& file_id, const std::string& metric, double value,
                               const std::string& ctx) {
  static const std::pair<const char*, ExternalMetric> kNames[] = {
      {"SIG", ExternalMetric::SIG},   {"BAK", ExternalMetric::BAK},
      {"OVRL", ExternalMetric::OVRL}, {"P808_MOS", ExternalMetric::P808_MOS},
      {"CASP", ExternalMetric::CASP}};
  if (file_id.empty()) throw ParseError(ctx + ": empty file_id");
  for (const auto& [name, m] : kNames) {
    if (metric != name) continue;
    const bool casp = m == ExternalMetric::CASP;
    const double lo = casp ? 0.0 : 1.0, hi = casp ? 1.0 : 5.0;
    if (!std::isfinite(value) || value < lo || value > hi) {
      std::ostringstream msg;
      msg << ctx << ": " << metric << " value " << value << " outside [" << lo << ", " << hi << "]";
      throw ValidationError(msg.str(), {file_id});
    }
    return {file_id, m, value};
  }
  throw ValidationError(ctx + ": unknown metric '" + metric + "'", {file_id});
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

}  // namespace

std::vector<ExternalScoreRecord> parse_external_scores(std::string_view text, const std::string& origin) {
  std::vector<ExternalScoreRecord> out;
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    for (const auto& line : parse_jsonl(text)) {
      const std::string ctx = origin + ": row " + std::to_string(line.line);
      out.push_back(make_score(require_string(line.value, "file_id", ctx),
                               require_string(line.value, "metric", ctx),
                               require_number(line.value, "value", ctx), ctx));
    }
    return out;
  }

  std::size_t pos = 0, line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto fields = split_csv_line(line);
    if (!header_seen) {
      if (fields != std::vector<std::string>{"file_id", "metric", "value"})
        throw ParseError(origin + ": expected header 'file_id,metric,value'");
      header_seen = true;
      continue;
    }
    const std::string ctx = origin + ": row " + std::to_string(line_no);
    if (fields.size() != 3) throw ParseError(ctx + ": expected 3 fields, got " + std::to_string(fields.size()));
    char* end = nullptr;
    const double value = std::strtod(fields[2].c_str(), &end);
    if (fields[2].empty() || end != fields[2].c_str() + fields[2].size())
      throw ParseError(ctx + ": value '" + fields[2] + "' is not a number");
    out.push_back(make_score(fields[0], fields[1], value, ctx));
  }
  if (!header_seen) throw ParseError(origin + ": empty score file");
  return out;
}

std::vector<ExternalScoreRecord> ingest_external_scores(const std::filesystem::path& path) {
  return parse_external_scores(read_text_file(path), path.string());
}

}  // namespace castkit
