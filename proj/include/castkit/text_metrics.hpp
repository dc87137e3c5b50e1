#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "castkit/speech_metrics.hpp"
#include "castkit/text.hpp"

namespace castkit::text_metrics {

/// Unique n-grams over total n-grams of the concatenated token stream.
double distinct_n(const TokenSequence& tokens, std::size_t n);
inline double distinct_n(const Script& script, std::size_t n) { return distinct_n(script.tokens(), n); }

/// Moving-average type-token ratio over every window of exactly `window`
/// tokens, stride 1.
double mattr(const TokenSequence& tokens, std::size_t window = 50);
inline double mattr(const Script& script, std::size_t window = 50) { return mattr(script.tokens(), window); }

/// Shannon entropy (bits) of the unigram distribution.
double info_dens(const TokenSequence& tokens);
inline double info_dens(const Script& script) { return info_dens(script.tokens()); }

/// Mean pairwise cosine distance between turn embeddings (one per turn).
double sem_div(std::span<const EmbeddingVector> turn_embeddings);

struct ScriptMetrics {
  std::map<std::size_t, double> distinct;  // n -> Distinct-N
  std::optional<double> mattr;             // absent when the script is shorter than the window
  double info_dens = 0;
  std::optional<double> sem_div;           // absent without turn embeddings
};

struct MetricOptions {
  std::vector<std::size_t> distinct_orders{1, 2};
  std::size_t mattr_window = 50;
};

ScriptMetrics compute_all(const Script& script, const std::vector<EmbeddingVector>* turn_embeddings,
                          const MetricOptions& options = {});

/// One scored script, for aggregation.
struct ScoredScript {
  std::string script_id;
  std::string category;
  ScriptMetrics metrics;
};

/// CSV in the per-system table layout: one row per metric, an "Overall"
/// column followed by one column per category (first-appearance order).
/// Cells are means over the scripts in that category; empty when no script
/// in the category has the metric.
std::string category_table_csv(std::span<const ScoredScript> scripts);

}  // namespace castkit::text_metrics
