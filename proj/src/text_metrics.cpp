#include "castkit/text_metrics.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "castkit/error.hpp"

namespace castkit::text_metrics {

namespace {

std::vector<int> intern(const TokenSequence& tokens) {
  std::unordered_map<std::string, int> ids;
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(ids.try_emplace(t, static_cast<int>(ids.size())).first->second);
  return out;
}

}  // namespace

double distinct_n(const TokenSequence& tokens, std::size_t n) {
  if (n == 0) throw ValidationError("Distinct-N order must be positive");
  if (tokens.size() < n)
    throw ValidationError("Distinct-" + std::to_string(n) + " needs at least " + std::to_string(n) +
                          " tokens, got " + std::to_string(tokens.size()));
  const auto ids = intern(tokens);
  const std::size_t total = ids.size() - n + 1;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < total; ++i) {
    std::string key(reinterpret_cast<const char*>(&ids[i]), n * sizeof(int));
    seen.insert(std::move(key));
  }
  return static_cast<double>(seen.size()) / static_cast<double>(total);
}

double mattr(const TokenSequence& tokens, std::size_t window) {
  if (window == 0) throw ValidationError("MATTR window must be positive");
  if (tokens.size() < window)
    throw ValidationError("MATTR window " + std::to_string(window) + " exceeds token count " +
                          std::to_string(tokens.size()));
  const auto ids = intern(tokens);
  std::vector<std::size_t> counts(ids.size(), 0);
  std::size_t types = 0;
  for (std::size_t i = 0; i < window; ++i)
    if (counts[ids[i]]++ == 0) ++types;
  // Sum integer type counts and divide once to keep the mean exact.
  std::size_t type_sum = types;
  for (std::size_t i = window; i < ids.size(); ++i) {
    if (--counts[ids[i - window]] == 0) --types;
    if (counts[ids[i]]++ == 0) ++types;
    type_sum += types;
  }
  const std::size_t windows = ids.size() - window + 1;
  return static_cast<double>(type_sum) / static_cast<double>(window) / static_cast<double>(windows);
}

double info_dens(const TokenSequence& tokens) {
  if (tokens.empty()) throw ValidationError("information density of an empty token stream");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& t : tokens) ++counts[t];
  const auto total = static_cast<double>(tokens.size());
  double h = 0;
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h == 0.0 ? 0.0 : h;  // normalize -0
}

double sem_div(std::span<const EmbeddingVector> turn_embeddings) {
  const std::size_t n = turn_embeddings.size();
  if (n < 2) throw ValidationError("Sem-Div needs at least 2 turns");
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sum += 1.0 - cosine_sim(turn_embeddings[i], turn_embeddings[j]);
  return sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

ScriptMetrics compute_all(const Script& script, const std::vector<EmbeddingVector>* turn_embeddings,
                          const MetricOptions& options) {
  ScriptMetrics m;
  for (std::size_t n : options.distinct_orders)
    if (script.tokens().size() >= n) m.distinct[n] = distinct_n(script, n);
  if (script.tokens().size() >= options.mattr_window) m.mattr = mattr(script, options.mattr_window);
  m.info_dens = info_dens(script);
  if (turn_embeddings) {
    if (turn_embeddings->size() != script.turns().size())
      throw ValidationError("turn embedding count " + std::to_string(turn_embeddings->size()) +
                            " does not match turn count " + std::to_string(script.turns().size()));
    m.sem_div = sem_div(*turn_embeddings);
  }
  return m;
}

std::string category_table_csv(std::span<const ScoredScript> scripts) {
  std::vector<std::string> categories;
  for (const auto& s : scripts)
    if (std::find(categories.begin(), categories.end(), s.category) == categories.end())
      categories.push_back(s.category);

  using Getter = std::function<std::optional<double>(const ScriptMetrics&)>;
  std::vector<std::pair<std::string, Getter>> rows;
  std::vector<std::size_t> orders;
  for (const auto& s : scripts)
    for (const auto& [n, _] : s.metrics.distinct)
      if (std::find(orders.begin(), orders.end(), n) == orders.end()) orders.push_back(n);
  std::sort(orders.begin(), orders.end());
  for (std::size_t n : orders)
    rows.emplace_back("Distinct_" + std::to_string(n), [n](const ScriptMetrics& m) -> std::optional<double> {
      auto it = m.distinct.find(n);
      return it == m.distinct.end() ? std::nullopt : std::optional<double>(it->second);
    });
  rows.emplace_back("Info-Dens", [](const ScriptMetrics& m) -> std::optional<double> { return m.info_dens; });
  rows.emplace_back("Sem-Div", [](const ScriptMetrics& m) { return m.sem_div; });
  rows.emplace_back("MATTR", [](const ScriptMetrics& m) { return m.mattr; });

  auto cell = [&](const Getter& get, const std::string* category) -> std::string {
    double sum = 0;
    std::size_t count = 0;
    for (const auto& s : scripts) {
      if (category && s.category != *category) continue;
      if (auto v = get(s.metrics)) {
        sum += *v;
        ++count;
      }
    }
    if (count == 0) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", sum / static_cast<double>(count));
    return buf;
  };

  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };

  std::ostringstream out;
  out << "Metrics,Overall";
  for (const auto& c : categories) out << ',' << quote(c);
  out << '\n';
  for (const auto& [name, get] : rows) {
    out << name << ',' << cell(get, nullptr);
    for (const auto& c : categories) out << ',' << cell(get, &c);
    out << '\n';
  }
  return out.str();
}

}  // namespace castkit::text_metrics
