#include "castkit/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "castkit/error.hpp"

namespace castkit {

bool lower_is_better(const std::string& metric) {
  static const std::vector<std::string> names = {"wer"};
  std::string m = metric;
  std::transform(m.begin(), m.end(), m.begin(), [](unsigned char c) { return std::tolower(c); });
  return std::find(names.begin(), names.end(), m) != names.end();
}

SystemMetrics parse_system_metrics(const json& j) {
  SystemMetrics s;
  s.system = require_string(j, "system", "report input");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "system") continue;
    if (std::find(kReportFamilies.begin(), kReportFamilies.end(), it.key()) == kReportFamilies.end())
      throw ValidationError("report input: unknown metric family '" + it.key() + "'");
    if (!it->is_object()) throw ParseError("report input." + it.key() + ": expected an object");
    for (auto m = it->begin(); m != it->end(); ++m) {
      if (m->is_null()) continue;
      if (!m->is_number()) throw ParseError("report input." + it.key() + "." + m.key() + ": expected a number");
      s.families[it.key()][m.key()] = m->get<double>();
    }
  }
  return s;
}

std::vector<json> build_reports(std::span<const SystemMetrics> systems) {
  using Range = std::pair<double, double>;
  std::map<std::pair<std::string, std::string>, Range> ranges;
  for (const auto& s : systems) {
    if (s.families.empty()) throw ValidationError("system '" + s.system + "' has no metric values");
    for (const auto& [family, metrics] : s.families)
      for (const auto& [name, v] : metrics) {
        if (!std::isfinite(v)) continue;
        auto [it, fresh] = ranges.try_emplace({family, name}, Range{v, v});
        if (!fresh) it->second = {std::min(it->second.first, v), std::max(it->second.second, v)};
      }
  }

  std::vector<json> out;
  for (const auto& s : systems) {
    json report = {{"system", s.system}};
    json radar = json::array();
    for (const auto& family : kReportFamilies) {
      auto f = s.families.find(family);
      if (f == s.families.end() || f->second.empty()) {
        report[family] = "not evaluated";
        continue;
      }
      json block = json::object();
      for (const auto& [name, v] : f->second) {
        json cell = {{"raw", v}, {"normalized", nullptr}};
        if (auto r = ranges.find({family, name}); r != ranges.end() && std::isfinite(v)) {
          const auto [lo, hi] = r->second;
          double n = hi > lo ? (v - lo) / (hi - lo) : 1.0;
          if (lower_is_better(name) && hi > lo) n = 1.0 - n;
          cell["normalized"] = n;
        }
        if (family == "subjective") radar.push_back({{"axis", name}, {"raw", v}, {"normalized", cell["normalized"]}});
        block[name] = std::move(cell);
      }
      report[family] = std::move(block);
    }
    report["radar"] = std::move(radar);
    out.push_back(std::move(report));
  }
  return out;
}

json build_system_report(const SystemMetrics& system) {
  return build_reports(std::span<const SystemMetrics>(&system, 1)).front();
}

}  // namespace castkit
