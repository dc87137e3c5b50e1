#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "castkit/json_util.hpp"

namespace castkit {

/// Metric families in report order.
inline const std::vector<std::string> kReportFamilies = {"text", "speech", "audio", "subjective"};

/// Raw metric values for one system, grouped by family.
struct SystemMetrics {
  std::string system;
  std::map<std::string, std::map<std::string, double>> families;  // family -> metric -> value
};

/// {"system": ..., "text": {...}, "speech": {...}, ...}
SystemMetrics parse_system_metrics(const json& j);

/// One report per system. Each metric carries its raw value and a min-max
/// normalized value over all systems that report it (1.0 when they all agree;
/// inverted for WER). Families without values are
/// marked "not evaluated". Subjective metrics also form the radar payload.
std::vector<json> build_reports(std::span<const SystemMetrics> systems);
json build_system_report(const SystemMetrics& system);

/// Metric names where a smaller value is better.
bool lower_is_better(const std::string& metric);

}  // namespace castkit
