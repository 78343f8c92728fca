#include "slag/report.hpp"

#include <algorithm>
#include <cmath>

namespace slag {

void AuditReport::violate(std::size_t node, std::string quantity, double value) {
  violations.push_back({node, std::move(quantity), value});
  passed = false;
}

void AuditReport::absorb(const AuditReport& other, const std::string& prefix) {
  checked_nodes += other.checked_nodes;
  for (const auto& v : other.violations) violations.push_back({v.node, prefix + v.quantity, v.value});
  min_margin = std::min(min_margin, other.min_margin);
  for (const auto& [k, v] : other.metrics) metrics[prefix + k] = v;
  for (const auto& n : other.notes) notes.push_back(prefix + n);
  passed = passed && other.passed;
}

AuditReport& AuditReport::finalize() {
  std::stable_sort(violations.begin(), violations.end(),
                   [](const Violation& a, const Violation& b) { return a.node < b.node; });
  passed = violations.empty();
  return *this;
}

namespace {

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const AuditReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["checked_nodes"] = r.checked_nodes;
  j["violations"] = nlohmann::json::array();
  for (const auto& v : r.violations)
    j["violations"].push_back({{"node", v.node}, {"quantity", v.quantity}, {"value", num(v.value)}});
  j["min_margin"] = num(r.min_margin);
  j["passed"] = r.passed;
  j["metrics"] = nlohmann::json::object();
  for (const auto& [k, v] : r.metrics) j["metrics"][k] = num(v);
  j["notes"] = r.notes;
  return j;
}

}  // namespace slag
