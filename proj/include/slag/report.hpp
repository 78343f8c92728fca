#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace slag {

struct Violation {
  std::size_t node;
  std::string quantity;
  double value;
};

/// Outcome of an audit. `passed` is true iff `violations` is empty once
/// finalize() has run; violations are kept sorted by node index.
struct AuditReport {
  std::string name;
  std::size_t checked_nodes = 0;
  std::vector<Violation> violations;
  double min_margin = std::numeric_limits<double>::infinity();
  bool passed = true;
  std::map<std::string, double> metrics;
  std::vector<std::string> notes;

  void observe(double margin) noexcept {
    if (margin < min_margin) min_margin = margin;
  }
  void violate(std::size_t node, std::string quantity, double value);
  /// Folds another report in (counts, violations, margins; metrics are
  /// prefixed with `prefix`).
  void absorb(const AuditReport& other, const std::string& prefix = {});
  AuditReport& finalize();
};

/// Stable schema: {name, checked_nodes, violations[{node,quantity,value}],
/// min_margin, passed, metrics{}, notes[]}. Non-finite numbers become null.
nlohmann::json to_json(const AuditReport& r);

}  // namespace slag
