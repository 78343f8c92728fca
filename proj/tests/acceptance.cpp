// Runs every acceptance criterion at its stated tolerance and prints one
// pass/fail line per criterion. Exit status is the number of failures.

#include <chrono>
#include <cstdio>
#include <exception>

#include <fmt/core.h>

#include "slag/experiments.hpp"

int main() {
  int failures = 0;
  int index = 0;
  for (const slag::BuiltinExperiment* e : slag::acceptance_experiments()) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    std::string line;
    bool ok = false;
    try {
      const slag::ExperimentOutcome out = e->run({});
      ok = out.passed();
      line = out.summary();
      if (!ok)
        for (const slag::AuditReport& a : out.audits)
          if (!a.passed)
            line += fmt::format("\n    failed: {} ({} violations, min margin {:.4g})", a.name, a.violations.size(),
                                a.min_margin);
    } catch (const std::exception& ex) {
      line = fmt::format("error: {}", ex.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fmt::print("criterion {:>2} {:<20} {} [{:.1f}s] {}\n", index, e->name, ok ? "PASS" : "FAIL", secs, line);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  fmt::print("{} of {} criteria passed\n", index - failures, index);
  return failures;
}
