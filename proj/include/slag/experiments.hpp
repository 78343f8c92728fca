#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "slag/audit.hpp"
#include "slag/grid.hpp"
#include "slag/operators.hpp"
#include "slag/solver.hpp"

namespace slag {

/// Named potentials, written `name` or `name:param`:
///   zero, quad:K, aniso, quartic, quartic-x1:c, radial-quartic:c, mixed:c,
///   partial-legendre:a, x1x2, abs1, tilt-max, two-quad.
/// Throws ConfigError for unknown names or bad parameters.
Formula builtin_formula(const std::string& spec);
std::vector<std::string> builtin_formula_names();

/// Everything one experiment produced.
struct ExperimentOutcome {
  std::string name;
  std::string description;
  std::vector<AuditReport> audits;
  std::vector<std::pair<std::string, PotentialField>> fields;
  std::vector<std::pair<std::string, SolveReport>> solves;
  std::vector<std::string> notes;

  bool passed() const;
  /// One-line digest of the worst audit.
  std::string summary() const;
};

struct BuiltinOptions {
  std::uint64_t seed = 20240917;
};

struct BuiltinExperiment {
  std::string name;
  std::string description;
  std::function<ExperimentOutcome(const BuiltinOptions&)> run;
};

/// The three demonstration runs followed by one entry per acceptance
/// criterion, in criterion order.
const std::vector<BuiltinExperiment>& builtin_experiments();
/// The criterion entries only (ten of them).
std::vector<const BuiltinExperiment*> acceptance_experiments();
/// Throws ConfigError for an unknown name.
const BuiltinExperiment& find_builtin(const std::string& name);

/// Flat key = value configuration.
struct ExperimentConfig {
  std::string name = "experiment";
  std::string builtin;  // non-empty: run that registry entry
  std::uint64_t seed = 20240917;

  int dim = 2;
  double h = 1.0 / 32;
  double radius = 1.0;
  int pad = 0;
  std::string formula;          // builtin formula spec, or
  std::filesystem::path field;  // a PF1/CSV input

  bool solve = false;
  ProblemSpec problem;
  SolverConfig solver;

  double alpha = std::numbers::pi / 4;
  std::optional<double> delta;
  std::vector<double> mollifiers;  // absolute radii
  std::vector<std::string> audits;
  JetCheckConfig jet;
  int m = 1;
  double gap_tol = -1.0;

  std::filesystem::path out_dir = "slag-out";

  /// Throws ConfigError; runs before any compute.
  void validate() const;
};

/// Parses `key = value` lines; `#` and `;` start comments. Unknown keys and
/// malformed numbers are ConfigErrors naming the line.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Audit names accepted by the `audits` key.
const std::vector<std::string>& known_audits();

/// Computes without writing anything.
ExperimentOutcome compute_experiment(const ExperimentConfig& cfg);

/// Writes <name>.pf1 fields, <audit>.json reports, solve reports and
/// summary.csv (name, checked_nodes, min_margin, passed) into `dir`.
void write_outcome(const ExperimentOutcome& out, const std::filesystem::path& dir);

/// Validates, computes, writes. Returns 0 when every audit passed, 1 on a
/// failed audit or a compute error, 2 on a configuration error; messages go
/// to `log`.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace slag
