#include "slag/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/core.h>

#include "slag/error.hpp"
#include "slag/field_io.hpp"

namespace slag {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& text, int line) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size())
    throw ConfigError(fmt::format("line {}: '{}' is not a number", line, text));
  return v;
}

int parse_int(const std::string& text, int line) {
  const double v = parse_double(text, line);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(fmt::format("line {}: '{}' is not an integer", line, text));
  return static_cast<int>(v);
}

bool parse_bool(const std::string& text, int line) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(fmt::format("line {}: '{}' is not a boolean", line, text));
}

std::string slug(const std::string& name) {
  std::string s;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_')
      s += c;
    else if (!s.empty() && s.back() != '_')
      s += '_';
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s.empty() ? "audit" : s;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

bool needs_rotation(const std::string& a) { return a == "bm" || a == "subharmonicity"; }

}  // namespace

bool ExperimentOutcome::passed() const {
  return std::all_of(audits.begin(), audits.end(), [](const AuditReport& a) { return a.passed; });
}

std::string ExperimentOutcome::summary() const {
  std::size_t failed = 0, checked = 0;
  const AuditReport* worst = nullptr;
  for (const AuditReport& a : audits) {
    checked += a.checked_nodes;
    if (!a.passed) ++failed;
    if (!worst || a.min_margin < worst->min_margin) worst = &a;
  }
  std::string s = fmt::format("{} audits, {} failed, {} checks", audits.size(), failed, checked);
  if (worst) s += fmt::format(", min margin {:.3g} ({})", worst->min_margin, worst->name);
  return s;
}

const std::vector<std::string>& known_audits() {
  static const std::vector<std::string> names{"super",          "sub", "rotation-super", "rotation-sub", "mollify-sub",
                                              "bm",             "subharmonicity", "hessian-bound", "coeffs"};
  return names;
}

void ExperimentConfig::validate() const {
  if (!builtin.empty()) {
    find_builtin(builtin);
    return;
  }
  if (dim != 2 && dim != 3) throw ConfigError(fmt::format("dim must be 2 or 3, got {}", dim));
  if (!(h > 0.0) || !(radius > 0.0) || pad < 0) throw ConfigError("need h > 0, radius > 0, pad >= 0");
  if (formula.empty() == field.empty()) throw ConfigError("set exactly one of 'formula' and 'field'");
  if (!formula.empty()) builtin_formula(formula);
  if (!field.empty() && !std::filesystem::exists(field))
    throw ConfigError(fmt::format("field file '{}' does not exist", field.string()));
  try {
    problem.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
  if (problem.dim != dim) throw ConfigError("problem dim differs from grid dim");
  if (solve && problem.variant != Variant::SLAG) throw ConfigError("the solver handles variant slag only");
  solver.validate();
  if (!(alpha > 0.0 && alpha < std::numbers::pi / 2)) throw ConfigError("alpha must lie in (0, pi/2)");
  if (delta && !(*delta > 0.0)) throw ConfigError("delta must be positive");
  for (double e : mollifiers)
    if (!(e >= 2.0 * h * (1.0 - 1e-12))) throw ConfigError(fmt::format("mollifier radius {} is below 2h", e));
  for (const std::string& a : audits) {
    const auto& k = known_audits();
    if (std::find(k.begin(), k.end(), a) == k.end()) throw ConfigError(fmt::format("unknown audit '{}'", a));
    if ((a == "rotation-sub" || a == "mollify-sub") && mollifiers.empty())
      throw ConfigError(fmt::format("audit '{}' needs a mollifiers list", a));
  }
  jet.validate();
  if (m < 1 || m > dim) throw ConfigError(fmt::format("m must lie in 1..{}", dim));
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig c;
  std::string raw;
  int line = 0;
  std::vector<std::string> molli;
  int molli_line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    const std::string text = trim(raw.substr(0, hash));
    if (text.empty() || text.front() == '[') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected key = value", line));
    const std::string key = trim(text.substr(0, eq));
    const std::string val = trim(text.substr(eq + 1));
    if (key == "name") c.name = val;
    else if (key == "builtin") c.builtin = val;
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(val, line));
    else if (key == "dim") c.dim = c.problem.dim = parse_int(val, line);
    else if (key == "h") c.h = parse_double(val, line);
    else if (key == "grid") {
      const int n = parse_int(val, line);
      if (n <= 0) throw ConfigError(fmt::format("line {}: grid must be positive", line));
      c.h = 1.0 / n;
    } else if (key == "radius") c.radius = parse_double(val, line);
    else if (key == "pad") c.pad = parse_int(val, line);
    else if (key == "formula") c.formula = val;
    else if (key == "field") c.field = val;
    else if (key == "solve") c.solve = parse_bool(val, line);
    else if (key == "theta") c.problem.theta = parse_double(val, line);
    else if (key == "variant") c.problem.variant = parse_variant(val);
    else if (key == "phi") c.problem.phi = parse_double(val, line);
    else if (key == "max_iters") c.solver.max_iters = parse_int(val, line);
    else if (key == "residual_tol") c.solver.residual_tol = parse_double(val, line);
    else if (key == "damping") c.solver.damping = parse_double(val, line);
    else if (key == "min_step") c.solver.min_step = parse_double(val, line);
    else if (key == "convexity_floor") c.solver.convexity_floor = parse_double(val, line);
    else if (key == "require_convex") c.solver.require_convex = parse_bool(val, line);
    else if (key == "alpha") c.alpha = parse_double(val, line);
    else if (key == "delta") c.delta = parse_double(val, line);
    else if (key == "mollifiers") {
      molli = split_list(val);
      molli_line = line;
    } else if (key == "audits") c.audits = split_list(val);
    else if (key == "tolerance") c.jet.tolerance = parse_double(val, line);
    else if (key == "rim") c.jet.rim_exclusion = parse_int(val, line);
    else if (key == "kink_threshold") c.jet.kink_threshold = parse_double(val, line);
    else if (key == "m") c.m = parse_int(val, line);
    else if (key == "gap_tol") c.gap_tol = parse_double(val, line);
    else if (key == "out") c.out_dir = val;
    else throw ConfigError(fmt::format("line {}: unknown key '{}'", line, key));
  }
  // Mollifier radii may be written in cells ("4h").
  for (const std::string& m : molli) {
    if (m.size() > 1 && m.back() == 'h')
      c.mollifiers.push_back(parse_double(m.substr(0, m.size() - 1), molli_line) * c.h);
    else
      c.mollifiers.push_back(parse_double(m, molli_line));
  }
  return c;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  return parse_config(is);
}

ExperimentOutcome compute_experiment(const ExperimentConfig& cfg) {
  if (!cfg.builtin.empty()) {
    ExperimentOutcome out = find_builtin(cfg.builtin).run({cfg.seed});
    out.name = cfg.builtin;
    return out;
  }
  ExperimentOutcome out;
  out.name = cfg.name;
  const GridSpec g = GridSpec::ball(cfg.dim, cfg.h, cfg.radius, cfg.pad);
  PotentialField u = cfg.formula.empty() ? read_field(cfg.field) : sample_potential(builtin_formula(cfg.formula), g);
  if (cfg.solve) {
    SolveResult s = solve_dirichlet(u, cfg.problem, cfg.solver);
    out.solves.emplace_back("solve", s.report);
    if (!s.report.converged) out.notes.push_back("solver: " + s.report.message);
    u = std::move(s.field);
  }
  out.fields.emplace_back("u", u);
  const RotationParams p = RotationParams::from_angle(cfg.alpha);
  const double delta = cfg.delta.value_or(p.cot() / 2);
  const double theta = cfg.problem.theta;

  std::optional<RotatedPotential> rot;
  if (std::any_of(cfg.audits.begin(), cfg.audits.end(), needs_rotation)) {
    RotateOptions ro;
    ro.delta = delta;
    rot = rotate(u, p, ro);
    out.fields.emplace_back("rotated", rot->field);
  }
  for (const std::string& a : cfg.audits) {
    AuditReport r;
    if (a == "super") {
      r = check_supersolution(u, theta, cfg.jet);
    } else if (a == "sub") {
      r = check_subsolution(u, theta, cfg.jet);
    } else if (a == "rotation-super") {
      r = check_rotation_preserves_supersolution(u, theta, cfg.alpha, delta, cfg.jet);
    } else if (a == "rotation-sub") {
      r = check_rotation_preserves_subsolution(u, theta, cfg.alpha, cfg.mollifiers, cfg.jet);
    } else if (a == "mollify-sub") {
      r = subsolution_preservation_trial(u, theta, cfg.mollifiers, cfg.jet);
    } else if (a == "bm") {
      const FlaggedResidual b = bm_field(*rot, cfg.m, cfg.gap_tol);
      out.fields.emplace_back("bm", b.residual);
      r = b.flags;
    } else if (a == "subharmonicity") {
      SubharmonicityConfig sc;
      sc.m = cfg.m;
      sc.gap_tol = cfg.gap_tol;
      sc.rim_exclusion = cfg.jet.rim_exclusion;
      r = subharmonicity_trial(*rot, u, sc);
    } else if (a == "hessian-bound") {
      HarnessConfig hc;
      hc.alpha = cfg.alpha;
      hc.tolerance = cfg.jet.tolerance;
      hc.rim_exclusion = cfg.jet.rim_exclusion;
      r = hessian_bound_harness(u, hc);
    } else if (a == "coeffs") {
      const SweepResult s = coefficient_sweep(100000, cfg.seed, false);
      r.name = "coefficient-sweep";
      r.checked_nodes = s.tuples;
      r.observe(s.min_value);
      r.metrics["negatives"] = static_cast<double>(s.negatives);
      if (s.negatives > 0) r.violate(0, "negative_coefficients", static_cast<double>(s.negatives));
      r.finalize();
    }
    if (r.name.empty()) r.name = a;
    out.audits.push_back(std::move(r));
  }
  return out;
}

void write_outcome(const ExperimentOutcome& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, f] : out.fields) write_pf1(dir / (name + ".pf1"), f);
  for (const auto& [name, s] : out.solves) {
    std::ofstream os(dir / (slug(name) + "-solve.json"));
    os << to_json(s).dump(2) << '\n';
  }
  std::map<std::string, int> seen;
  std::ofstream csv(dir / "summary.csv");
  csv << "name,checked_nodes,min_margin,passed\n";
  for (const AuditReport& a : out.audits) {
    std::string file = slug(a.name);
    if (const int n = seen[file]++; n > 0) file += fmt::format("-{}", n);
    std::ofstream os(dir / (file + ".json"));
    os << to_json(a).dump(2) << '\n';
    csv << csv_cell(a.name) << ',' << a.checked_nodes << ',' << fmt::format("{:.17g}", a.min_margin) << ','
        << (a.passed ? "true" : "false") << '\n';
  }
}

int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return 2;
  }
  ExperimentOutcome out;
  try {
    out = compute_experiment(cfg);
    write_outcome(out, cfg.out_dir);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
  for (const AuditReport& a : out.audits)
    log << fmt::format("{:<48} {:>9} {:>12.4g} {}\n", a.name, a.checked_nodes, a.min_margin, a.passed ? "pass" : "FAIL");
  for (const std::string& n : out.notes) log << "note: " << n << '\n';
  log << fmt::format("{}: {} ({})\n", out.name, out.passed() ? "passed" : "FAILED", out.summary());
  return out.passed() ? 0 : 1;
}

}  // namespace slag
