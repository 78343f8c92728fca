// slag-lab: command-line driver for sampling, conjugates, rotations,
// residuals, the Dirichlet solver, audits and experiment runs.
//
// Exit status: 0 success, 1 failed audit or compute error, 2 usage or
// configuration error.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "slag/audit.hpp"
#include "slag/error.hpp"
#include "slag/experiments.hpp"
#include "slag/fenchel.hpp"
#include "slag/field_io.hpp"
#include "slag/operators.hpp"
#include "slag/rotation.hpp"
#include "slag/solver.hpp"

namespace {

using namespace slag;
using nlohmann::json;

struct Globals {
  int grid = 0;  // nodes per unit length; overrides h when set
  double h = 1.0 / 32;
  std::string out;
  std::optional<double> tol;
  std::uint64_t seed = 20240917;

  double spacing() const { return grid > 0 ? 1.0 / grid : h; }
};

// Where a subcommand's input field comes from.
struct Source {
  std::string in;
  std::string formula;
  int dim = 2;
  double radius = 1.0;
  int pad = 0;

  void attach(CLI::App* app) {
    app->add_option("--in", in, "input field (.pf1 or .csv)");
    app->add_option("--formula", formula, "builtin formula, e.g. quad:3");
    app->add_option("--dim", dim, "dimension for --formula")->check(CLI::Range(2, 3));
    app->add_option("--radius", radius, "ball radius for --formula");
    app->add_option("--pad", pad, "padding cells for --formula");
  }

  PotentialField load(const Globals& g) const {
    if (in.empty() == formula.empty()) throw ConfigError("give exactly one of --in and --formula");
    if (!in.empty()) return read_field(in);
    return sample_potential(builtin_formula(formula), GridSpec::ball(dim, g.spacing(), radius, pad));
  }
};

void emit(const Globals& g, const PotentialField& f, const std::string& fallback) {
  const std::string path = g.out.empty() ? fallback : g.out;
  write_field(path, f);
  std::cerr << fmt::format("wrote {} ({} masked of {} nodes)\n", path, f.masked_count(), f.grid.size());
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

Point parse_point(const std::vector<double>& v, int dim) {
  if (static_cast<int>(v.size()) != dim) throw ConfigError(fmt::format("--at needs {} coordinates", dim));
  Point p{0.0, 0.0, 0.0};
  std::copy(v.begin(), v.end(), p.begin());
  return p;
}

json points_json(const std::vector<Point>& pts, int dim) {
  json arr = json::array();
  for (const Point& p : pts) arr.push_back(std::vector<double>(p.begin(), p.begin() + dim));
  return arr;
}

int threads_cap(int requested) {
  int cap = requested;
  if (const char* env = std::getenv("SLAG_LAB_THREADS")) {
    try {
      cap = std::min(cap, std::max(1, std::stoi(env)));
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("SLAG_LAB_THREADS='{}' is not an integer", env));
    }
  }
  return std::max(1, cap);
}

// Runs configs on up to `threads` workers; logs are printed in input order.
int run_all(const std::vector<ExperimentConfig>& cfgs, int threads) {
  std::vector<std::string> logs(cfgs.size());
  std::vector<int> codes(cfgs.size(), 0);
  std::atomic<std::size_t> next{0};
  std::mutex print_mu;
  std::size_t printed = 0;
  const auto flush_ready = [&](std::vector<bool>& done) {
    while (printed < cfgs.size() && done[printed]) std::cout << logs[printed++] << std::flush;
  };
  std::vector<bool> done(cfgs.size(), false);
  const auto worker = [&] {
    for (std::size_t i = next++; i < cfgs.size(); i = next++) {
      std::ostringstream os;
      codes[i] = run_experiment(cfgs[i], os);
      std::lock_guard lock(print_mu);
      logs[i] = os.str();
      done[i] = true;
      flush_ready(done);
    }
  };
  const int n = std::min<int>(threads, static_cast<int>(cfgs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  int worst = 0;
  for (int c : codes) worst = std::max(worst, c);
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slag-lab: special Lagrangian rotation and Legendre transform experiments"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help and exit");
  app.set_version_flag("--version", "slag-lab 1.0");
  Globals g;
  app.add_option("--grid", g.grid, "nodes per unit length (h = 1/grid)")->check(CLI::PositiveNumber);
  app.add_option("--h", g.h, "grid spacing")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output file or directory");
  app.add_option("--tol", g.tol, "tolerance for subdifferentials and audits");
  app.add_option("--seed", g.seed, "seed for randomized sweeps");
  app.fallthrough();

  // sample
  Source sample_src;
  auto* sample = app.add_subcommand("sample", "sample a builtin formula on a ball grid");
  sample_src.attach(sample);
  sample->callback([&] { emit(g, sample_src.load(g), "sample.pf1"); });

  // conjugate
  Source conj_src;
  bool brute = false;
  double slope_h = 0.0;
  auto* conj = app.add_subcommand("conjugate", "discrete Legendre-Fenchel transform");
  conj_src.attach(conj);
  conj->add_flag("--brute", brute, "use the O(NM) reference transform");
  conj->add_option("--slope-h", slope_h, "slope grid spacing (default: source spacing)");
  conj->callback([&] {
    const PotentialField f = conj_src.load(g);
    const SlopeGrid s = auto_slope_grid(f, slope_h);
    emit(g, brute ? conjugate_brute(f, s) : conjugate_fast(f, s), "conjugate.pf1");
  });

  // subdiff
  Source sub_src;
  std::vector<double> at;
  auto* subd = app.add_subcommand("subdiff", "discrete subdifferential at a point");
  sub_src.attach(subd);
  subd->add_option("--at", at, "point coordinates")->required()->delimiter(',');
  subd->callback([&] {
    const PotentialField f = sub_src.load(g);
    const SlopeSet s = subdifferential(f, parse_point(at, f.grid.dim), g.tol);
    const Point a = s.anchor;
    print_json({{"anchor", std::vector<double>(a.begin(), a.begin() + s.dim)},
                {"anchor_node", s.anchor_node},
                {"tolerance", s.tolerance},
                {"min_gap", s.min_gap},
                {"members", points_json(s.members, s.dim)}});
  });

  // slope-domain
  Source dom_src;
  auto* dom = app.add_subcommand("slope-domain", "slope-space image of the domain as a 0/1 field");
  dom_src.attach(dom);
  dom->callback([&] {
    const DomainMask d = slope_domain(dom_src.load(g));
    PotentialField f;
    f.grid = d.slope_grid;
    f.mask.assign(f.grid.size(), 1);
    f.values.assign(f.grid.size(), 0.0);
    for (std::size_t k = 0; k < f.values.size(); ++k) f.values[k] = d.inside[k] ? 1.0 : 0.0;
    f.value_kind = "slope_domain";
    emit(g, f, "slope-domain.pf1");
  });

  // rotate
  Source rot_src;
  double alpha = std::numbers::pi / 4;
  std::optional<double> delta;
  bool no_polish = false, inverse = false;
  auto* rot = app.add_subcommand("rotate", "Lagrangian angle rotation of a potential");
  rot_src.attach(rot);
  rot->add_option("--alpha", alpha, "rotation angle in (0, pi/2)");
  rot->add_option("--delta", delta, "semiconvexity margin (default cot alpha)");
  rot->add_flag("--no-polish", no_polish, "keep lattice conjugate values");
  rot->add_flag("--inverse", inverse, "rotate back by -alpha");
  rot->callback([&] {
    RotateOptions opt;
    opt.delta = delta;
    opt.polish = !no_polish;
    const RotationParams p = RotationParams::from_angle(alpha);
    const PotentialField u = rot_src.load(g);
    emit(g, inverse ? unrotate(u, p, opt) : rotate(u, p, opt).field, "rotated.pf1");
  });

  // residual
  Source res_src;
  double theta = std::numbers::pi / 2, phi = 0.0;
  std::string variant = "slag";
  auto* res = app.add_subcommand("residual", "node-wise residual of the slag, MA or MAR operator");
  res_src.attach(res);
  res->add_option("--theta", theta, "phase for slag");
  res->add_option("--phi", phi, "right-hand side for MA and MAR");
  res->add_option("--variant", variant, "slag, MA or MAR");
  res->callback([&] {
    const HessianField h = hessian_field(res_src.load(g));
    const Variant v = parse_variant(variant);
    if (v == Variant::SLAG) {
      emit(g, slag_residual(h, theta), "residual.pf1");
      return;
    }
    const FlaggedResidual r = v == Variant::MA ? ma_residual(h, phi) : mar_residual(h, phi);
    emit(g, r.residual, "residual.pf1");
    print_json(to_json(r.flags));
  });

  // solve
  Source solve_src;
  double solve_theta = std::numbers::pi / 2;
  SolverConfig solver;
  auto* solve = app.add_subcommand("solve", "Newton solve of the Dirichlet problem");
  solve_src.attach(solve);
  solve->add_option("--theta", solve_theta, "phase");
  solve->add_option("--max-iters", solver.max_iters, "Newton iteration cap");
  solve->add_option("--residual-tol", solver.residual_tol, "stopping residual (max norm)");
  solve->add_flag("--require-convex", solver.require_convex, "stop on a convexity breach");
  solve->callback([&] {
    const PotentialField b = solve_src.load(g);
    ProblemSpec spec;
    spec.dim = b.grid.dim;
    spec.theta = solve_theta;
    try {
      spec.validate();
      solver.validate();
    } catch (const PreconditionError& e) {
      throw ConfigError(e.what());
    }
    const SolveResult r = solve_dirichlet(b, spec, solver);
    emit(g, r.field, "solution.pf1");
    print_json(to_json(r.report));
    if (!r.report.converged) throw Error(r.report.message);
  });

  // audit
  Source aud_src;
  std::string check;
  double aud_theta = std::numbers::pi / 2, aud_alpha = std::numbers::pi / 4;
  std::optional<double> aud_delta;
  std::vector<double> eps;
  int m = 1, rim = 2, count = 100000;
  double gap_tol = -1.0;
  std::vector<double> spectrum;
  bool control = false;
  auto* aud = app.add_subcommand("audit", "viscosity, rotation and maximum-principle audits");
  aud_src.attach(aud);
  aud->add_option("--check", check, "audit to run")
      ->required()
      ->check(CLI::IsMember({"super", "sub", "rotation-super", "rotation-sub", "bm", "coeffs", "hessian-bound",
                             "subharmonicity"}));
  aud->add_option("--theta", aud_theta, "phase");
  aud->add_option("--alpha", aud_alpha, "rotation angle");
  aud->add_option("--delta", aud_delta, "semiconvexity margin (default cot(alpha)/2)");
  aud->add_option("--eps", eps, "mollifier radii, in units of h")->delimiter(',');
  aud->add_option("--m", m, "number of top eigenvalues for b_m");
  aud->add_option("--gap-tol", gap_tol, "spectral gap tolerance (default 10h)");
  aud->add_option("--rim", rim, "rim exclusion in cells");
  aud->add_option("--lambdas", spectrum, "spectrum for coeffs (omit to sweep)")->delimiter(',');
  aud->add_option("--count", count, "tuples in the coeffs sweep");
  aud->add_flag("--control", control, "coeffs sweep without the ordering hypothesis");
  aud->callback([&] {
    AuditReport r;
    if (check == "coeffs") {
      if (!spectrum.empty()) {
        Spectrum s;
        s.dim = static_cast<int>(spectrum.size());
        if (s.dim < 2 || s.dim > 3) throw ConfigError("--lambdas needs 2 or 3 values");
        std::copy(spectrum.begin(), spectrum.end(), s.values.begin());
        r = coefficient_audit(s, m);
      } else {
        const SweepResult s = coefficient_sweep(static_cast<std::size_t>(count), g.seed, control);
        r.name = control ? "coefficient-sweep-control" : "coefficient-sweep";
        r.checked_nodes = s.tuples;
        r.observe(s.min_value);
        r.metrics["negatives"] = static_cast<double>(s.negatives);
        if (s.negatives > 0) r.violate(0, "negative_coefficients", static_cast<double>(s.negatives));
        r.finalize();
      }
    } else {
      const PotentialField u = aud_src.load(g);
      JetCheckConfig jet;
      if (g.tol) jet.tolerance = *g.tol;
      jet.rim_exclusion = rim;
      const RotationParams p = RotationParams::from_angle(aud_alpha);
      const double d = aud_delta.value_or(p.cot() / 2);
      if (check == "super") {
        r = check_supersolution(u, aud_theta, jet);
      } else if (check == "sub") {
        r = check_subsolution(u, aud_theta, jet);
      } else if (check == "rotation-super") {
        r = check_rotation_preserves_supersolution(u, aud_theta, aud_alpha, d, jet);
      } else if (check == "rotation-sub") {
        if (eps.empty()) throw ConfigError("rotation-sub needs --eps");
        std::vector<double> radii;
        for (double e : eps) radii.push_back(e * u.grid.spacing);
        r = check_rotation_preserves_subsolution(u, aud_theta, aud_alpha, radii, jet);
      } else if (check == "hessian-bound") {
        HarnessConfig hc;
        hc.alpha = aud_alpha;
        hc.rim_exclusion = rim;
        if (g.tol) hc.tolerance = *g.tol;
        r = hessian_bound_harness(u, hc);
      } else {
        RotateOptions opt;
        opt.delta = d;
        const RotatedPotential v = rotate(u, p, opt);
        if (check == "bm") {
          const FlaggedResidual b = bm_field(v, m, gap_tol);
          if (!g.out.empty()) emit(g, b.residual, g.out);
          r = b.flags;
        } else {
          SubharmonicityConfig sc;
          sc.m = m;
          sc.gap_tol = gap_tol;
          sc.rim_exclusion = rim;
          r = subharmonicity_trial(v, u, sc);
        }
      }
    }
    print_json(to_json(r));
    if (!r.passed) throw Error(fmt::format("audit '{}' failed with {} violations", check, r.violations.size()));
  });

  // run
  std::string config_path, builtin;
  bool all = false;
  int parallel = 1;
  auto* run = app.add_subcommand("run", "run a configured or builtin experiment");
  run->add_option("--config", config_path, "key = value experiment file");
  run->add_option("--builtin", builtin, "registry entry name");
  run->add_flag("--all", all, "run every registry entry");
  run->add_option("--parallel", parallel, "concurrent experiments (capped by SLAG_LAB_THREADS)")
      ->check(CLI::PositiveNumber);
  bool list = false;
  run->add_flag("--list", list, "list registry entries");
  int run_status = 0;
  run->callback([&] {
    if (list) {
      for (const BuiltinExperiment& e : builtin_experiments()) std::cout << fmt::format("{:<20} {}\n", e.name, e.description);
      return;
    }
    if (int(!config_path.empty()) + int(!builtin.empty()) + int(all) != 1)
      throw ConfigError("give exactly one of --config, --builtin and --all");
    const std::string root = g.out.empty() ? "slag-out" : g.out;
    std::vector<ExperimentConfig> cfgs;
    if (!config_path.empty()) {
      ExperimentConfig c = parse_config_file(config_path);
      if (!g.out.empty()) c.out_dir = g.out;
      cfgs.push_back(std::move(c));
    } else {
      std::vector<std::string> names;
      if (all)
        for (const BuiltinExperiment& e : builtin_experiments()) names.push_back(e.name);
      else
        names.push_back(builtin);
      for (const std::string& n : names) {
        ExperimentConfig c;
        c.builtin = n;
        c.seed = g.seed;
        c.out_dir = std::filesystem::path(root) / n;
        cfgs.push_back(std::move(c));
      }
    }
    run_status = run_all(cfgs, threads_cap(parallel));
  });

  // convert
  std::string conv_in, conv_out, format;
  auto* conv = app.add_subcommand("convert", "convert between PF1 and CSV");
  conv->add_option("input", conv_in, "input field")->required();
  conv->add_option("output", conv_out, "output field")->required();
  conv->add_option("--format", format, "pf1 or csv (default: by extension)")->check(CLI::IsMember({"pf1", "csv"}));
  conv->callback([&] {
    const PotentialField f = read_field(conv_in);
    if (format == "csv")
      write_csv(std::filesystem::path(conv_out), f);
    else if (format == "pf1")
      write_pf1(conv_out, f);
    else
      write_field(conv_out, f);
    std::cerr << fmt::format("wrote {} (checksum {:016x})\n", conv_out, field_checksum(f));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return run_status;
}
