#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/core.h>

#include "slag/error.hpp"
#include "slag/experiments.hpp"
#include "slag/fenchel.hpp"
#include "slag/hessian.hpp"
#include "slag/rotation.hpp"

namespace slag {

namespace {

constexpr double kPi = std::numbers::pi;

AuditReport named(std::string name) {
  AuditReport r;
  r.name = std::move(name);
  return r;
}

void at_most(AuditReport& r, std::size_t item, const std::string& quantity, double value, double limit) {
  ++r.checked_nodes;
  r.observe(limit - value);
  if (!(value <= limit)) r.violate(item, quantity, value);
}

void at_least(AuditReport& r, std::size_t item, const std::string& quantity, double value, double limit) {
  ++r.checked_nodes;
  r.observe(value - limit);
  if (!(value >= limit)) r.violate(item, quantity, value);
}

PotentialField with_mask(PotentialField u, const Mask& keep) {
  for (std::size_t k = 0; k < u.mask.size(); ++k) u.mask[k] = u.mask[k] && keep[k];
  return u;
}

PotentialField within_radius(PotentialField u, double radius) {
  for (std::size_t k = 0; k < u.mask.size(); ++k)
    if (norm(u.grid.coords(k), u.grid.dim) > radius) u.mask[k] = 0;
  return u;
}

SymMatrix random_orthogonal(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal;
  SymMatrix q(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) q(i, j) = normal(rng);
    for (int p = 0; p < j; ++p) {
      double d = 0.0;
      for (int i = 0; i < n; ++i) d += q(i, j) * q(i, p);
      for (int i = 0; i < n; ++i) q(i, j) -= d * q(i, p);
    }
    double len = 0.0;
    for (int i = 0; i < n; ++i) len += q(i, j) * q(i, j);
    len = std::sqrt(len);
    for (int i = 0; i < n; ++i) q(i, j) /= len;
  }
  return q;
}

/// Q diag(d) Qᵀ with a random orthogonal Q.
SymMatrix random_symmetric(std::mt19937_64& rng, const std::vector<double>& eig) {
  const int n = static_cast<int>(eig.size());
  const SymMatrix q = random_orthogonal(rng, n);
  SymMatrix a(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += q(i, k) * eig[k] * q(j, k);
      a(i, j) = s;
    }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) a(j, i) = a(i, j);
  return a;
}

Formula quadratic_form(const SymMatrix& a) {
  return [a](const Point& x) {
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i)
      for (int j = 0; j < a.dim(); ++j) s += a(i, j) * x[i] * x[j];
    return 0.5 * s;
  };
}

struct Plane {
  Point p;
  double b;
};

Formula max_affine(std::vector<Plane> planes, int dim) {
  return [planes = std::move(planes), dim](const Point& x) {
    double best = -std::numeric_limits<double>::infinity();
    for (const Plane& pl : planes) best = std::max(best, dot(pl.p, x, dim) + pl.b);
    return best;
  };
}

std::vector<Plane> random_planes(std::mt19937_64& rng, int count, int dim, double slope_range, double lattice) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Plane> planes;
  for (int i = 0; i < count; ++i) {
    Plane pl{{0.0, 0.0, 0.0}, 0.3 * u(rng)};
    for (int a = 0; a < dim; ++a) {
      pl.p[a] = slope_range * u(rng);
      if (lattice > 0.0) pl.p[a] = lattice * std::round(pl.p[a] / lattice);
    }
    planes.push_back(pl);
  }
  return planes;
}

std::vector<double> uniform_list(std::mt19937_64& rng, int count, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out(count);
  for (double& v : out) v = u(rng);
  return out;
}

// Per-node test over the rotated interior (2-cell rim of the rotated mask).
template <class Fn>
void over_rotated_interior(const RotatedPotential& r, Fn&& fn) {
  const HessianField h = hessian_field(r.field);
  const Mask inner = erode(r.field.grid, r.field.mask, 2);
  for (std::size_t k = 0; k < h.matrices.size(); ++k)
    if (h.interior[k] && inner[k]) fn(k, eigen_decompose(h.matrices[k]));
}

double centre_hessian_norm(const PotentialField& u) {
  const HessianField h = hessian_field(u);
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < h.matrices.size(); ++k) {
    if (!h.interior[k]) continue;
    const Point x = u.grid.coords(k);
    const double d = dot(x, x, u.grid.dim);
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  const Spectrum s = eigen_decompose(h.matrices[best]);
  return std::max(std::abs(s.max()), std::abs(s.min()));
}

const RotationParams& quarter() {
  static const RotationParams p = RotationParams::from_angle(kPi / 4);
  return p;
}

AuditReport quadratic_identity_report(double K, double h, PotentialField* keep) {
  const GridSpec g = GridSpec::ball(2, h);
  const PotentialField u = sample_potential(builtin_formula(fmt::format("quad:{}", K)), g);
  const RotatedPotential r = rotate(u, quarter());
  const double target = (K - 1.0) / (K + 1.0);
  AuditReport rep = named(fmt::format("quadratic-identity K={}", K));
  double worst = 0.0;
  over_rotated_interior(r, [&](std::size_t k, const Spectrum& s) {
    const double err = std::max(std::abs(s.max() - target), std::abs(s.min() - target));
    worst = std::max(worst, err);
    at_most(rep, k, "eigenvalue_error", err, 1e-6);
  });
  rep.metrics["target"] = target;
  rep.metrics["max_error"] = worst;
  if (keep) *keep = r.field;
  return rep.finalize();
}

// ---------------------------------------------------------------- demos

ExperimentOutcome quadratic_rotation(const BuiltinOptions&) {
  ExperimentOutcome out;
  out.name = "quadratic-rotation";
  PotentialField rotated;
  out.audits.push_back(quadratic_identity_report(3.0, 1.0 / 32, &rotated));
  out.fields.emplace_back("rotated", std::move(rotated));
  return out;
}

ExperimentOutcome zero_potential(const BuiltinOptions&) {
  ExperimentOutcome out;
  out.name = "zero-potential";
  for (int n : {2, 3}) {
    const GridSpec g = GridSpec::ball(n, n == 2 ? 1.0 / 32 : 1.0 / 8);
    const RotatedPotential r = rotate(sample_potential(builtin_formula("zero"), g), quarter());
    AuditReport spec = named(fmt::format("zero-potential n={} spectrum", n));
    AuditReport phase = named(fmt::format("zero-potential n={} phase", n));
    over_rotated_interior(r, [&](std::size_t k, const Spectrum& s) {
      double err = 0.0;
      for (int i = 0; i < n; ++i) err = std::max(err, std::abs(s[i] + 1.0));
      at_most(spec, k, "eigenvalue_error", err, 1e-6);
      at_most(phase, k, "phase_error", std::abs(phase_sum(s) + n * kPi / 4), 1e-6);
    });
    out.audits.push_back(spec.finalize());
    out.audits.push_back(phase.finalize());
    if (n == 2) out.fields.emplace_back("rotated", r.field);
  }
  return out;
}

AuditReport det_oracle(const PotentialField& u, double limit) {
  AuditReport rep = named("det-oracle");
  const HessianField h = hessian_field(u);
  double worst = 0.0;
  for (std::size_t k = 0; k < h.matrices.size(); ++k) {
    if (!h.interior[k]) continue;
    const double err = std::abs(h.matrices[k].determinant() - 1.0);
    worst = std::max(worst, err);
    at_most(rep, k, "det_error", err, limit);
  }
  rep.metrics["max_det_error"] = worst;
  return rep.finalize();
}

ExperimentOutcome ma_duality(const BuiltinOptions&) {
  ExperimentOutcome out;
  out.name = "ma-duality";
  const GridSpec g = GridSpec::ball(2, 1.0 / 64);
  const SolveResult s = solve_dirichlet(builtin_formula("quartic-x1:0.1"), {2, kPi / 2}, g);
  AuditReport conv = named("ma-duality solve");
  at_most(conv, 0, "final_residual", s.report.final_residual, SolverConfig{}.residual_tol);
  out.audits.push_back(conv.finalize());
  out.audits.push_back(det_oracle(s.field, 5e-3));
  out.fields.emplace_back("solution", s.field);
  out.solves.emplace_back("solve", s.report);
  return out;
}

// ------------------------------------------------------------- criteria

ExperimentOutcome quadratic_identity(const BuiltinOptions&) {
  ExperimentOutcome out;
  out.name = "quadratic-identity";
  for (double K : {0.5, 1.0, 3.0, 10.0}) out.audits.push_back(quadratic_identity_report(K, 1.0 / 64, nullptr));
  return out;
}

ExperimentOutcome phase_shift(const BuiltinOptions& opt) {
  ExperimentOutcome out;
  out.name = "phase-shift";
  std::mt19937_64 rng(opt.seed);
  for (int n : {2, 3}) {
    const std::vector<double> eig = n == 2 ? std::vector<double>{1.5, -0.25} : std::vector<double>{2.0, 0.6, -0.2};
    double theta = 0.0;
    for (double l : eig) theta += std::atan(l);
    const SymMatrix a = random_symmetric(rng, eig);
    const GridSpec g = GridSpec::ball(n, n == 2 ? 1.0 / 32 : 1.0 / 10);
    const PotentialField u = sample_potential(quadratic_form(a), g);
    const double modulus = directional_convexity(u).modulus;
    for (double alpha : {kPi / 8, kPi / 4, 3 * kPi / 8}) {
      const RotationParams p = RotationParams::from_angle(alpha);
      RotateOptions ro;
      ro.delta = 0.5 * (p.cot() + std::min(0.0, modulus));
      const RotatedPotential r = rotate(u, p, ro);
      const double target = theta - n * alpha;
      AuditReport rep = named(fmt::format("phase-shift n={} alpha={:.4f}", n, alpha));
      double worst = 0.0;
      over_rotated_interior(r, [&](std::size_t k, const Spectrum& s) {
        const double err = std::abs(phase_sum(s) - target);
        worst = std::max(worst, err);
        at_most(rep, k, "phase_error", err, 1e-6);
      });
      rep.metrics["target_phase"] = target;
      rep.metrics["max_error"] = worst;
      out.audits.push_back(rep.finalize());
    }
  }
  return out;
}

ExperimentOutcome legendre_laws(const BuiltinOptions& opt) {
  ExperimentOutcome out;
  out.name = "legendre-laws";
  std::mt19937_64 rng(opt.seed + 3);
  const double h = 1.0 / 32;
  const GridSpec g = GridSpec::ball(2, h);

  AuditReport invol = named("biconjugate");
  AuditReport shift = named("shift-law");
  AuditReport order = named("order-reversal");
  std::vector<PotentialField> inputs;
  for (int i = 0; i < 5; ++i)
    inputs.push_back(sample_potential(quadratic_form(random_symmetric(rng, uniform_list(rng, 2, 0.5, 3.0))), g));
  for (int i = 0; i < 5; ++i)
    // Lattice slopes: the slope grid contains every piece's gradient.
    inputs.push_back(sample_potential(max_affine(random_planes(rng, 4, 2, 1.0, h), 2), g));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const PotentialField& f = inputs[i];
    const SlopeGrid s = auto_slope_grid(f);
    const Conjugate fs = conjugate_fast_argmax(f, s);
    const PotentialField fss = conjugate_fast(fs.values, f.grid);
    double err = 0.0;
    for (std::size_t k = 0; k < f.grid.size(); ++k)
      if (f.mask[k]) err = std::max(err, std::abs(fss.values[k] - f.values[k]));
    at_most(invol, i, i < 5 ? "quadratic" : "max_affine", err, 4 * h * h);

    const double c = 0.375;
    PotentialField fc = f;
    for (double& v : fc.values) v += c;
    const Conjugate fcs = conjugate_fast_argmax(fc, s);
    double serr = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double ref = fs.values.values[k] - c;
      serr = std::max(serr, std::abs(fcs.values.values[k] - ref) / (1.0 + std::abs(ref)));
    }
    at_most(shift, i, "relative_shift_error", serr, 4 * std::numeric_limits<double>::epsilon());

    PotentialField big = f;
    for (std::size_t k = 0; k < big.values.size(); ++k) {
      const Point x = g.coords(k);
      big.values[k] += 0.125 * dot(x, x, 2) + 0.01;
    }
    const PotentialField fb = conjugate_brute(f, s);
    const PotentialField gb = conjugate_brute(big, s);
    const PotentialField gf = conjugate_fast(big, s);
    std::size_t wrong = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (gb.values[k] > fb.values[k]) ++wrong;
      if (gf.values[k] > fs.values.values[k]) ++wrong;
    }
    at_most(order, i, "order_violations", static_cast<double>(wrong), 0.0);
  }
  out.audits.push_back(invol.finalize());
  out.audits.push_back(shift.finalize());
  out.audits.push_back(order.finalize());

  AuditReport fast = named("fast-vs-brute");
  for (int i = 0; i < 20; ++i) {
    PotentialField f;
    switch (i % 4) {
      case 0:
        f = sample_potential(quadratic_form(random_symmetric(rng, uniform_list(rng, 2, 0.2, 4.0))), g);
        break;
      case 1:
        f = sample_potential(max_affine(random_planes(rng, 6, 2, 1.5, 0.0), 2), g);
        break;
      case 2: {
        const Formula q = quadratic_form(random_symmetric(rng, uniform_list(rng, 2, 0.2, 2.0)));
        const double c = uniform_list(rng, 1, 0.05, 0.5)[0];
        f = sample_potential(
            [q, c](const Point& x) {
              const double r2 = x[0] * x[0] + x[1] * x[1];
              return q(x) + c * r2 * r2;
            },
            g);
        break;
      }
      default:
        f = sample_potential(quadratic_form(random_symmetric(rng, uniform_list(rng, 3, 0.2, 3.0))),
                             GridSpec::ball(3, 1.0 / 8));
    }
    const SlopeGrid s = auto_slope_grid(f);
    const PotentialField a = conjugate_fast(f, s);
    const PotentialField b = conjugate_brute(f, s);
    double err = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) err = std::max(err, std::abs(a.values[k] - b.values[k]));
    at_most(fast, static_cast<std::size_t>(i), "max_difference", err, 1e-12);
  }
  out.audits.push_back(fast.finalize());
  return out;
}

ExperimentOutcome sum_rule(const BuiltinOptions& opt) {
  ExperimentOutcome out;
  out.name = "sum-rule";
  std::mt19937_64 rng(opt.seed + 4);
  const GridSpec g = GridSpec::ball(2, 1.0 / 32);
  for (int i = 0; i < 10; ++i) {
    const PotentialField v = sample_potential(max_affine(random_planes(rng, 5, 2, 1.0, 0.0), 2), g);
    const double kappa = uniform_list(rng, 1, 0.5, 2.0)[0];
    const Mask deep = erode(g, v.mask, 3);
    // Crease-adjacent nodes are skipped by the audit, so draw from the rest.
    PotentialField w = v;
    for (std::size_t k = 0; k < g.size(); ++k) w.values[k] += 0.5 * kappa * dot(g.coords(k), g.coords(k), 2);
    const double limit = 2.0 * std::max(auto_slope_grid(v).spacing, auto_slope_grid(w).spacing);
    const Mask crease = crease_nodes(v, limit);
    std::vector<std::size_t> pool;
    for (std::size_t k = 0; k < g.size(); ++k)
      if (deep[k] && !crease[k]) pool.push_back(k);
    std::vector<std::size_t> samples;
    std::sample(pool.begin(), pool.end(), std::back_inserter(samples), 10, rng);
    AuditReport r = check_sum_rule(v, kappa, samples);
    r.name = fmt::format("sum-rule #{} kappa={:.3f}", i, kappa);
    out.audits.push_back(r);
  }
  return out;
}

ExperimentOutcome rotation_window(const BuiltinOptions& opt) {
  ExperimentOutcome out;
  out.name = "rotation-window";
  std::mt19937_64 rng(opt.seed + 5);
  const GridSpec g = GridSpec::ball(2, 1.0 / 32);
  std::vector<std::pair<std::string, PotentialField>> cases;
  for (int i = 0; i < 10; ++i)
    cases.emplace_back(fmt::format("quadratic #{}", i),
                       sample_potential(quadratic_form(random_symmetric(rng, uniform_list(rng, 2, 0.0, 6.0))), g));
  for (const char* f : {"quartic", "quartic-x1:0.1", "radial-quartic:0.5"})
    cases.emplace_back(f, sample_potential(builtin_formula(f), g));
  for (const auto& [name, u] : cases) {
    const RotatedPotential r = rotate(u, quarter());
    AuditReport rep = named("rotation-window " + name);
    double lo = 1.0, hi = -1.0;
    over_rotated_interior(r, [&](std::size_t k, const Spectrum& s) {
      lo = std::min(lo, s.min());
      hi = std::max(hi, s.max());
      at_most(rep, k, "window_excess", std::max(s.max() - 1.0, -1.0 - s.min()), 1e-6);
    });
    rep.metrics["min_eigenvalue"] = lo;
    rep.metrics["max_eigenvalue"] = hi;
    out.audits.push_back(rep.finalize());
  }
  return out;
}

ExperimentOutcome preservation(const BuiltinOptions&) {
  ExperimentOutcome out;
  out.name = "preservation";
  const double h = 1.0 / 64;
  const GridSpec g = GridSpec::ball(2, h);
  JetCheckConfig jet;
  auto super = [&](const std::string& f, double theta) {
    AuditReport r = check_rotation_preserves_supersolution(sample_potential(builtin_formula(f), g), theta, kPi / 4,
                                                           0.5, jet);
    r.name = fmt::format("rotation-super {} theta={:.6f}", f, theta);
    out.audits.push_back(r);
  };
  super("quad:1", kPi / 2);
  super("zero", 0.0);
  {
    const PotentialField q = sample_potential(builtin_formula("quartic"), g);
    const HessianField hq = hessian_field(q);
    double theta = -kPi;
    for (std::size_t k = 0; k < hq.matrices.size(); ++k)
      if (hq.interior[k]) theta = std::max(theta, phase_sum(hq.matrices[k]));
    super("quartic", theta);
  }
  const std::vector<double> eps{2 * h, 4 * h, 8 * h};
  auto sub = [&](const std::string& f, double theta) {
    AuditReport r = check_rotation_preserves_subsolution(sample_potential(builtin_formula(f), g), theta, kPi / 4, eps,
                                                         jet);
    r.name = fmt::format("rotation-sub {} theta={:.6f}", f, theta);
    out.audits.push_back(r);
  };
  sub("quad:3", 2 * std::atan(3.0));
  sub("quad:1", kPi / 2);
  sub("two-quad", kPi / 2);
  sub("tilt-max", kPi / 2);
  return out;
}

ExperimentOutcome solver_checks(const BuiltinOptions&) {
  ExperimentOutcome out;
  out.name = "solver";
  const ProblemSpec slag{2, kPi / 2};
  for (const char* f : {"quad:1", "aniso"}) {
    const SolveResult s = solve_dirichlet(builtin_formula(f), slag, GridSpec::ball(2, 1.0 / 32));
    AuditReport r = named(fmt::format("quadratic-data {}", f));
    at_most(r, 0, "final_residual", s.report.final_residual, 1e-10);
    at_most(r, 1, "iterations", s.report.iterations, 5);
    r.metrics["iterations"] = s.report.iterations;
    out.audits.push_back(r.finalize());
    out.solves.emplace_back(f, s.report);
  }
  {
    const SolveResult s = solve_dirichlet(builtin_formula("quartic-x1:0.1"), slag, GridSpec::ball(2, 1.0 / 64));
    AuditReport r = det_oracle(s.field, 5e-3);
    r.name = "det-oracle quartic-x1:0.1";
    out.audits.push_back(r);
    out.solves.emplace_back("quartic-x1", s.report);
  }
  {
    const SolveResult s = solve_dirichlet(builtin_formula("x1x2"), {2, 0.0}, GridSpec::ball(2, 1.0 / 64));
    AuditReport r = named("harmonic-oracle x1x2");
    const HessianField hs = hessian_field(s.field);
    for (std::size_t k = 0; k < hs.matrices.size(); ++k)
      if (hs.interior[k]) at_most(r, k, "laplacian", std::abs(hs.matrices[k].trace()), 1e-6);
    out.audits.push_back(r.finalize());
  }
  {
    // Refinement against the exact solution and against the h/2 solution.
    const Formula exact = builtin_formula("partial-legendre:0.5");
    std::vector<PotentialField> sols;
    std::vector<double> errs;
    // N = 16 is still pre-asymptotic (orders 1.69 and 1.63).
    for (int n : {32, 64, 128}) {
      const SolveResult s = solve_dirichlet(exact, slag, GridSpec::ball(2, 1.0 / n));
      double e = 0.0;
      for (std::size_t k = 0; k < s.field.grid.size(); ++k)
        if (s.field.mask[k]) e = std::max(e, std::abs(s.field.values[k] - exact(s.field.grid.coords(k))));
      errs.push_back(e);
      sols.push_back(s.field);
    }
    auto coarse_gap = [](const PotentialField& c, const PotentialField& f) {
      double e = 0.0;
      for (std::size_t k = 0; k < c.grid.size(); ++k) {
        if (!c.mask[k]) continue;
        Index i = c.grid.unflat(k);
        for (int a = 0; a < 2; ++a) i[a] = 2 * i[a];
        e = std::max(e, std::abs(c.values[k] - f.values[f.grid.flat(i)]));
      }
      return e;
    };
    const double d1 = coarse_gap(sols[0], sols[1]);
    const double d2 = coarse_gap(sols[1], sols[2]);
    AuditReport r = named("convergence-order partial-legendre:0.5");
    const double exact_order = std::log2(errs[1] / errs[2]);
    const double self_order = std::log2(d1 / d2);
    at_least(r, 0, "order_vs_exact", exact_order, 1.8);
    at_least(r, 1, "order_vs_half_step", self_order, 1.8);
    r.metrics["error_h64"] = errs[1];
    r.metrics["error_h128"] = errs[2];
    r.metrics["order_vs_exact"] = exact_order;
    r.metrics["order_vs_half_step"] = self_order;
    out.audits.push_back(r.finalize());
  }
  return out;
}

ExperimentOutcome coefficients(const BuiltinOptions& opt) {
  ExperimentOutcome out;
  out.name = "coefficients";
  const SweepResult hyp = coefficient_sweep(100000, opt.seed + 8, false);
  AuditReport a = named("coefficient-sweep");
  at_most(a, 0, "negative_coefficients", static_cast<double>(hyp.negatives), 0.0);
  a.metrics["tuples"] = static_cast<double>(hyp.tuples);
  a.metrics["min_coefficient"] = hyp.min_value;
  out.audits.push_back(a.finalize());
  const SweepResult ctl = coefficient_sweep(100000, opt.seed + 9, true);
  AuditReport b = named("coefficient-control-sweep");
  at_least(b, 0, "negative_coefficients", static_cast<double>(ctl.negatives), 1.0);
  b.metrics["tuples"] = static_cast<double>(ctl.tuples);
  b.metrics["min_coefficient"] = ctl.min_value;
  b.metrics["worst_lambda_1"] = ctl.worst[0];
  out.audits.push_back(b.finalize());
  return out;
}

ExperimentOutcome subharmonicity(const BuiltinOptions&) {
  ExperimentOutcome out;
  out.name = "subharmonicity";
  SubharmonicityConfig cfg;
  cfg.gap_tol = 0.1;  // fixed so the sub-mask is comparable across h
  const std::vector<int> ns{32, 64, 128};
  for (const std::string family : {"rotated-quartic", "solver-output"}) {
    AuditReport stab = named("subharmonicity " + family);
    std::vector<double> cs;
    for (int n : ns) {
      const GridSpec g = GridSpec::ball(2, 1.0 / n);
      PotentialField src;
      if (family == "rotated-quartic") {
        src = sample_potential(builtin_formula("quartic"), g);
      } else {
        const SolveResult s = solve_dirichlet(builtin_formula("quartic-x1:0.1"), {2, kPi / 2}, g);
        src = within_radius(s.field, 0.9);
      }
      const AuditReport t = subharmonicity_trial(rotate(src, quarter()), src, cfg);
      stab.absorb(t, fmt::format("h=1/{}/", n));
      cs.push_back(t.metrics.count("c_fit") ? t.metrics.at("c_fit") : 0.0);
    }
    const auto [lo, hi] = std::minmax_element(cs.begin(), cs.end());
    stab.metrics["c_min"] = *lo;
    stab.metrics["c_max"] = *hi;
    // C counts as stable when the largest fit is within a factor 2 of the
    // smallest (fits below 1e-3 count as 1e-3).
    const double limit = 2.0 * std::max(*lo, 1e-3);
    stab.observe(limit - *hi);
    if (*hi > limit) stab.violate(0, "c_fit_ratio", *hi / std::max(*lo, 1e-3));
    out.audits.push_back(stab.finalize());
  }
  {
    AuditReport zero = named("subharmonicity constant-hessian");
    const GridSpec g = GridSpec::ball(2, 1.0 / 64);
    SymMatrix a = SymMatrix::diagonal(2, {0.6, 0.2, 0.0});
    a(0, 1) = a(1, 0) = 0.1;
    const PotentialField v = sample_potential(quadratic_form(a), g);
    const FlaggedResidual b = bm_field(v, 1, 0.1);
    const ScalarField lb = laplace_beltrami(b.residual, induced_metric(hessian_field(v)));
    for (std::size_t k = 0; k < lb.values.size(); ++k)
      if (lb.mask[k]) at_most(zero, k, "laplace_beltrami", std::abs(lb.values[k]), 1e-8);
    out.audits.push_back(zero.finalize());
  }
  return out;
}

ExperimentOutcome strict_gap(const BuiltinOptions&) {
  ExperimentOutcome out;
  out.name = "strict-gap";
  for (const char* f : {"aniso", "quartic-x1:0.1", "radial-quartic:0.05", "partial-legendre:0.5", "mixed:0.05"}) {
    std::vector<double> centre;
    AuditReport harness;
    for (int n : {64, 128}) {
      const GridSpec g = GridSpec::ball(2, 1.0 / n);
      const SolveResult s = solve_dirichlet(builtin_formula(f), {2, kPi / 2}, g);
      if (!s.report.converged) throw InternalError(fmt::format("strict-gap: solve of {} did not converge", f));
      centre.push_back(centre_hessian_norm(s.field));
      if (n == 64) {
        // The two rim layers of a discrete Dirichlet solution are not
        // convex along every lattice direction; the harness sees Ω minus them.
        harness = hessian_bound_harness(with_mask(s.field, erode(g, s.field.mask, 2)));
        harness.name = fmt::format("hessian-bound {}", f);
      }
    }
    out.audits.push_back(harness);
    AuditReport stab = named(fmt::format("centre-hessian {}", f));
    const double rel = std::abs(centre[0] - centre[1]) / std::abs(centre[1]);
    at_most(stab, 0, "relative_change", rel, 0.05);
    stab.metrics["centre_h64"] = centre[0];
    stab.metrics["centre_h128"] = centre[1];
    if (!std::isfinite(centre[0]) || !std::isfinite(centre[1])) stab.violate(1, "centre_hessian_finite", 0.0);
    out.audits.push_back(stab.finalize());
  }
  return out;
}

std::vector<BuiltinExperiment> make_registry() {
  return {
      {"quadratic-rotation", "rotate 3/2 |x|^2 at pi/4 and measure the 1/2 Hessian", quadratic_rotation},
      {"zero-potential", "rotate u = 0: spectrum -1, phase -n pi/4", zero_potential},
      {"ma-duality", "solve theta = pi/2 in 2-D and check det D^2u = 1", ma_duality},
      {"quadratic-identity", "rotated quadratic Hessian (K-1)/(K+1), K in {0.5,1,3,10}, h = 1/64", quadratic_identity},
      {"phase-shift", "rotated phase equals theta - n alpha for quadratic solutions", phase_shift},
      {"legendre-laws", "biconjugation, shift and order laws, fast vs brute transform", legendre_laws},
      {"sum-rule", "subdifferential sum rule on random max-affine fields", sum_rule},
      {"rotation-window", "pi/4 rotation of convex fields has eigenvalues in [-1, 1]", rotation_window},
      {"preservation", "supersolution and convex subsolution preservation under rotation", preservation},
      {"solver", "Newton solver: quadratic data, det and harmonic oracles, order", solver_checks},
      {"coefficients", "coefficient sweep under the ordering hypothesis and its control", coefficients},
      {"subharmonicity", "Laplace-Beltrami of b_1 with a refinement-stable constant", subharmonicity},
      {"strict-gap", "rotated eigenvalues below 1 - 1e-3 and a stable centre Hessian", strict_gap},
  };
}

}  // namespace

const std::vector<BuiltinExperiment>& builtin_experiments() {
  static const std::vector<BuiltinExperiment> registry = make_registry();
  return registry;
}

std::vector<const BuiltinExperiment*> acceptance_experiments() {
  std::vector<const BuiltinExperiment*> out;
  const auto& all = builtin_experiments();
  for (std::size_t i = 3; i < all.size(); ++i) out.push_back(&all[i]);
  return out;
}

const BuiltinExperiment& find_builtin(const std::string& name) {
  for (const BuiltinExperiment& b : builtin_experiments())
    if (b.name == name) return b;
  throw ConfigError(fmt::format("unknown builtin experiment '{}'", name));
}

}  // namespace slag
