#include "slag/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/core.h>

#include "slag/error.hpp"
#include "slag/field_io.hpp"
#include "slag/interp.hpp"

namespace slag {

namespace {

// Same h-vs-2h eigenvalue jump the jet audits use to find kinks.
constexpr double kCreaseJump = 1.0;

double max_abs(const PotentialField& f) {
  double m = 0.0;
  for (std::size_t k = 0; k < f.values.size(); ++k)
    if (f.mask[k]) m = std::max(m, std::abs(f.values[k]));
  return m;
}

struct Polished {
  bool ok = false;
  double value = 0.0;
  Point x{};
};

// Newton solve of D(interpolant)(x) = y started from the lattice maximiser.
Polished polish_with(const PatchInterpolant& interp, const GridSpec& g, const Point& y, std::size_t node,
                     double discrete) {
  Polished out;
  const int n = g.dim;
  const Point a = g.coords(node);
  Index start;
  if (!interp.select(a, start)) return out;
  const double h = g.spacing;
  const double reach = 2.0 * std::sqrt(static_cast<double>(n)) * h;
  Point x = a;
  bool converged = false;
  for (int it = 0; it < 30; ++it) {
    const LocalJet jet = interp.eval(start, x);
    SymMatrix inv;
    try {
      inv = jet.hess.inverse();
    } catch (const DomainError&) {
      return out;
    }
    double step = 0.0;
    Point nx = x;
    for (int i = 0; i < n; ++i) {
      double d = 0.0;
      for (int j = 0; j < n; ++j) d += inv(i, j) * (jet.grad[j] - y[j]);
      nx[i] -= d;
      step = std::max(step, std::abs(d));
    }
    x = nx;
    double dist = 0.0;
    for (int i = 0; i < n; ++i) dist += (x[i] - a[i]) * (x[i] - a[i]);
    if (std::sqrt(dist) > reach) return out;
    // Quadratic convergence stalls at round-off; a step below 1e-8 h
    // leaves a value error far below the lattice error being removed.
    converged = step <= 1e-8 * h;
    if (step <= 1e-13 * h) break;
  }
  if (!converged) return out;
  const LocalJet jet = interp.eval(start, x);
  const Spectrum sp = eigen_decompose(jet.hess);
  if (!(sp.min() > 0.0)) return out;
  const double value = dot(y, x, n) - jet.value;
  const double diff = value - discrete;
  const double scale = 1.0 + std::abs(discrete);
  if (diff < -1e-10 * scale || diff > n * h * h * sp.max() / 4.0 + 1e-12 * scale) return out;
  out.ok = true;
  out.value = value;
  out.x = x;
  return out;
}

// Highest-degree patch that fits and passes the acceptance checks.
Polished polish(const std::vector<PatchInterpolant>& interps, const GridSpec& g, const Point& y, std::size_t node,
                double discrete) {
  for (const PatchInterpolant& interp : interps) {
    const Polished p = polish_with(interp, g, y, node, discrete);
    if (p.ok) return p;
  }
  return {};
}

}  // namespace

RotationParams RotationParams::from_angle(double alpha) {
  if (!(alpha > 0.0 && alpha < std::numbers::pi / 2))
    throw PreconditionError(fmt::format("rotation angle {} is outside (0, pi/2)", alpha));
  return {alpha, std::cos(alpha), std::sin(alpha)};
}

RotatedPotential rotate(const PotentialField& u, const RotationParams& p, const RotateOptions& opt) {
  const GridSpec& g = u.grid;
  const int n = g.dim;
  const double cot = p.cot();
  const double delta = opt.delta.value_or(cot);
  if (!(delta > 0.0)) throw PreconditionError("rotation margin delta must be positive");
  const ConvexityProbe probe = directional_convexity(u);
  const double tol = opt.tol >= 0.0 ? opt.tol : 1e-10 * (1.0 + max_abs(u)) / (g.spacing * g.spacing);
  if (probe.modulus < -(cot - delta) - tol)
    throw NotConvexError(fmt::format("insufficient semiconvexity: modulus {:.6g} at node {} is below -(cot a - delta) "
                                     "= {:.6g}",
                                     probe.modulus, probe.worst_node, -(cot - delta)),
                         probe.worst_node, probe.modulus);

  PotentialField ut = u;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Point x = g.coords(k);
    ut.values[k] = p.s * u.values[k] + 0.5 * p.c * dot(x, x, n);
  }
  const SlopeGrid slopes = auto_slope_grid(ut, opt.slope_spacing);
  const Conjugate conj = conjugate_fast_argmax(ut, slopes, false);

  RotatedPotential r;
  r.params = p;
  r.delta = delta;
  r.source_id = fmt::format("{:016x}", field_checksum(u));
  r.domain = slope_domain_from(ut, conj);
  r.source_node = conj.argmax;
  r.source_point.resize(slopes.size());
  r.polished.assign(slopes.size(), 0);

  std::vector<double> fstar = conj.values.values;
  std::vector<PatchInterpolant> interps;
  for (int nodes : {6, 4, 3}) interps.emplace_back(ut, nodes);
  // Interpolants oscillate across a crease of ũ, so argmax nodes within a
  // patch width of one keep the lattice value.
  const Mask creased = dilate(g, kink_nodes(ut, kCreaseJump, true), 3);
  for (std::size_t q = 0; q < slopes.size(); ++q) {
    r.source_point[q] = g.coords(conj.argmax[q]);
    if (!opt.polish || !r.domain.inside[q] || creased[conj.argmax[q]]) continue;
    const Polished pol = polish(interps, g, slopes.coords(q), conj.argmax[q], fstar[q]);
    if (!pol.ok) continue;
    fstar[q] = pol.value;
    r.source_point[q] = pol.x;
    r.polished[q] = 1;
  }

  r.field.grid = slopes;
  r.field.values.resize(slopes.size());
  r.field.mask = r.domain.inside;
  r.field.value_kind = "rotated";
  const double a2 = p.c / (2.0 * p.s);
  for (std::size_t q = 0; q < slopes.size(); ++q) {
    const Point y = slopes.coords(q);
    r.field.values[q] = a2 * dot(y, y, n) - fstar[q] / p.s;
  }
  if (r.domain.count() == 0) throw DomainTooSmall("rotated domain is empty");
  return r;
}

GradientField gradient_map(const PotentialField& u, const RotationParams& p) {
  GradientField gf = centered_gradient(u);
  for (std::size_t k = 0; k < gf.gradients.size(); ++k) {
    if (!gf.defined[k]) continue;
    const Point x = u.grid.coords(k);
    for (int i = 0; i < u.grid.dim; ++i) gf.gradients[k][i] = p.c * x[i] + p.s * gf.gradients[k][i];
  }
  return gf;
}

double rotate_eigenvalue(double lambda, const RotationParams& p) {
  // cos and sin of pi/4 differ in the last bit, so the pole gets a round-off band.
  const double den = p.c + p.s * lambda;
  if (!(den > 4.0 * std::numeric_limits<double>::epsilon() * (p.c + p.s * std::abs(lambda))))
    throw DomainError(fmt::format("eigenvalue {} is at or below -cot(alpha) = {}", lambda, -p.cot()));
  return (p.c * lambda - p.s) / den;
}

Spectrum rotate_spectrum(const Spectrum& spec, const RotationParams& p) {
  Spectrum out;
  out.dim = spec.dim;
  for (int i = 0; i < spec.dim; ++i) out.values[i] = rotate_eigenvalue(spec.values[i], p);
  std::sort(out.values.begin(), out.values.begin() + spec.dim, std::greater<>());
  return out;
}

PotentialField unrotate(const PotentialField& v, const RotationParams& p, const RotateOptions& opt) {
  PotentialField w = v;
  for (double& x : w.values) x = -x;
  const ConvexityProbe probe = directional_convexity(w);
  const double cot = p.cot();
  const double sat_tol = 1e-9 * (1.0 + cot);
  if (probe.modulus <= -cot + sat_tol)
    throw PreconditionError(fmt::format("slope saturates cot(alpha): second difference {:.6g} at node {} reaches {:.6g}",
                                        -probe.modulus, probe.worst_node, cot));
  RotateOptions o = opt;
  o.delta = std::min(cot, cot + probe.modulus);
  RotatedPotential r = rotate(w, p, o);
  PotentialField out = std::move(r.field);
  for (double& x : out.values) x = -x;
  out.value_kind = "potential";
  return out;
}

PotentialField unrotate(const RotatedPotential& v, const RotateOptions& opt) { return unrotate(v.field, v.params, opt); }

}  // namespace slag
