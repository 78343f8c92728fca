#include "slag/audit.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/core.h>

#include "slag/error.hpp"
#include "slag/solver.hpp"

namespace slag {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

AuditReport jet_check(const PotentialField& u, double theta, const JetCheckConfig& cfg, const Mask* skip, bool super) {
  cfg.validate();
  AuditReport r;
  r.name = super ? "supersolution" : "subsolution";
  const HessianField h = hessian_field(u);
  const Mask kinks = kink_nodes(u, cfg.kink_threshold, !super);
  const Mask inner = erode(u.grid, u.mask, cfg.rim_exclusion);
  std::size_t rim = 0, skipped = 0, kinked = 0;
  for (std::size_t k = 0; k < h.matrices.size(); ++k) {
    if (!h.interior[k]) continue;
    if (!inner[k]) {
      ++rim;
      continue;
    }
    if (skip && (*skip)[k]) {
      ++skipped;
      continue;
    }
    if (kinks[k]) {
      ++kinked;
      continue;
    }
    ++r.checked_nodes;
    const double f = phase_sum(h.matrices[k]) - theta;
    const double margin = super ? -f : f;
    r.observe(margin);
    if (margin < -cfg.tolerance) r.violate(k, "phase_residual", f);
  }
  r.metrics["rim_excluded"] = static_cast<double>(rim);
  r.metrics["skipped"] = static_cast<double>(skipped);
  r.metrics["kink_skipped"] = static_cast<double>(kinked);
  r.metrics["theta"] = theta;
  return r.finalize();
}

// Source nodes within `radius` of a marked node.
Mask disk_dilate(const GridSpec& g, const Mask& marks, double radius) {
  Mask out(g.size(), 0);
  const int reach = static_cast<int>(std::ceil(radius / g.spacing));
  const double r2 = radius * radius * (1.0 + 1e-12);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!marks[k]) continue;
    const Index c = g.unflat(k);
    const int r3 = g.dim == 3 ? reach : 0;
    for (int i = -reach; i <= reach; ++i)
      for (int j = -reach; j <= reach; ++j)
        for (int l = -r3; l <= r3; ++l) {
          const double d2 = g.spacing * g.spacing * (i * i + j * j + l * l);
          if (d2 > r2) continue;
          const Index p{c[0] + i, c[1] + j, c[2] + l};
          if (g.contains(p)) out[g.flat(p)] = 1;
        }
  }
  return out;
}

// Slope nodes whose source point lies in `near` (a mask on the source grid).
Mask skip_near_source(const RotatedPotential& r, const GridSpec& src, const Mask& near) {
  Mask skip(r.field.grid.size(), 0);
  for (std::size_t q = 0; q < skip.size(); ++q) {
    if (!r.field.mask[q]) continue;
    Index id{0, 0, 0};
    for (int a = 0; a < src.dim; ++a)
      id[a] = std::clamp(static_cast<int>(std::lround((r.source_point[q][a] - src.origin[a]) / src.spacing)), 0,
                         src.shape[a] - 1);
    skip[q] = near[src.flat(id)];
  }
  return skip;
}

// sup |a − b| over nodes masked in both (matched by coordinates).
double sup_difference(const PotentialField& a, const PotentialField& b, const Mask& a_region) {
  double worst = 0.0;
  const GridSpec& ga = a.grid;
  const GridSpec& gb = b.grid;
  for (std::size_t k = 0; k < ga.size(); ++k) {
    if (!a.mask[k] || !a_region[k]) continue;
    const Point x = ga.coords(k);
    Index id{0, 0, 0};
    bool ok = true;
    for (int i = 0; i < ga.dim; ++i) {
      const double t = (x[i] - gb.origin[i]) / gb.spacing;
      id[i] = static_cast<int>(std::lround(t));
      if (std::abs(t - id[i]) > 1e-6) ok = false;
    }
    if (!ok || !gb.contains(id)) continue;
    const std::size_t q = gb.flat(id);
    if (!b.mask[q]) continue;
    worst = std::max(worst, std::abs(a.values[k] - b.values[q]));
  }
  return worst;
}

std::size_t nearest_interior(const HessianField& h) {
  std::size_t best = h.grid.size();
  double bd = kInf;
  for (std::size_t k = 0; k < h.grid.size(); ++k) {
    if (!h.interior[k]) continue;
    const Point x = h.grid.coords(k);
    const double d = dot(x, x, h.grid.dim);
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  return best;
}

}  // namespace

void JetCheckConfig::validate() const {
  if (!(tolerance > 0.0)) throw ConfigError("jet check tolerance must be positive");
  if (rim_exclusion < 0) throw ConfigError("rim_exclusion must be non-negative");
  if (!(kink_threshold > 0.0)) throw ConfigError("kink_threshold must be positive");
}

AuditReport check_supersolution(const PotentialField& u, double theta, const JetCheckConfig& cfg, const Mask* skip) {
  return jet_check(u, theta, cfg, skip, true);
}

AuditReport check_subsolution(const PotentialField& u, double theta, const JetCheckConfig& cfg, const Mask* skip) {
  return jet_check(u, theta, cfg, skip, false);
}

AuditReport check_rotation_preserves_supersolution(const PotentialField& u, double theta, double alpha, double delta,
                                                   const JetCheckConfig& cfg) {
  const AuditReport src = check_supersolution(u, theta, cfg);
  if (!src.passed)
    throw PreconditionError(
        fmt::format("source field is not a supersolution ({} violations)", src.violations.size()));
  const RotationParams p = RotationParams::from_angle(alpha);
  RotateOptions opt;
  opt.delta = delta;
  const RotatedPotential r = rotate(u, p, opt);
  const double target = theta - u.grid.dim * alpha;
  AuditReport rep = check_supersolution(r.field, target, cfg);
  rep.name = "rotation-supersolution";
  rep.metrics["source_checked"] = static_cast<double>(src.checked_nodes);
  rep.metrics["rotated_domain_nodes"] = static_cast<double>(r.domain.count());
  return rep.finalize();
}

AuditReport check_rotation_preserves_subsolution(const PotentialField& u, double theta, double alpha,
                                                 const std::vector<double>& eps_list, const JetCheckConfig& cfg) {
  require_convex(u);
  const AuditReport src = check_subsolution(u, theta, cfg);
  if (!src.passed)
    throw PreconditionError(fmt::format("source field is not a subsolution ({} violations)", src.violations.size()));
  const GridSpec& g = u.grid;
  const RotationParams p = RotationParams::from_angle(alpha);
  const double target = theta - g.dim * alpha;
  const Mask creases = dilate(g, kink_nodes(u, cfg.kink_threshold, true), 1);
  const bool any_crease = std::any_of(creases.begin(), creases.end(), [](auto m) { return m != 0; });

  AuditReport rep;
  rep.name = "rotation-subsolution";
  const RotatedPotential base = rotate(u, p);
  const Mask base_skip = any_crease ? skip_near_source(base, g, disk_dilate(g, creases, 3.0 * g.spacing))
                                    : Mask(base.field.grid.size(), 0);
  rep.absorb(check_subsolution(base.field, target, cfg, &base_skip), "eps=0/");
  const Mask base_inner = erode(base.field.grid, base.field.mask, cfg.rim_exclusion);

  std::vector<double> eps = eps_list;
  std::sort(eps.begin(), eps.end());
  double prev = 0.0;
  for (double e : eps) {
    const MollifyResult m = mollify(u, {e});
    if (!m.warning.empty()) rep.notes.push_back(fmt::format("eps={:.4g}: {}", e, m.warning));
    const RotatedPotential r = rotate(m.field, p);
    const Mask skip = any_crease ? skip_near_source(r, g, disk_dilate(g, creases, e + 3.0 * g.spacing))
                                 : Mask(r.field.grid.size(), 0);
    const std::string tag = fmt::format("eps={:.4g}/", e);
    rep.absorb(check_subsolution(r.field, target, cfg, &skip), tag);
    const double d = sup_difference(base.field, r.field, base_inner);
    rep.metrics[tag + "sup_difference"] = d;
    if (d < prev - 1e-12) rep.violate(0, tag + "non_monotone_sup_difference", d);
    prev = d;
  }
  return rep.finalize();
}

MetricField induced_metric(const HessianField& h) {
  MetricField g;
  g.grid = h.grid;
  g.interior = h.interior;
  g.matrices.assign(h.matrices.size(), SymMatrix(h.grid.dim));
  for (std::size_t k = 0; k < h.matrices.size(); ++k) {
    if (!h.interior[k]) continue;
    const SymMatrix& m = h.matrices[k];
    g.matrices[k] = SymMatrix::identity(h.grid.dim) + m * m;
  }
  return g;
}

ScalarField laplace_beltrami(const ScalarField& f, const MetricField& g) {
  const GridSpec& grid = f.grid;
  if (!(grid == g.grid)) throw PreconditionError("laplace_beltrami: field and metric grids differ");
  const int n = grid.dim;
  Mask avail(grid.size(), 0);
  std::vector<double> w(grid.size(), 0.0);
  std::vector<SymMatrix> a(grid.size(), SymMatrix(n));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!f.mask[k] || !g.interior[k]) continue;
    const Spectrum s = eigen_decompose(g.matrices[k]);
    if (!(s.min() > 0.0))
      throw DomainError(fmt::format("metric is not positive definite at node {} (eigenvalue {:.6g})", k, s.min()), k);
    w[k] = std::sqrt(g.matrices[k].determinant());
    a[k] = g.matrices[k].inverse() * w[k];
    avail[k] = 1;
  }
  ScalarField out;
  out.grid = grid;
  out.values.assign(grid.size(), 0.0);
  out.mask.assign(grid.size(), 0);
  out.value_kind = "laplace_beltrami";
  const double h = grid.spacing;
  const auto& v = f.values;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!stencil_inside(grid, avail, k)) continue;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::ptrdiff_t si = grid.stride(i);
      const double ap = 0.5 * (a[k](i, i) + a[k + si](i, i));
      const double am = 0.5 * (a[k](i, i) + a[k - si](i, i));
      acc += (ap * (v[k + si] - v[k]) - am * (v[k] - v[k - si])) / (h * h);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const std::ptrdiff_t sj = grid.stride(j);
        const double dp = (v[k + si + sj] - v[k + si - sj]) / (2.0 * h);
        const double dm = (v[k - si + sj] - v[k - si - sj]) / (2.0 * h);
        acc += (a[k + si](i, j) * dp - a[k - si](i, j) * dm) / (2.0 * h);
      }
    }
    out.values[k] = acc / w[k];
    out.mask[k] = 1;
  }
  return out;
}

FlaggedResidual bm_field(const PotentialField& v, int m, double gap_tol) {
  const int n = v.grid.dim;
  if (m < 1 || m > n) throw PreconditionError(fmt::format("b_m needs 1 <= m <= {}, got {}", n, m));
  if (gap_tol < 0.0) gap_tol = 10.0 * v.grid.spacing;
  const HessianField h = hessian_field(v);
  FlaggedResidual out;
  out.residual.grid = v.grid;
  out.residual.values.assign(v.grid.size(), 0.0);
  out.residual.mask.assign(v.grid.size(), 0);
  out.residual.value_kind = "b_m";
  out.flags.name = "bm-gap";
  for (std::size_t k = 0; k < h.matrices.size(); ++k) {
    if (!h.interior[k]) continue;
    ++out.flags.checked_nodes;
    const Spectrum s = eigen_decompose(h.matrices[k]);
    if (m < n) {
      const double gap = s[m - 1] - s[m];
      out.flags.observe(gap - gap_tol);
      if (gap < gap_tol) {
        out.flags.violate(k, "spectral_gap", gap);
        continue;
      }
    }
    double acc = 0.0;
    for (int i = 0; i < m; ++i) acc += 0.5 * std::log1p(s[i] * s[i]);
    out.residual.values[k] = acc / m;
    out.residual.mask[k] = 1;
  }
  out.flags.finalize();
  return out;
}

FlaggedResidual bm_field(const RotatedPotential& v, int m, double gap_tol) { return bm_field(v.field, m, gap_tol); }

std::vector<Coefficient> coefficient_values(const Spectrum& lam, int m) {
  const int n = lam.dim;
  if (m < 1 || m > n) throw PreconditionError(fmt::format("coefficient audit needs 1 <= m <= {}, got {}", n, m));
  auto l = [&](int i) { return lam.values[i - 1]; };
  std::vector<Coefficient> out;
  for (int k = 1; k <= m; ++k) out.push_back({"kkk", k, 0, k, 1.0 + l(k) * l(k)});
  for (int i = 1; i <= m; ++i)
    for (int k = 1; k <= m; ++k)
      if (i != k) out.push_back({"iik:i,k<=m", i, 0, k, 3.0 + l(i) * l(i) + 2.0 * l(i) * l(k)});
  for (int k = 1; k <= m; ++k)
    for (int i = m + 1; i <= n; ++i)
      out.push_back({"iik:k<=m<i", i, 0, k, 2.0 * l(k) * (1.0 + l(k) * l(i)) / (l(k) - l(i))});
  for (int i = 1; i <= m; ++i)
    for (int k = m + 1; k <= n; ++k)
      out.push_back({"iik:i<=m<k", i, 0, k,
                     (l(i) - l(k) + l(i) * l(i) * (2.0 + l(i) * l(i) + l(i) * l(k))) / (l(i) - l(k))});
  for (int i = 1; i <= m; ++i)
    for (int j = i + 1; j <= m; ++j)
      for (int k = j + 1; k <= m; ++k)
        out.push_back({"ijk:i<j<k<=m", i, j, k, 2.0 * (3.0 + l(i) * l(j) + l(j) * l(k) + l(k) * l(i))});
  for (int i = 1; i <= m; ++i)
    for (int j = i + 1; j <= m; ++j)
      for (int k = m + 1; k <= n; ++k)
        out.push_back({"ijk:i<j<=m<k", i, j, k,
                       2.0 * (1.0 + l(i) * l(j) + l(i) * (1.0 + l(i) * l(k)) / (l(i) - l(k)) +
                              l(j) * (1.0 + l(j) * l(k)) / (l(j) - l(k)))});
  for (int i = 1; i <= m; ++i)
    for (int j = m + 1; j <= n; ++j)
      for (int k = j + 1; k <= n; ++k)
        out.push_back({"ijk:i<=m<j<k", i, j, k,
                       2.0 * l(i) * ((1.0 + l(i) * l(j)) / (l(i) - l(j)) + (1.0 + l(j) * l(k)) / (l(j) - l(k)))});
  return out;
}

bool coefficient_hypothesis(const Spectrum& lam, int m) {
  const int n = lam.dim;
  if (m < 1 || m > n) return false;
  constexpr double eps = 1e-12;
  if (lam[0] > 1.0 + eps || lam[n - 1] < -1.0 - eps) return false;
  for (int i = 0; i + 1 < n; ++i)
    if (lam[i] < lam[i + 1] - eps) return false;
  if (m < n && !(lam[m - 1] > lam[m])) return false;
  return true;
}

AuditReport coefficient_audit(const Spectrum& lam, int m) {
  if (!coefficient_hypothesis(lam, m))
    throw PreconditionError("coefficient audit: spectrum violates 1 >= l_1 >= ... >= l_m > l_{m+1} >= ... >= -1");
  AuditReport r;
  r.name = "coefficients";
  const std::vector<Coefficient> cs = coefficient_values(lam, m);
  for (std::size_t c = 0; c < cs.size(); ++c) {
    ++r.checked_nodes;
    r.observe(cs[c].value);
    if (cs[c].value < 0.0 || std::isnan(cs[c].value))
      r.violate(c, fmt::format("{}({},{},{})", cs[c].family, cs[c].i, cs[c].j, cs[c].k), cs[c].value);
  }
  r.metrics["min_coefficient"] = r.min_margin;
  return r.finalize();
}

SweepResult coefficient_sweep(std::size_t count, std::uint64_t seed, bool control) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SweepResult out;
  for (std::size_t t = 0; t < count; ++t) {
    const int n = unit(rng) < 0.5 ? 2 : 3;
    const int m = 1 + static_cast<int>(unit(rng) * (n - 1)) % (n - 1);
    Spectrum s;
    s.dim = n;
    if (control) {
      s.values[0] = 2.0 - unit(rng);  // (1, 2]
      for (int i = 1; i < m; ++i) s.values[i] = 0.8 + (s.values[0] - 0.8) * unit(rng);
    } else {
      for (int i = 0; i < m; ++i) s.values[i] = 1.0 - 0.2 * unit(rng);  // (0.8, 1]
    }
    std::sort(s.values.begin(), s.values.begin() + m, std::greater<>());
    const double top = s.values[m - 1];
    for (int i = m; i < n; ++i) s.values[i] = -1.0 + (top + 1.0) * unit(rng);  // [-1, l_m)
    std::sort(s.values.begin() + m, s.values.begin() + n, std::greater<>());
    if (m < n && !(s.values[m] < top)) continue;
    ++out.tuples;
    for (const Coefficient& c : coefficient_values(s, m)) {
      if (c.value < out.min_value) {
        out.min_value = c.value;
        out.worst = s;
        out.worst_m = m;
      }
      if (c.value < 0.0) ++out.negatives;
    }
  }
  return out;
}

AuditReport subharmonicity_trial(const PotentialField& v, const SubharmonicityConfig& cfg) {
  const GridSpec& g = v.grid;
  const int n = g.dim;
  const double gap_tol = cfg.gap_tol < 0.0 ? 10.0 * g.spacing : cfg.gap_tol;
  AuditReport r;
  r.name = "subharmonicity";
  const HessianField h = hessian_field(v);
  const Mask inner = erode(g, v.mask, cfg.rim_exclusion);
  // Hypothesis sub-mask: λ_1 <= 1 and the gap at m.
  PotentialField hyp = v;
  std::fill(hyp.mask.begin(), hyp.mask.end(), 0);
  std::size_t sub = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!h.interior[k] || !inner[k]) continue;
    const Spectrum s = eigen_decompose(h.matrices[k]);
    if (s.max() > 1.0) continue;
    if (cfg.m < n && s[cfg.m - 1] - s[cfg.m] < gap_tol) continue;
    hyp.mask[k] = 1;
    ++sub;
  }
  r.metrics["submask_nodes"] = static_cast<double>(sub);
  if (sub == 0) {
    r.violate(0, "hypothesis never satisfied", 0.0);
    return r.finalize();
  }
  FlaggedResidual b = bm_field(v, cfg.m, gap_tol);
  for (std::size_t k = 0; k < g.size(); ++k) b.residual.mask[k] = b.residual.mask[k] && hyp.mask[k];
  MetricField metric = induced_metric(h);
  for (std::size_t k = 0; k < g.size(); ++k) metric.interior[k] = metric.interior[k] && hyp.mask[k];
  const ScalarField lb = laplace_beltrami(b.residual, metric);
  double lo = kInf;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!lb.mask[k]) continue;
    ++r.checked_nodes;
    lo = std::min(lo, lb.values[k]);
    const double margin = lb.values[k] + cfg.c_slack * g.spacing;
    r.observe(margin);
    if (margin < 0.0) r.violate(k, "laplace_beltrami_bm", lb.values[k]);
  }
  if (r.checked_nodes == 0) {
    r.violate(0, "hypothesis never satisfied", 0.0);
    return r.finalize();
  }
  r.metrics["min_laplace_beltrami"] = lo;
  r.metrics["c_fit"] = std::max(0.0, -lo) / g.spacing;
  r.metrics["h"] = g.spacing;
  return r.finalize();
}

Mask source_interior(const RotatedPotential& v, const PotentialField& source, int cells) {
  const Mask near = skip_near_source(v, source.grid, erode(source.grid, source.mask, cells));
  return erode(v.field.grid, near, 1);
}

AuditReport subharmonicity_trial(const RotatedPotential& v, const PotentialField& source,
                                 const SubharmonicityConfig& cfg) {
  PotentialField f = v.field;
  const Mask keep = source_interior(v, source, cfg.rim_exclusion);
  for (std::size_t k = 0; k < f.mask.size(); ++k) f.mask[k] = f.mask[k] && keep[k];
  return subharmonicity_trial(f, cfg);
}

AuditReport hessian_bound_harness(const PotentialField& u, const HarnessConfig& cfg) {
  const GridSpec& g = u.grid;
  const int n = g.dim;
  AuditReport r;
  r.name = "hessian-bound";
  const HessianField h = hessian_field(u);
  const double o = osc(u);
  r.metrics["osc"] = o;

  const std::size_t centre = nearest_interior(h);
  const Spectrum cs = eigen_decompose(h.matrices[centre]);
  r.metrics["centre_hessian_norm"] = std::max(std::abs(cs.max()), std::abs(cs.min()));

  // Q = K/2 |x|² + t touches from above inside the touch radius once
  // K/2 r² exceeds osc(u); the factor 1.5 keeps the touching point off
  // the circle |x| = r.
  const double K = std::max(1.5 * 2.0 * o / (cfg.touch_radius * cfg.touch_radius), 1e-3);
  std::size_t a = g.size();
  double best = -kInf;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!u.mask[k]) continue;
    const Point x = g.coords(k);
    const double val = u.values[k] - 0.5 * K * dot(x, x, n);
    if (val > best) {
      best = val;
      a = k;
    }
  }
  const RotationParams p = RotationParams::from_angle(cfg.alpha);
  const double bound = rotate_eigenvalue(K, p);
  r.metrics["K"] = K;
  r.metrics["touching_bound"] = bound;
  if (h.interior[a]) {
    const double lam = rotate_spectrum(eigen_decompose(h.matrices[a]), p).max();
    r.metrics["touching_lambda"] = lam;
    r.observe(bound - lam);
    if (lam > bound + cfg.tolerance) r.violate(a, "touching_bound", lam);
  } else {
    r.notes.push_back(fmt::format("touching node {} has no Hessian stencil", a));
  }

  const RotatedPotential rot = rotate(u, p);
  const HessianField hr = hessian_field(rot.field);
  const Mask inner = source_interior(rot, u, cfg.rim_exclusion);
  double top = -kInf;
  std::size_t top_node = 0;
  for (std::size_t k = 0; k < hr.matrices.size(); ++k) {
    if (!hr.interior[k] || !inner[k]) continue;
    ++r.checked_nodes;
    const double lam = eigen_decompose(hr.matrices[k]).max();
    if (lam > top) {
      top = lam;
      top_node = k;
    }
  }
  r.metrics["max_rotated_eigenvalue"] = top;
  r.metrics["strict_gap_margin"] = 1.0 - top;
  r.observe(1.0 - cfg.gap_margin - top);
  if (top > 1.0 - cfg.gap_margin) r.violate(top_node, "strict_gap", top);
  return r.finalize();
}

}  // namespace slag
