#include "slag/fenchel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "slag/error.hpp"
#include "slag/hessian.hpp"

namespace slag {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxSlopeNodes = 40'000'000;

double max_abs(const PotentialField& f) {
  double m = 0.0;
  for (std::size_t k = 0; k < f.values.size(); ++k)
    if (f.mask[k]) m = std::max(m, std::abs(f.values[k]));
  return m;
}

std::size_t box_size(const Index& s) { return static_cast<std::size_t>(s[0]) * s[1] * s[2]; }

std::size_t box_flat(const Index& s, const Index& i) {
  return (static_cast<std::size_t>(i[0]) * s[1] + i[1]) * s[2] + i[2];
}

// One-dimensional discrete transform: out[q] = max_j (ys[q]*xs[j] - ws[j])
// over the lower convex hull of the points (xs[j], ws[j]); xs increasing,
// ys increasing. arg[q] receives the position in xs of the maximiser.
void transform_1d(const std::vector<double>& xs, const std::vector<double>& ws, const std::vector<int>& pos,
                  const std::vector<double>& ys, double* out, int* arg, std::size_t out_stride) {
  thread_local std::vector<int> hull;
  hull.clear();
  for (int j = 0; j < static_cast<int>(xs.size()); ++j) {
    while (hull.size() >= 2) {
      const int a = hull[hull.size() - 2];
      const int b = hull.back();
      const double cross = (xs[b] - xs[a]) * (ws[j] - ws[a]) - (ws[b] - ws[a]) * (xs[j] - xs[a]);
      if (cross > 0.0) break;
      hull.pop_back();
    }
    hull.push_back(j);
  }
  std::size_t p = 0;
  for (std::size_t q = 0; q < ys.size(); ++q) {
    const double y = ys[q];
    double best = y * xs[hull[p]] - ws[hull[p]];
    while (p + 1 < hull.size()) {
      const double next = y * xs[hull[p + 1]] - ws[hull[p + 1]];
      if (!(next > best)) break;
      best = next;
      ++p;
    }
    out[q * out_stride] = best;
    arg[q * out_stride] = pos[hull[p]];
  }
}

std::vector<std::size_t> masked_nodes(const PotentialField& f) {
  std::vector<std::size_t> nodes;
  for (std::size_t k = 0; k < f.values.size(); ++k)
    if (f.mask[k]) nodes.push_back(k);
  if (nodes.empty()) throw PreconditionError("field has an empty mask");
  return nodes;
}

void check_slope_grid(const SlopeGrid& s, int dim) {
  if (s.dim != dim) throw PreconditionError("slope grid dimension differs from the field");
  s.validate();
}

double gap_at(const PotentialField& f, std::size_t node, const PotentialField& fstar, std::size_t y) {
  const Point a = f.grid.coords(node);
  const Point p = fstar.grid.coords(y);
  return f.values[node] + fstar.values[y] - dot(p, a, f.grid.dim);
}

}  // namespace

SlopeGrid auto_slope_grid(const PotentialField& f, double spacing, int margin_cells) {
  const GridSpec& g = f.grid;
  if (spacing <= 0.0) spacing = g.spacing;
  if (!std::isfinite(spacing)) throw PreconditionError("slope spacing must be finite");
  SlopeGrid s;
  s.dim = g.dim;
  s.spacing = spacing;
  s.ball_radius = 0.0;
  for (int a = 0; a < g.dim; ++a) {
    double lo = kInf, hi = -kInf;
    const std::ptrdiff_t st = g.stride(a);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!f.mask[k]) continue;
      Index idx = g.unflat(k);
      ++idx[a];
      if (!g.contains(idx) || !f.mask[k + st]) continue;
      const double d = (f.values[k + st] - f.values[k]) / g.spacing;
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    if (!(lo <= hi)) throw DomainTooSmall(fmt::format("slope grid sizing: no adjacent masked pair along axis {}", a));
    const long ilo = static_cast<long>(std::floor(lo / spacing)) - margin_cells;
    const long ihi = static_cast<long>(std::ceil(hi / spacing)) + margin_cells;
    const long n = ihi - ilo + 1;
    if (n > 100000) throw PreconditionError(fmt::format("slope grid sizing: {} nodes along axis {}", n, a));
    s.shape[a] = static_cast<int>(std::max<long>(n, 3));
    s.origin[a] = static_cast<double>(ilo) * spacing;
  }
  if (s.size() > kMaxSlopeNodes)
    throw PreconditionError(fmt::format("slope grid sizing: {} nodes exceeds the limit", s.size()));
  return s;
}

void require_convex(const PotentialField& f, double tol) {
  const ConvexityProbe p = directional_convexity(f);
  if (tol < 0.0) tol = 1e-10 * (1.0 + max_abs(f)) / (f.grid.spacing * f.grid.spacing);
  if (p.modulus < -tol)
    throw NotConvexError(fmt::format("not convex: second difference {:.6g} at node {}", p.modulus, p.worst_node),
                         p.worst_node, p.modulus);
}

Conjugate conjugate_brute_argmax(const PotentialField& f, const SlopeGrid& slopes, bool check_convex) {
  check_slope_grid(slopes, f.grid.dim);
  if (check_convex) require_convex(f);
  const int n = f.grid.dim;
  const std::vector<std::size_t> nodes = masked_nodes(f);
  std::vector<Point> xs(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) xs[i] = f.grid.coords(nodes[i]);

  Conjugate c;
  c.values.grid = slopes;
  c.values.values.assign(slopes.size(), 0.0);
  c.values.mask.assign(slopes.size(), 1);
  c.values.value_kind = "conjugate";
  c.argmax.assign(slopes.size(), 0);
  for (std::size_t q = 0; q < slopes.size(); ++q) {
    const Point y = slopes.coords(q);
    double best = -kInf;
    std::size_t arg = nodes[0];
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double v = dot(y, xs[i], n) - f.values[nodes[i]];
      if (v > best) {
        best = v;
        arg = nodes[i];
      }
    }
    c.values.values[q] = best;
    c.argmax[q] = arg;
  }
  return c;
}

PotentialField conjugate_brute(const PotentialField& f, const SlopeGrid& slopes) {
  return conjugate_brute_argmax(f, slopes).values;
}

Conjugate conjugate_fast_argmax(const PotentialField& f, const SlopeGrid& slopes, bool check_convex) {
  check_slope_grid(slopes, f.grid.dim);
  if (check_convex) require_convex(f);
  masked_nodes(f);
  const GridSpec& g = f.grid;
  const int n = g.dim;

  // Axis-by-axis sup, last axis first. Stage a maps an array whose axes
  // > a already live in slope space to one whose axis a does as well.
  Index shape = g.shape;
  std::vector<double> w(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) w[k] = f.mask[k] ? f.values[k] : kInf;
  std::vector<std::vector<int>> args(kMaxDim);
  std::vector<Index> stage_shape(kMaxDim);

  std::vector<double> xs, ws, ys;
  std::vector<int> pos;
  for (int a = n - 1; a >= 0; --a) {
    Index out_shape = shape;
    out_shape[a] = slopes.shape[a];
    std::vector<double> out(box_size(out_shape), -kInf);
    std::vector<int>& arg = args[a];
    arg.assign(out.size(), -1);
    stage_shape[a] = out_shape;
    ys.resize(slopes.shape[a]);
    for (int q = 0; q < slopes.shape[a]; ++q) ys[q] = slopes.coord(a, q);

    Index line_shape = shape;
    line_shape[a] = 1;
    const std::size_t in_stride = box_flat(shape, a == 0 ? Index{1, 0, 0} : a == 1 ? Index{0, 1, 0} : Index{0, 0, 1});
    const std::size_t out_stride =
        box_flat(out_shape, a == 0 ? Index{1, 0, 0} : a == 1 ? Index{0, 1, 0} : Index{0, 0, 1});
    for (std::size_t l = 0; l < box_size(line_shape); ++l) {
      Index li{0, 0, 0};
      std::size_t rem = l;
      li[2] = static_cast<int>(rem % line_shape[2]);
      rem /= line_shape[2];
      li[1] = static_cast<int>(rem % line_shape[1]);
      li[0] = static_cast<int>(rem / line_shape[1]);
      const std::size_t in0 = box_flat(shape, li);
      const std::size_t out0 = box_flat(out_shape, li);
      xs.clear();
      ws.clear();
      pos.clear();
      for (int i = 0; i < shape[a]; ++i) {
        const double v = w[in0 + i * in_stride];
        if (v == kInf) continue;
        xs.push_back(g.coord(a, i));
        ws.push_back(v);
        pos.push_back(i);
      }
      if (xs.empty()) continue;
      transform_1d(xs, ws, pos, ys, out.data() + out0, arg.data() + out0, out_stride);
    }
    // The next stage maximises y'x' + out, i.e. transforms -out.
    for (double& v : out) v = -v;
    w = std::move(out);
    shape = out_shape;
  }

  Conjugate c;
  c.values.grid = slopes;
  c.values.values.assign(slopes.size(), 0.0);
  c.values.mask.assign(slopes.size(), 1);
  c.values.value_kind = "conjugate";
  c.argmax.assign(slopes.size(), 0);
  for (std::size_t q = 0; q < slopes.size(); ++q) {
    const Index yi = slopes.unflat(q);
    // Walk back through the stages: axis 0 was resolved last.
    Index src = yi;
    for (int a = 0; a < n; ++a) {
      const int i = args[a][box_flat(stage_shape[a], src)];
      if (i < 0) throw InternalError("fast conjugate lost its maximiser");
      src[a] = i;
    }
    const std::size_t k = g.flat(src);
    c.argmax[q] = k;
    c.values.values[q] = dot(slopes.coords(q), g.coords(k), n) - f.values[k];
  }
  return c;
}

PotentialField conjugate_fast(const PotentialField& f, const SlopeGrid& slopes) {
  return conjugate_fast_argmax(f, slopes).values;
}

SlopeSet subdifferential(const PotentialField& f, const PotentialField& fstar, std::size_t node,
                         std::optional<double> tolerance) {
  if (node >= f.values.size() || !f.mask[node])
    throw PreconditionError(fmt::format("subdifferential anchor {} is not a masked node", node));
  SlopeSet s;
  s.dim = f.grid.dim;
  s.anchor = f.grid.coords(node);
  s.anchor_node = node;
  std::vector<double> gaps(fstar.values.size());
  double lo = kInf;
  for (std::size_t q = 0; q < gaps.size(); ++q) {
    gaps[q] = gap_at(f, node, fstar, q);
    lo = std::min(lo, gaps[q]);
  }
  s.min_gap = lo;
  const double hs = fstar.grid.spacing;
  s.tolerance = tolerance ? *tolerance : lo + 0.5 * hs * hs;
  const double cut = s.tolerance + 1e-12 * (1.0 + std::abs(f.values[node]));
  for (std::size_t q = 0; q < gaps.size(); ++q)
    if (gaps[q] <= cut) s.members.push_back(fstar.grid.coords(q));
  if (s.members.empty())
    throw InternalError(fmt::format("empty subdifferential at node {} (tolerance {:.3g}, smallest gap {:.3g})", node,
                                    s.tolerance, lo));
  return s;
}

SlopeSet subdifferential(const PotentialField& f, std::size_t node, std::optional<double> tolerance) {
  const SlopeGrid slopes = auto_slope_grid(f);
  const PotentialField fstar = conjugate_fast(f, slopes);
  return subdifferential(f, fstar, node, tolerance);
}

SlopeSet subdifferential(const PotentialField& f, const Point& a, std::optional<double> tolerance) {
  std::size_t best = f.values.size();
  double bd = kInf;
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    if (!f.mask[k]) continue;
    const Point x = f.grid.coords(k);
    double d = 0.0;
    for (int i = 0; i < f.grid.dim; ++i) d += (x[i] - a[i]) * (x[i] - a[i]);
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  if (best == f.values.size()) throw PreconditionError("field has an empty mask");
  return subdifferential(f, best, tolerance);
}

std::size_t DomainMask::count() const noexcept {
  return static_cast<std::size_t>(std::count_if(inside.begin(), inside.end(), [](auto m) { return m != 0; }));
}

Mask rim_nodes(const PotentialField& f) {
  const GridSpec& g = f.grid;
  Mask rim(g.size(), 0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!f.mask[k]) continue;
    const Index idx = g.unflat(k);
    for (int a = 0; a < g.dim && !rim[k]; ++a)
      for (int s : {-1, 1}) {
        Index p = idx;
        p[a] += s;
        if (!g.contains(p) || !f.mask[g.flat(p)]) {
          rim[k] = 1;
          break;
        }
      }
  }
  return rim;
}

DomainMask slope_domain_from(const PotentialField& f, const Conjugate& conj) {
  const Mask rim = rim_nodes(f);
  DomainMask d;
  d.slope_grid = conj.values.grid;
  d.inside.assign(conj.argmax.size(), 0);
  for (std::size_t q = 0; q < conj.argmax.size(); ++q) d.inside[q] = rim[conj.argmax[q]] ? 0 : 1;
  return d;
}

DomainMask slope_domain(const PotentialField& f, std::optional<SlopeGrid> slopes) {
  const SlopeGrid s = slopes ? *slopes : auto_slope_grid(f);
  return slope_domain_from(f, conjugate_fast_argmax(f, s));
}

double hausdorff(std::span<const Point> a, std::span<const Point> b, int dim) {
  if (a.empty() || b.empty()) return kInf;
  auto directed = [dim](std::span<const Point> p, std::span<const Point> q) {
    double worst = 0.0;
    for (const Point& x : p) {
      double best = kInf;
      for (const Point& y : q) {
        double d = 0.0;
        for (int i = 0; i < dim; ++i) d += (x[i] - y[i]) * (x[i] - y[i]);
        best = std::min(best, d);
      }
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(directed(a, b), directed(b, a));
}

Mask crease_nodes(const PotentialField& f, double jump) {
  const GridSpec& g = f.grid;
  Mask out(g.size(), 0);
  // One offset from each +-d pair.
  std::vector<Index> offsets;
  const int r1 = g.dim > 1 ? 1 : 0, r2 = g.dim > 2 ? 1 : 0;
  for (int i = -1; i <= 1; ++i)
    for (int j = -r1; j <= r1; ++j)
      for (int k = -r2; k <= r2; ++k)
        if (i > 0 || (i == 0 && (j > 0 || (j == 0 && k > 0)))) offsets.push_back({i, j, k});
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!f.mask[n]) continue;
    const Index c = g.unflat(n);
    for (const Index& d : offsets) {
      const Index p{c[0] + d[0], c[1] + d[1], c[2] + d[2]};
      const Index m{c[0] - d[0], c[1] - d[1], c[2] - d[2]};
      if (!g.contains(p) || !g.contains(m) || !f.mask[g.flat(p)] || !f.mask[g.flat(m)]) continue;
      const double len = g.spacing * std::sqrt(double(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]));
      if ((f.values[g.flat(p)] + f.values[g.flat(m)] - 2.0 * f.values[n]) / len > jump) {
        out[n] = 1;
        break;
      }
    }
  }
  return out;
}

namespace {

double min_gap(const PotentialField& f, const PotentialField& fstar, std::size_t node) {
  double lo = kInf;
  for (std::size_t q = 0; q < fstar.values.size(); ++q) lo = std::min(lo, gap_at(f, node, fstar, q));
  return lo;
}

}  // namespace

AuditReport check_sum_rule(const PotentialField& v, double kappa, std::span<const std::size_t> samples, double tol) {
  if (!(kappa > 0.0)) throw PreconditionError("sum rule needs kappa > 0");
  const int n = v.grid.dim;
  PotentialField w = v;
  for (std::size_t k = 0; k < w.values.size(); ++k) {
    const Point x = w.grid.coords(k);
    w.values[k] += 0.5 * kappa * dot(x, x, n);
  }
  const PotentialField vstar = conjugate_fast(v, auto_slope_grid(v));
  const PotentialField wstar = conjugate_fast(w, auto_slope_grid(w));
  const Mask deep = erode(v.grid, v.mask, 2);
  const double limit = 2.0 * std::max(vstar.grid.spacing, wstar.grid.spacing) + tol;
  const Mask crease = crease_nodes(v, limit);
  std::size_t creased = 0;

  AuditReport r;
  r.name = "sum-rule";
  double worst = 0.0;
  for (std::size_t node : samples) {
    const Point a = v.grid.coords(node);
    // Minimal-gap members only: the default slack fattens a set with
    // quadratic gap (v+Q) by sqrt(kappa) cells but a set with linear gap (v)
    // by almost nothing.
    const SlopeSet sw = subdifferential(w, wstar, node, min_gap(w, wstar, node));
    SlopeSet sv = subdifferential(v, vstar, node, min_gap(v, vstar, node));
    for (Point& p : sv.members)
      for (int i = 0; i < n; ++i) p[i] += kappa * a[i];
    const double d = hausdorff(sw.members, sv.members, n);
    if (!deep[node]) {
      r.notes.push_back(fmt::format("rim sample {}: hausdorff {:.6g} (not asserted)", node, d));
      continue;
    }
    if (crease[node]) {
      ++creased;
      r.notes.push_back(fmt::format("crease sample {}: hausdorff {:.6g} (not asserted)", node, d));
      continue;
    }
    ++r.checked_nodes;
    r.observe(limit - d);
    worst = std::max(worst, d);
    if (d > limit) r.violate(node, "hausdorff", d);
  }
  r.metrics["max_hausdorff"] = worst;
  r.metrics["limit"] = limit;
  r.metrics["crease_samples"] = static_cast<double>(creased);
  return r.finalize();
}

AuditReport check_slope_increase(const PotentialField& f, double s_delta, std::span<const std::size_t> samples) {
  const int n = f.grid.dim;
  const SlopeGrid slopes = auto_slope_grid(f);
  const Conjugate conj = conjugate_fast_argmax(f, slopes);
  const DomainMask dom = slope_domain_from(f, conj);
  const double hs = slopes.spacing;

  AuditReport r;
  r.name = "slope-increase";
  std::vector<std::uint8_t> flagged(slopes.size(), 0);
  for (std::size_t node : samples) {
    const SlopeSet s = subdifferential(f, conj.values, node);
    // Non-rim nodes cover R - h; the maximising node may sit half a cell
    // diagonal beyond a slope's preimage.
    const double reach = f.grid.ball_radius - f.grid.spacing * (1.0 + 0.5 * std::sqrt(double(n)));
    const double radius = s_delta * (reach - norm(s.anchor, n)) - 2.0 * hs;
    ++r.checked_nodes;
    if (radius <= 0.0) {
      r.notes.push_back(fmt::format("sample {}: ball radius {:.3g} is empty", node, radius));
      continue;
    }
    const int span = static_cast<int>(std::ceil(radius / hs)) + 1;
    for (const Point& m : s.members) {
      Index c{0, 0, 0};
      for (int i = 0; i < n; ++i) c[i] = static_cast<int>(std::lround((m[i] - slopes.origin[i]) / hs));
      Index lo{0, 0, 0}, hi{0, 0, 0};
      for (int i = 0; i < n; ++i) {
        lo[i] = c[i] - span;
        hi[i] = c[i] + span;
      }
      for (int i0 = lo[0]; i0 <= hi[0]; ++i0)
        for (int i1 = lo[1]; i1 <= hi[1]; ++i1)
          for (int i2 = lo[2]; i2 <= hi[2]; ++i2) {
            const Point y{slopes.coord(0, i0), slopes.coord(1, i1), n == 3 ? slopes.coord(2, i2) : 0.0};
            double d = 0.0;
            for (int i = 0; i < n; ++i) d += (y[i] - m[i]) * (y[i] - m[i]);
            d = std::sqrt(d);
            if (d > radius) continue;
            const Index yi{i0, i1, i2};
            const bool in = slopes.contains(yi) && dom.inside[slopes.flat(yi)];
            r.observe(in ? radius - d : d - radius);
            if (!in) {
              const std::size_t key = slopes.contains(yi) ? slopes.flat(yi) : slopes.size();
              if (key == slopes.size() || !flagged[key]) {
                if (key != slopes.size()) flagged[key] = 1;
                r.violate(key, "uncovered-slope", d);
              }
            }
          }
    }
  }
  r.metrics["domain_nodes"] = static_cast<double>(dom.count());
  return r.finalize();
}

}  // namespace slag
