#include "slag/hessian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "slag/error.hpp"

namespace slag {

std::size_t HessianField::interior_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(interior.begin(), interior.end(), [](auto m) { return m != 0; }));
}

bool stencil_inside(const GridSpec& grid, std::span<const std::uint8_t> mask, std::size_t k, int step) {
  if (!mask[k]) return false;
  const Index idx = grid.unflat(k);
  const int n = grid.dim;
  auto ok = [&](const Index& o) {
    const Index p{idx[0] + step * o[0], idx[1] + step * o[1], idx[2] + step * o[2]};
    return grid.contains(p) && mask[grid.flat(p)] != 0;
  };
  for (int i = 0; i < n; ++i) {
    for (int si : {-1, 1}) {
      Index o{0, 0, 0};
      o[i] = si;
      if (!ok(o)) return false;
      for (int j = i + 1; j < n; ++j)
        for (int sj : {-1, 1}) {
          Index q = o;
          q[j] = sj;
          if (!ok(q)) return false;
        }
    }
  }
  return true;
}

HessianField hessian_field(const PotentialField& u, int step) {
  const GridSpec& g = u.grid;
  HessianField hf;
  hf.grid = g;
  hf.step = step;
  hf.matrices.assign(g.size(), SymMatrix(g.dim));
  hf.interior.assign(g.size(), 0);
  const double hh = step * g.spacing;
  const double inv_h2 = 1.0 / (hh * hh);
  const double inv_4h2 = 0.25 * inv_h2;
  std::ptrdiff_t st[kMaxDim];
  for (int a = 0; a < kMaxDim; ++a) st[a] = step * g.stride(a);
  const auto& v = u.values;
  bool any = false;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!stencil_inside(g, u.mask, k, step)) continue;
    any = true;
    hf.interior[k] = 1;
    SymMatrix& m = hf.matrices[k];
    for (int i = 0; i < g.dim; ++i) {
      m(i, i) = (v[k + st[i]] - 2.0 * v[k] + v[k - st[i]]) * inv_h2;
      for (int j = i + 1; j < g.dim; ++j) {
        const double c =
            (v[k + st[i] + st[j]] - v[k + st[i] - st[j]] - v[k - st[i] + st[j]] + v[k - st[i] - st[j]]) * inv_4h2;
        m(i, j) = c;
        m(j, i) = c;
      }
    }
  }
  if (!any) throw DomainTooSmall("domain too small: no node has a full Hessian stencil");
  return hf;
}

std::vector<Spectrum> spectra(const HessianField& h) {
  std::vector<Spectrum> out(h.matrices.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    if (h.interior[k]) out[k] = eigen_decompose(h.matrices[k]);
  return out;
}

double semiconvexity_modulus(const PotentialField& u) {
  const HessianField h = hessian_field(u);
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < h.matrices.size(); ++k)
    if (h.interior[k]) lo = std::min(lo, eigen_decompose(h.matrices[k]).min());
  return lo;
}

ConvexityProbe directional_convexity(const PotentialField& u) {
  const GridSpec& g = u.grid;
  std::vector<Index> dirs;
  for (int i = 0; i < g.dim; ++i) {
    Index e{0, 0, 0};
    e[i] = 1;
    dirs.push_back(e);
    for (int j = i + 1; j < g.dim; ++j)
      for (int s : {-1, 1}) {
        Index d = e;
        d[j] = s;
        dirs.push_back(d);
      }
  }
  const double h2 = g.spacing * g.spacing;
  ConvexityProbe probe{std::numeric_limits<double>::infinity(), 0};
  bool any = false;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!u.mask[k]) continue;
    const Index idx = g.unflat(k);
    for (const Index& d : dirs) {
      const Index p{idx[0] + d[0], idx[1] + d[1], idx[2] + d[2]};
      const Index m{idx[0] - d[0], idx[1] - d[1], idx[2] - d[2]};
      if (!g.contains(p) || !g.contains(m)) continue;
      const std::size_t kp = g.flat(p);
      const std::size_t km = g.flat(m);
      if (!u.mask[kp] || !u.mask[km]) continue;
      const double len2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
      const double val = (u.values[kp] - 2.0 * u.values[k] + u.values[km]) / (len2 * h2);
      any = true;
      if (val < probe.modulus) probe = {val, k};
    }
  }
  if (!any) throw DomainTooSmall("domain too small: no three-point line inside the mask");
  return probe;
}

GradientField centered_gradient(const PotentialField& u) {
  const GridSpec& g = u.grid;
  GradientField gf;
  gf.gradients.assign(g.size(), Point{0.0, 0.0, 0.0});
  gf.defined.assign(g.size(), 0);
  const double inv_2h = 0.5 / g.spacing;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!u.mask[k]) continue;
    const Index idx = g.unflat(k);
    bool ok = true;
    Point grad{0.0, 0.0, 0.0};
    for (int a = 0; a < g.dim && ok; ++a) {
      Index p = idx, m = idx;
      ++p[a];
      --m[a];
      if (!g.contains(p) || !g.contains(m) || !u.mask[g.flat(p)] || !u.mask[g.flat(m)]) {
        ok = false;
        break;
      }
      grad[a] = (u.values[g.flat(p)] - u.values[g.flat(m)]) * inv_2h;
    }
    if (!ok) continue;
    gf.gradients[k] = grad;
    gf.defined[k] = 1;
  }
  return gf;
}

Mask kink_nodes(const PotentialField& u, double threshold, bool from_above) {
  Mask out(u.grid.size(), 0);
  const HessianField h1 = hessian_field(u);
  HessianField h2;
  try {
    h2 = hessian_field(u, 2);
  } catch (const DomainTooSmall&) {
    return out;
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!h1.interior[k] || !h2.interior[k]) continue;
    const Spectrum s1 = eigen_decompose(h1.matrices[k]);
    const Spectrum s2 = eigen_decompose(h2.matrices[k]);
    const double jump = from_above ? s1.max() - s2.max() : s2.min() - s1.min();
    if (jump > threshold) out[k] = 1;
  }
  return out;
}

}  // namespace slag
