#include "slag/interp.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "slag/error.hpp"

namespace slag {

namespace {

constexpr int kMax = PatchInterpolant::kMaxNodes;

struct Basis {
  std::array<double, kMax> l{}, d1{}, d2{};
};

// Lagrange basis on the nodes 0..p-1 and its first two derivatives at t.
Basis basis(double t, int p) {
  Basis b;
  for (int j = 0; j < p; ++j) {
    double v = 1.0, v1 = 0.0, v2 = 0.0;
    for (int m = 0; m < p; ++m) {
      if (m == j) continue;
      const double d = 1.0 / (j - m);
      const double f = (t - m) * d;
      v2 = v2 * f + 2.0 * v1 * d;
      v1 = v1 * f + v * d;
      v *= f;
    }
    b.l[j] = v;
    b.d1[j] = v1;
    b.d2[j] = v2;
  }
  return b;
}

}  // namespace

PatchInterpolant::PatchInterpolant(const PotentialField& f, int nodes) : f_(&f), nodes_(nodes) {
  if (nodes < 2 || nodes > kMax) throw PreconditionError("interpolation patch needs 2..8 nodes per axis");
  const GridSpec& g = f.grid;
  for (int a = 0; a < kMaxDim; ++a) sat_shape_[a] = g.shape[a] + 1;
  sat_.assign(static_cast<std::size_t>(sat_shape_[0]) * sat_shape_[1] * sat_shape_[2], 0);
  auto at = [&](int i, int j, int k) -> std::uint32_t& {
    return sat_[(static_cast<std::size_t>(i) * sat_shape_[1] + j) * sat_shape_[2] + k];
  };
  for (int i = 1; i < sat_shape_[0]; ++i)
    for (int j = 1; j < sat_shape_[1]; ++j)
      for (int k = 1; k < sat_shape_[2]; ++k) {
        const std::uint32_t m = f.mask[g.flat({i - 1, j - 1, k - 1})] ? 1 : 0;
        at(i, j, k) = m + at(i - 1, j, k) + at(i, j - 1, k) + at(i, j, k - 1) - at(i - 1, j - 1, k) -
                      at(i - 1, j, k - 1) - at(i, j - 1, k - 1) + at(i - 1, j - 1, k - 1);
      }
}

bool PatchInterpolant::box_masked(const Index& lo) const {
  const GridSpec& g = f_->grid;
  Index hi{};
  for (int a = 0; a < kMaxDim; ++a) {
    const int ext = a < g.dim ? nodes_ : 1;
    if (lo[a] < 0 || lo[a] + ext > g.shape[a]) return false;
    hi[a] = lo[a] + ext;
  }
  auto at = [&](int i, int j, int k) -> long {
    return sat_[(static_cast<std::size_t>(i) * sat_shape_[1] + j) * sat_shape_[2] + k];
  };
  const long sum = at(hi[0], hi[1], hi[2]) - at(lo[0], hi[1], hi[2]) - at(hi[0], lo[1], hi[2]) -
                   at(hi[0], hi[1], lo[2]) + at(lo[0], lo[1], hi[2]) + at(lo[0], hi[1], lo[2]) +
                   at(hi[0], lo[1], lo[2]) - at(lo[0], lo[1], lo[2]);
  long want = 1;
  for (int a = 0; a < g.dim; ++a) want *= nodes_;
  return sum == want;
}

bool PatchInterpolant::select(const Point& x, Index& start) const {
  const GridSpec& g = f_->grid;
  const int p = nodes_;
  Index cell{0, 0, 0}, centre{0, 0, 0};
  for (int a = 0; a < g.dim; ++a) {
    cell[a] = static_cast<int>(std::floor((x[a] - g.origin[a]) / g.spacing));
    centre[a] = cell[a] - (p / 2 - 1);
  }
  // Lower corners with cell in [lo - 1, lo + p - 1], nearest to the centre.
  Index lo_min{0, 0, 0}, lo_max{0, 0, 0};
  for (int a = 0; a < g.dim; ++a) {
    lo_min[a] = cell[a] - p + 1;
    lo_max[a] = cell[a] + 1;
  }
  long best = -1;
  for (int i = lo_min[0]; i <= lo_max[0]; ++i)
    for (int j = lo_min[1]; j <= lo_max[1]; ++j)
      for (int k = lo_min[2]; k <= lo_max[2]; ++k) {
        const long cost = static_cast<long>(i - centre[0]) * (i - centre[0]) +
                          static_cast<long>(j - centre[1]) * (j - centre[1]) +
                          static_cast<long>(k - centre[2]) * (k - centre[2]);
        if (best >= 0 && cost >= best) continue;
        const Index lo{i, j, k};
        if (!box_masked(lo)) continue;
        start = lo;
        best = cost;
      }
  return best >= 0;
}

LocalJet PatchInterpolant::eval(const Index& start, const Point& x) const {
  const GridSpec& g = f_->grid;
  const int n = g.dim;
  const int p = nodes_;
  Basis b[kMaxDim];
  for (int a = 0; a < n; ++a) b[a] = basis((x[a] - g.coord(a, start[a])) / g.spacing, p);
  const double ih = 1.0 / g.spacing;
  LocalJet jet;
  jet.hess = SymMatrix(n);
  const int e2 = n == 3 ? p : 1;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      for (int k = 0; k < e2; ++k) {
        const double v = f_->values[g.flat({start[0] + i, start[1] + j, start[2] + k})];
        const int id[3] = {i, j, k};
        double l[3] = {1.0, 1.0, 1.0}, d1[3] = {0.0, 0.0, 0.0}, d2[3] = {0.0, 0.0, 0.0};
        for (int a = 0; a < n; ++a) {
          l[a] = b[a].l[id[a]];
          d1[a] = b[a].d1[id[a]] * ih;
          d2[a] = b[a].d2[id[a]] * ih * ih;
        }
        jet.value += v * l[0] * l[1] * l[2];
        for (int a = 0; a < n; ++a) {
          double others = 1.0;
          for (int c = 0; c < n; ++c)
            if (c != a) others *= l[c];
          jet.grad[a] += v * d1[a] * others;
          jet.hess(a, a) += v * d2[a] * others;
          for (int c = a + 1; c < n; ++c) {
            double rest = 1.0;
            for (int e = 0; e < n; ++e)
              if (e != a && e != c) rest *= l[e];
            jet.hess(a, c) += v * d1[a] * d1[c] * rest;
          }
        }
      }
  for (int a = 0; a < n; ++a)
    for (int c = a + 1; c < n; ++c) jet.hess(c, a) = jet.hess(a, c);
  return jet;
}

}  // namespace slag
