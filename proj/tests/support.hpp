#pragma once

// Small helpers shared by the unit tests. Oracles live in the test files.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "slag/grid.hpp"
#include "slag/linalg.hpp"

namespace slagtest {

using slag::Point;
using slag::PotentialField;
using slag::SymMatrix;

inline std::vector<std::size_t> masked_nodes(const PotentialField& f) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < f.grid.size(); ++k)
    if (f.mask[k]) out.push_back(k);
  return out;
}

/// Node closest to `p`.
inline std::size_t node_at(const slag::GridSpec& g, const Point& p) {
  std::size_t best = 0;
  double bd = INFINITY;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Point x = g.coords(k);
    double d = 0.0;
    for (int a = 0; a < g.dim; ++a) d += (x[a] - p[a]) * (x[a] - p[a]);
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  return best;
}

inline SymMatrix random_symmetric(std::mt19937_64& rng, int n, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m(i, j) = m(j, i) = u(rng);
  return m;
}

/// Random rotation from Gram-Schmidt on a Gaussian matrix.
inline SymMatrix random_orthogonal(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  SymMatrix q(n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) q(r, c) = g(rng);
    for (int p = 0; p < c; ++p) {
      double d = 0.0;
      for (int r = 0; r < n; ++r) d += q(r, c) * q(r, p);
      for (int r = 0; r < n; ++r) q(r, c) -= d * q(r, p);
    }
    double len = 0.0;
    for (int r = 0; r < n; ++r) len += q(r, c) * q(r, c);
    for (int r = 0; r < n; ++r) q(r, c) /= std::sqrt(len);
  }
  return q;
}

/// ½ xᵀAx.
inline slag::Formula quadratic(const SymMatrix& a) {
  return [a](const Point& x) {
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i)
      for (int j = 0; j < a.dim(); ++j) s += x[i] * a(i, j) * x[j];
    return 0.5 * s;
  };
}

inline slag::Formula isotropic(double k) {
  return [k](const Point& x) { return 0.5 * k * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); };
}

inline slag::Formula quartic_plus_half() {
  return [](const Point& x) {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    return 0.5 * r2 + 0.25 * r2 * r2;
  };
}

}  // namespace slagtest
