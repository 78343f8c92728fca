#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "slag/error.hpp"
#include "slag/grid.hpp"
#include "slag/hessian.hpp"
#include "slag/linalg.hpp"
#include "support.hpp"

using namespace slag;
using namespace slagtest;

namespace {

// Roots of det(M - t I) by sign scanning plus bisection.
std::vector<double> charpoly_roots(const SymMatrix& m) {
  const int n = m.dim();
  auto p = [&](double t) {
    SymMatrix a = m;
    for (int i = 0; i < n; ++i) a(i, i) -= t;
    return a.determinant();
  };
  std::vector<double> roots;
  const double bound = 1.0 + 3.0 * 2.0 * n;
  const int steps = 200000;
  double prev_t = -bound, prev = p(prev_t);
  for (int s = 1; s <= steps; ++s) {
    const double t = -bound + 2.0 * bound * s / steps;
    const double v = p(t);
    if (prev == 0.0) {
      roots.push_back(prev_t);
    } else if ((prev < 0.0) != (v < 0.0)) {
      double lo = prev_t, hi = t, flo = prev;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = p(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_t = t;
    prev = v;
  }
  std::sort(roots.rbegin(), roots.rend());
  return roots;
}

SymMatrix conjugate(const SymMatrix& q, const SymMatrix& m) { return q * m * q.transpose(); }

// Analytic Hessian of ¼|x|⁴: |x|² I + 2 x xᵀ.
SymMatrix quartic_hessian(const Point& x, int n) {
  double r2 = 0.0;
  for (int i = 0; i < n; ++i) r2 += x[i] * x[i];
  SymMatrix h(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h(i, j) = (i == j ? r2 : 0.0) + 2.0 * x[i] * x[j];
  return h;
}

double max_entry_diff(const SymMatrix& a, const SymMatrix& b) {
  double e = 0.0;
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j) e = std::max(e, std::abs(a(i, j) - b(i, j)));
  return e;
}

const Formula quarter_quartic = [](const Point& x) {
  const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
  return 0.25 * r2 * r2;
};

}  // namespace

TEST_CASE("ball grid layout") {
  const GridSpec g = GridSpec::ball(2, 0.25);
  CHECK(g.shape[0] == 9);
  CHECK(g.shape[1] == 9);
  CHECK(g.shape[2] == 1);
  CHECK(g.coords(g.flat({4, 4, 0}))[0] == 0.0);
  const GridSpec p = GridSpec::ball(3, 0.25, 1.0, 2);
  CHECK(p.shape[2] == 13);
  CHECK(p.coord(0, 0) == doctest::Approx(-1.5));
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(g.flat(g.unflat(k)) == k);
}

TEST_CASE("sample_potential") {
  const GridSpec g = GridSpec::ball(2, 0.25);
  SUBCASE("zero formula gives the zero field") {
    const PotentialField u = sample_potential([](const Point&) { return 0.0; }, g);
    for (double v : u.values) CHECK(v == 0.0);
    CHECK(u.masked_count() > 0);
  }
  SUBCASE("half squared norm at the centre and on the rim") {
    const PotentialField u = sample_potential(isotropic(1.0), g);
    CHECK(u.values[node_at(g, {1.0, 0.0, 0.0})] == 0.5);
    CHECK(u.values[node_at(g, {0.0, 0.0, 0.0})] == 0.0);
    CHECK(u.mask[node_at(g, {1.0, 0.0, 0.0})]);
    CHECK_FALSE(u.mask[node_at(g, {1.0, 1.0, 0.0})]);
  }
  SUBCASE("quartic values match re-evaluation") {
    const GridSpec f = GridSpec::ball(2, 1.0 / 16);
    const PotentialField u = sample_potential(quarter_quartic, f);
    std::mt19937_64 rng(7);
    std::vector<std::size_t> nodes = masked_nodes(u), pick;
    std::sample(nodes.begin(), nodes.end(), std::back_inserter(pick), 5, rng);
    for (std::size_t k : pick) {
      const Point x = f.coords(k);
      const double r2 = x[0] * x[0] + x[1] * x[1];
      CHECK(u.values[k] == 0.25 * r2 * r2);
    }
  }
  SUBCASE("non-finite masked value names the node") {
    const Formula bad = [](const Point& x) { return x[0] > 0.4 ? std::numeric_limits<double>::quiet_NaN() : 0.0; };
    CHECK_THROWS_AS(sample_potential(bad, g), DomainError);
    try {
      sample_potential(bad, g);
    } catch (const DomainError& e) {
      CHECK(g.coords(e.node())[0] > 0.4);
    }
  }
}

TEST_CASE("field validation") {
  PotentialField u = sample_potential(isotropic(1.0), GridSpec::ball(2, 0.25));
  CHECK_NOTHROW(validate_field(u));
  PotentialField empty = u;
  std::fill(empty.mask.begin(), empty.mask.end(), 0);
  CHECK_THROWS_AS(validate_field(empty), PreconditionError);
  PotentialField split = u;
  std::fill(split.mask.begin(), split.mask.end(), 0);
  split.mask[split.grid.flat({1, 1, 0})] = 1;
  split.mask[split.grid.flat({5, 5, 0})] = 1;
  CHECK(component_count(split.grid, split.mask) == 2);
  CHECK_THROWS_AS(validate_field(split), PreconditionError);
}

TEST_CASE("erode and dilate") {
  const GridSpec g = GridSpec::ball(2, 1.0 / 8, 1.0, 2);
  const PotentialField u = sample_potential(isotropic(1.0), g);
  const Mask e = erode(g, u.mask, 1);
  const Mask d = dilate(g, e, 1);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (e[k]) CHECK(u.mask[k]);
    if (u.mask[k] && !e[k]) CHECK_FALSE(e[k]);
    if (e[k]) CHECK(d[k]);
  }
  CHECK(std::count(e.begin(), e.end(), 1) < std::count(u.mask.begin(), u.mask.end(), 1));
  CHECK(component_count(g, e) == 1);
}

TEST_CASE("hessian_field on quadratics and bilinear data") {
  const GridSpec g = GridSpec::ball(2, 1.0 / 8);
  SUBCASE("diag(3, 1) exactly") {
    const HessianField h = hessian_field(sample_potential(quadratic(SymMatrix::diagonal(2, {3.0, 1.0, 0.0})), g));
    CHECK(h.interior_count() > 0);
    for (std::size_t k = 0; k < h.matrices.size(); ++k) {
      if (!h.interior[k]) continue;
      CHECK(h.matrices[k](0, 0) == doctest::Approx(3.0).epsilon(1e-12));
      CHECK(h.matrices[k](1, 1) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(h.matrices[k](0, 1)) < 1e-12);
    }
  }
  SUBCASE("x1 x2 has unit off-diagonal") {
    const HessianField h = hessian_field(sample_potential([](const Point& x) { return x[0] * x[1]; }, g));
    for (std::size_t k = 0; k < h.matrices.size(); ++k)
      if (h.interior[k]) CHECK(h.matrices[k](0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("random quadratics in 3-D are node independent") {
    std::mt19937_64 rng(11);
    const SymMatrix a = random_symmetric(rng, 3);
    const HessianField h = hessian_field(sample_potential(quadratic(a), GridSpec::ball(3, 0.25)));
    for (std::size_t k = 0; k < h.matrices.size(); ++k)
      if (h.interior[k]) CHECK(max_entry_diff(h.matrices[k], a) < 1e-11);
  }
}

TEST_CASE("hessian interior is the full-stencil set and matrices are symmetric") {
  for (int dim : {2, 3}) {
    const PotentialField u = sample_potential(quarter_quartic, GridSpec::ball(dim, 0.125));
    const HessianField h = hessian_field(u);
    const Mask inner = erode(u.grid, u.mask, 1);
    for (std::size_t k = 0; k < h.matrices.size(); ++k) {
      CHECK(static_cast<bool>(h.interior[k]) == stencil_inside(u.grid, u.mask, k));
      if (!h.interior[k]) continue;
      CHECK(u.mask[k]);
      // In 2-D the stencil reaches all eight neighbours.
      if (dim == 2) CHECK(inner[k]);
      CHECK(h.matrices[k].asymmetry() < 1e-12);
    }
  }
}

TEST_CASE("hessian of a tiny domain is rejected") {
  GridSpec g = GridSpec::ball(2, 0.5);
  PotentialField u = sample_potential(isotropic(1.0), g);
  std::fill(u.mask.begin(), u.mask.end(), 0);
  u.mask[g.flat({2, 2, 0})] = 1;
  u.mask[g.flat({2, 3, 0})] = 1;
  CHECK_THROWS_AS(hessian_field(u), DomainTooSmall);
}

TEST_CASE("quartic hessian converges at second order") {
  std::vector<double> point_err, max_err;
  for (int n : {16, 32, 64}) {
    const GridSpec g = GridSpec::ball(2, 1.0 / n);
    const HessianField h = hessian_field(sample_potential(quarter_quartic, g));
    const std::size_t k = node_at(g, {0.5, 0.0, 0.0});
    REQUIRE(h.interior[k]);
    point_err.push_back(max_entry_diff(h.matrices[k], quartic_hessian(g.coords(k), 2)));
    double m = 0.0;
    for (std::size_t q = 0; q < h.matrices.size(); ++q)
      if (h.interior[q]) m = std::max(m, max_entry_diff(h.matrices[q], quartic_hessian(g.coords(q), 2)));
    max_err.push_back(m);
  }
  for (int i = 0; i + 1 < 3; ++i) {
    CHECK(std::log2(point_err[i] / point_err[i + 1]) >= 1.8);
    CHECK(max_err[i] / max_err[i + 1] >= 3.5);
  }
}

TEST_CASE("eigen_decompose") {
  SUBCASE("identity and diagonal") {
    for (int n : {2, 3}) {
      const Spectrum s = eigen_decompose(SymMatrix::identity(n));
      for (int i = 0; i < n; ++i) CHECK(s[i] == doctest::Approx(1.0));
    }
    const Spectrum d = eigen_decompose(SymMatrix::diagonal(2, {1.0 / 3, 3.0, 0.0}));
    CHECK(d[0] == doctest::Approx(3.0));
    CHECK(d[1] == doctest::Approx(1.0 / 3));
  }
  SUBCASE("random 3x3 against characteristic polynomial roots") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
      const SymMatrix m = random_symmetric(rng, 3);
      const Spectrum s = eigen_decompose(m);
      const std::vector<double> r = charpoly_roots(m);
      REQUIRE(r.size() == 3);
      for (int i = 0; i < 3; ++i) CHECK(std::abs(s[i] - r[i]) < 1e-9);
      CHECK(s[0] >= s[1]);
      CHECK(s[1] >= s[2]);
    }
  }
  SUBCASE("invariant under orthogonal conjugation") {
    std::mt19937_64 rng(5);
    for (int n : {2, 3})
      for (int t = 0; t < 20; ++t) {
        const SymMatrix m = random_symmetric(rng, n);
        const Spectrum a = eigen_decompose(m);
        const Spectrum b = eigen_decompose(conjugate(random_orthogonal(rng, n), m));
        for (int i = 0; i < n; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-9);
      }
  }
  SUBCASE("eigen_system vectors diagonalise") {
    std::mt19937_64 rng(9);
    const SymMatrix m = random_symmetric(rng, 3);
    const EigenSystem es = eigen_system(m);
    const SymMatrix d = es.vectors.transpose() * m * es.vectors;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(std::abs(d(i, j) - (i == j ? es.spectrum[i] : 0.0)) < 1e-10);
  }
}

TEST_CASE("osc") {
  const GridSpec g = GridSpec::ball(2, 1.0 / 16);
  PotentialField c = sample_potential([](const Point&) { return 2.5; }, g);
  CHECK(osc(c) == 0.0);
  const PotentialField q = sample_potential(isotropic(1.0), g);
  CHECK(std::abs(osc(q) - 0.5) <= g.spacing);
  const PotentialField a = sample_potential(quadratic(SymMatrix::diagonal(2, {3.0, 1.0, 0.0})), g);
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (a.mask[k]) {
      lo = std::min(lo, a.values[k]);
      hi = std::max(hi, a.values[k]);
    }
  CHECK(osc(a) == hi - lo);
  PotentialField shifted = a;
  for (double& v : shifted.values) v += 0.75;
  CHECK(std::abs(osc(shifted) - osc(a)) <= 4 * std::numeric_limits<double>::epsilon() * hi);
}

TEST_CASE("semiconvexity_modulus") {
  const GridSpec g = GridSpec::ball(2, 1.0 / 32);
  CHECK(semiconvexity_modulus(sample_potential(isotropic(1.0), g)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(semiconvexity_modulus(sample_potential(quadratic(SymMatrix::diagonal(2, {1.0, -0.5, 0.0})), g)) ==
        doctest::Approx(-0.5).epsilon(1e-9));
  const double h = g.spacing;
  const double m = semiconvexity_modulus(sample_potential(quarter_quartic, g));
  CHECK(std::abs(m) <= 4 * h * h);
}

TEST_CASE("directional convexity accepts piecewise affine data") {
  const PotentialField u = sample_potential([](const Point& x) { return std::max(x[0], x[1]); }, GridSpec::ball(2, 1.0 / 16));
  CHECK(directional_convexity(u).modulus >= -1e-12);
  CHECK(semiconvexity_modulus(u) < 0.0);
}

TEST_CASE("centered gradient is exact on quadratics") {
  const GridSpec g = GridSpec::ball(2, 1.0 / 8);
  const GradientField gr = centered_gradient(sample_potential(quadratic(SymMatrix::diagonal(2, {2.0, 0.5, 0.0})), g));
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!gr.defined[k]) continue;
    const Point x = g.coords(k);
    CHECK(gr.gradients[k][0] == doctest::Approx(2.0 * x[0]).epsilon(1e-12));
    CHECK(gr.gradients[k][1] == doctest::Approx(0.5 * x[1]).epsilon(1e-12));
  }
}
