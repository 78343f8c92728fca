#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "slag/audit.hpp"
#include "slag/error.hpp"
#include "slag/solver.hpp"
#include "support.hpp"

using namespace slag;
using namespace slagtest;

namespace {

constexpr double kPi = std::numbers::pi;

PotentialField ball_field(const Formula& f, int n, double h) { return sample_potential(f, GridSpec::ball(n, h)); }

// Hessian field of a quadratic with every matrix replaced by `m`.
HessianField constant_field(const SymMatrix& m, double h = 0.125) {
  HessianField hf = hessian_field(ball_field(isotropic(1.0), m.dim(), h));
  for (std::size_t k = 0; k < hf.matrices.size(); ++k)
    if (hf.interior[k]) hf.matrices[k] = m;
  return hf;
}

// Eigenvalues of a symmetric 2x2 matrix, largest first.
std::array<double, 2> eig2(double a, double b, double c) {
  const double mean = 0.5 * (a + c);
  const double rad = std::hypot(0.5 * (a - c), b);
  return {mean + rad, mean - rad};
}

// Second differences of a 2-D field at node k, from values only.
std::array<double, 3> fd_hessian2(const PotentialField& f, std::size_t k) {
  const GridSpec& g = f.grid;
  const auto sx = g.stride(0), sy = g.stride(1);
  const double h2 = g.spacing * g.spacing;
  const auto v = [&](std::ptrdiff_t off) { return f.values[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(k) + off)]; };
  const double uxx = (v(sx) - 2 * v(0) + v(-sx)) / h2;
  const double uyy = (v(sy) - 2 * v(0) + v(-sy)) / h2;
  const double uxy = (v(sx + sy) - v(sx - sy) - v(sy - sx) + v(-sx - sy)) / (4 * h2);
  return {uxx, uxy, uyy};
}

double masked_max_dev(const ScalarField& f, double target) {
  double dev = 0.0;
  for (std::size_t k = 0; k < f.grid.size(); ++k)
    if (f.mask[k]) dev = std::max(dev, std::abs(f.values[k] - target));
  return dev;
}

Spectrum spectrum(std::initializer_list<double> l) {
  Spectrum s;
  s.dim = static_cast<int>(l.size());
  std::copy(l.begin(), l.end(), s.values.begin());
  return s;
}

double coefficient(const std::vector<Coefficient>& cs, const std::string& family, int i, int j, int k) {
  for (const Coefficient& c : cs)
    if (c.family == family && c.i == i && c.j == j && c.k == k) return c.value;
  return NAN;
}

}  // namespace

TEST_CASE("supersolution examples") {
  const AuditReport eq = check_supersolution(ball_field(isotropic(1.0), 2, 1.0 / 16), kPi / 2);
  CHECK(eq.passed);
  CHECK(eq.checked_nodes > 0);
  CHECK(eq.min_margin == doctest::Approx(0.0).epsilon(1e-9));

  const AuditReport strict = check_supersolution(ball_field(isotropic(3.0), 2, 1.0 / 16), kPi / 2);
  CHECK_FALSE(strict.passed);
  CHECK(strict.violations.size() == strict.checked_nodes);
  CHECK(std::is_sorted(strict.violations.begin(), strict.violations.end(),
                       [](const Violation& a, const Violation& b) { return a.node < b.node; }));
}

TEST_CASE("subsolution examples") {
  CHECK(check_subsolution(ball_field(isotropic(1.0), 2, 1.0 / 16), kPi / 2).passed);

  const Formula tilt = [](const Point& x) {
    const double q = 0.5 * (x[0] * x[0] + x[1] * x[1]);
    return std::max(q, q + 0.1 * (x[0] - 0.3));
  };
  // The slope jump 0.1 registers as a kink once 0.1/h clears the threshold.
  const AuditReport kinked = check_subsolution(ball_field(tilt, 2, 1.0 / 64), kPi / 2);
  CHECK(kinked.passed);
  CHECK(kinked.metrics.at("kink_skipped") > 0);

  const AuditReport weak = check_subsolution(ball_field(isotropic(0.5), 2, 1.0 / 16), kPi / 2);
  CHECK_FALSE(weak.passed);
  CHECK(weak.violations.size() == weak.checked_nodes);
}

TEST_CASE("jet check configuration is validated") {
  const PotentialField u = ball_field(isotropic(1.0), 2, 0.125);
  JetCheckConfig cfg;
  cfg.tolerance = 0.0;
  CHECK_THROWS_AS(check_supersolution(u, 0.0, cfg), ConfigError);
  cfg = {};
  cfg.rim_exclusion = -1;
  CHECK_THROWS_AS(check_subsolution(u, 0.0, cfg), ConfigError);
}

TEST_CASE("passing both jet checks pins the phase to the tolerance") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 2;
    const SymMatrix b = random_symmetric(rng, n, -1.0, 1.0);
    const SymMatrix a = b * b.transpose() + SymMatrix::identity(n) * 0.1;
    const PotentialField u = ball_field(quadratic(a), n, 0.125);
    const double theta = phase_sum(a);
    JetCheckConfig cfg;
    cfg.tolerance = 1e-6;
    CHECK(check_supersolution(u, theta, cfg).passed);
    CHECK(check_subsolution(u, theta, cfg).passed);
    CHECK_FALSE(check_supersolution(u, theta - 2e-6, cfg).passed);
    CHECK_FALSE(check_subsolution(u, theta + 2e-6, cfg).passed);
  }
}

TEST_CASE("rotation preserves supersolutions") {
  const double h = 1.0 / 16;
  const AuditReport half = check_rotation_preserves_supersolution(ball_field(isotropic(1.0), 2, h), kPi / 2, kPi / 4, 0.5);
  CHECK(half.passed);
  CHECK(half.min_margin == doctest::Approx(0.0).epsilon(1e-6));

  const AuditReport zero = check_rotation_preserves_supersolution(ball_field(isotropic(0.0), 2, h), 0.0, kPi / 4, 1.0);
  CHECK(zero.passed);
  CHECK(zero.min_margin == doctest::Approx(0.0).epsilon(1e-6));

  const PotentialField q = ball_field(quartic_plus_half(), 2, h);
  const HessianField hf = hessian_field(q);
  double theta = -INFINITY;
  for (std::size_t k = 0; k < hf.matrices.size(); ++k)
    if (hf.interior[k]) theta = std::max(theta, phase_sum(hf.matrices[k]));
  JetCheckConfig cfg;
  cfg.tolerance = h * h;
  const AuditReport quart = check_rotation_preserves_supersolution(q, theta, kPi / 4, 0.5, cfg);
  CHECK(quart.passed);
  CHECK(quart.checked_nodes > 0);

  CHECK_THROWS_AS(check_rotation_preserves_supersolution(ball_field(isotropic(3.0), 2, h), kPi / 2, kPi / 4, 0.5),
                  PreconditionError);
}

TEST_CASE("rotation preserves convex subsolutions") {
  const double h = 1.0 / 32;
  const double theta = 2 * std::atan(3.0);
  const AuditReport k3 =
      check_rotation_preserves_subsolution(ball_field(isotropic(3.0), 2, h), theta, kPi / 4, {2 * h, 4 * h});
  CHECK(k3.passed);
  CHECK(k3.min_margin == doctest::Approx(0.0).epsilon(1e-6));

  const AuditReport half =
      check_rotation_preserves_subsolution(ball_field(isotropic(1.0), 2, h), kPi / 2, kPi / 4, {4 * h});
  CHECK(half.passed);
  // Mollifying ½|x|² only adds a constant, so the rotated Hessian stays 0.
  CHECK(half.min_margin == doctest::Approx(0.0).epsilon(1e-6));

  // Both quadratics have Σ arctan = 2 arctan 2 > π/2.
  const Formula two = [](const Point& x) {
    const double a = (x[0] - 0.2) * (x[0] - 0.2) + x[1] * x[1];
    const double b = (x[0] + 0.2) * (x[0] + 0.2) + x[1] * x[1];
    return std::max(a, b);
  };
  const AuditReport crease =
      check_rotation_preserves_subsolution(ball_field(two, 2, h), kPi / 2, kPi / 4, {2 * h, 4 * h, 8 * h});
  CHECK(crease.passed);
  CHECK(crease.checked_nodes > 0);

  CHECK_THROWS_AS(
      check_rotation_preserves_subsolution(ball_field(isotropic(0.5), 2, h), kPi / 2, kPi / 4, {2 * h}),
      PreconditionError);
}

TEST_CASE("induced metric examples") {
  const MetricField zero = induced_metric(constant_field(SymMatrix(2)));
  const MetricField pm = induced_metric(constant_field(SymMatrix::diagonal(2, {1.0, -1.0, 0.0})));
  for (std::size_t k = 0; k < zero.matrices.size(); ++k) {
    if (!zero.interior[k]) continue;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) {
        CHECK(zero.matrices[k](r, c) == (r == c ? 1.0 : 0.0));
        CHECK(pm.matrices[k](r, c) == (r == c ? 2.0 : 0.0));
      }
  }
}

TEST_CASE("induced metric eigenvalues are 1 + λ²") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 2;
    const SymMatrix m = random_symmetric(rng, n, -3.0, 3.0);
    const Spectrum s = eigen_decompose(m);
    const MetricField g = induced_metric(constant_field(m, 0.25));
    const std::size_t k = node_at(g.grid, {0.0, 0.0, 0.0});
    REQUIRE(g.interior[k]);
    const Spectrum gs = eigen_decompose(g.matrices[k]);
    std::array<double, 3> want{};
    for (int i = 0; i < n; ++i) want[i] = 1.0 + s[i] * s[i];
    std::sort(want.begin(), want.begin() + n, std::greater<>());
    for (int i = 0; i < n; ++i) CHECK(gs[i] == doctest::Approx(want[i]).epsilon(1e-9));
    CHECK(gs.min() >= 1.0 - 1e-12);
  }
}

TEST_CASE("Laplace-Beltrami examples") {
  for (int n : {2, 3}) {
    const double h = n == 2 ? 1.0 / 16 : 1.0 / 8;
    const MetricField flat = induced_metric(constant_field(SymMatrix(n), h));
    const ScalarField lap = laplace_beltrami(ball_field(isotropic(1.0), n, h), flat);
    CHECK(lap.masked_count() > 0);
    CHECK(masked_max_dev(lap, n) <= 4 * h * h);

    const Formula affine = [](const Point& x) { return 0.3 + 1.2 * x[0] - 0.7 * x[1] + 0.4 * x[2]; };
    CHECK(masked_max_dev(laplace_beltrami(ball_field(affine, n, h), flat), 0.0) <= 1e-12);

    const double c = 2.5;
    MetricField conformal = flat;
    for (auto& m : conformal.matrices) m = SymMatrix::identity(n) * c;
    CHECK(masked_max_dev(laplace_beltrami(ball_field(isotropic(1.0), n, h), conformal), n / c) <= 4 * h * h);
  }
}

TEST_CASE("Laplace-Beltrami is second order against a curved metric") {
  // g = I + M² for M = D²(½|x|² + ¼|x|⁴); f = |x|². Reference from a
  // four-times finer grid.
  const auto run = [](double h) {
    const PotentialField u = ball_field(quartic_plus_half(), 2, h);
    const ScalarField lap = laplace_beltrami(ball_field(isotropic(2.0), 2, h), induced_metric(hessian_field(u)));
    return lap.values[node_at(lap.grid, {0.25, 0.25, 0.0})];
  };
  const double ref = run(1.0 / 128);
  const double e1 = std::abs(run(1.0 / 16) - ref), e2 = std::abs(run(1.0 / 32) - ref);
  CHECK(std::log2(e1 / e2) > 1.5);
}

TEST_CASE("Laplace-Beltrami rejects an indefinite metric") {
  MetricField g = induced_metric(constant_field(SymMatrix(2)));
  const std::size_t k = node_at(g.grid, {0.0, 0.0, 0.0});
  g.matrices[k] = SymMatrix::diagonal(2, {1.0, -1.0, 0.0});
  CHECK_THROWS_AS(laplace_beltrami(ball_field(isotropic(1.0), 2, 0.125), g), DomainError);
  MetricField other = induced_metric(constant_field(SymMatrix(2), 0.25));
  CHECK_THROWS_AS(laplace_beltrami(ball_field(isotropic(1.0), 2, 0.125), other), PreconditionError);
}

TEST_CASE("b_m examples") {
  const PotentialField tilt = ball_field(quadratic(SymMatrix::diagonal(2, {1.0, 0.0, 0.0})), 2, 1.0 / 16);
  const FlaggedResidual b1 = bm_field(tilt, 1);
  CHECK(b1.flags.passed);
  CHECK(b1.residual.masked_count() > 0);
  CHECK(masked_max_dev(b1.residual, std::log(std::sqrt(2.0))) <= 1e-9);

  for (int n : {2, 3}) {
    const FlaggedResidual b0 = bm_field(ball_field(isotropic(0.0), n, 0.125), n);
    CHECK(masked_max_dev(b0.residual, 0.0) == 0.0);
  }
  CHECK_THROWS_AS(bm_field(tilt, 3), PreconditionError);
  CHECK_THROWS_AS(bm_field(tilt, 0), PreconditionError);

  // Isotropic Hessian has no gap at m = 1: every node is flagged.
  const FlaggedResidual flat = bm_field(ball_field(isotropic(1.0), 2, 0.125), 1);
  CHECK_FALSE(flat.flags.passed);
  CHECK(flat.residual.masked_count() == 0);
}

TEST_CASE("b_m matches a direct eigenvalue computation on a rotated quartic") {
  const RotatedPotential v = rotate(ball_field(quartic_plus_half(), 2, 1.0 / 32), RotationParams::from_angle(kPi / 4));
  const FlaggedResidual b = bm_field(v, 1, 0.0);
  std::vector<std::size_t> nodes;
  for (std::size_t k = 0; k < b.residual.grid.size(); ++k)
    if (b.residual.mask[k]) nodes.push_back(k);
  REQUIRE(nodes.size() > 5);
  std::mt19937_64 rng(41);
  std::shuffle(nodes.begin(), nodes.end(), rng);
  for (int t = 0; t < 5; ++t) {
    const std::size_t k = nodes[t];
    const auto d = fd_hessian2(v.field, k);
    const double top = eig2(d[0], d[1], d[2])[0];
    CHECK(std::abs(b.residual.values[k] - std::log(std::sqrt(1 + top * top))) <= 1e-9);
  }
}

TEST_CASE("coefficient audit examples") {
  const Spectrum edge = spectrum({1.0, 1.0, -1.0});
  const std::vector<Coefficient> cs = coefficient_values(edge, 2);
  CHECK(coefficient(cs, "iik:i,k<=m", 1, 0, 2) == doctest::Approx(6.0));
  CHECK(coefficient(cs, "iik:k<=m<i", 3, 0, 1) == doctest::Approx(0.0));
  const AuditReport r = coefficient_audit(edge, 2);
  CHECK(r.passed);
  CHECK(r.min_margin == doctest::Approx(0.0));

  // Direct evaluation at (0.95, 0.9, -0.5), m = 2.
  const double a = 0.95, b = 0.9, c = -0.5;
  const std::vector<Coefficient> vs = coefficient_values(spectrum({a, b, c}), 2);
  CHECK(coefficient(vs, "kkk", 1, 0, 1) == doctest::Approx(1 + a * a));
  CHECK(coefficient(vs, "iik:i,k<=m", 2, 0, 1) == doctest::Approx(3 + b * b + 2 * b * a));
  CHECK(coefficient(vs, "iik:k<=m<i", 3, 0, 2) == doctest::Approx(2 * b * (1 + b * c) / (b - c)));
  CHECK(coefficient(vs, "iik:i<=m<k", 1, 0, 3) ==
        doctest::Approx((a - c + a * a * (2 + a * a + a * c)) / (a - c)));
  CHECK(coefficient(vs, "ijk:i<j<=m<k", 1, 2, 3) ==
        doctest::Approx(2 * (1 + a * b + a * (1 + a * c) / (a - c) + b * (1 + b * c) / (b - c))));
  for (const Coefficient& co : vs) CHECK(co.value >= 0.0);
  CHECK(coefficient_audit(spectrum({a, b, c}), 2).passed);

  const std::vector<Coefficient> one = coefficient_values(spectrum({0.9, 0.2, -0.4}), 1);
  CHECK(coefficient(one, "ijk:i<=m<j<k", 1, 2, 3) ==
        doctest::Approx(2 * 0.9 * ((1 + 0.9 * 0.2) / (0.9 - 0.2) + (1 - 0.2 * 0.4) / (0.2 + 0.4))));
}

TEST_CASE("coefficient audit enforces the ordering hypothesis") {
  CHECK_THROWS_AS(coefficient_audit(spectrum({1.2, 0.5}), 1), PreconditionError);
  CHECK_THROWS_AS(coefficient_audit(spectrum({0.9, 0.9, 0.1}), 2 - 1), PreconditionError);
  CHECK_THROWS_AS(coefficient_audit(spectrum({0.5, 0.9}), 1), PreconditionError);
  CHECK_THROWS_AS(coefficient_audit(spectrum({0.9, -1.5}), 1), PreconditionError);
  CHECK_THROWS_AS(coefficient_audit(spectrum({0.9, 0.5}), 3), PreconditionError);
  CHECK(coefficient_hypothesis(spectrum({1.0, 0.3, -1.0}), 1));
}

TEST_CASE("coefficient sweep has no negatives under the hypothesis and some without it") {
  const SweepResult ok = coefficient_sweep(100000, 7, false);
  CHECK(ok.tuples > 90000);
  CHECK(ok.negatives == 0);
  CHECK(ok.min_value >= 0.0);
  const SweepResult ctl = coefficient_sweep(10000, 7, true);
  CHECK(ctl.negatives > 0);
  CHECK(ctl.worst[0] > 1.0);
}

TEST_CASE("subharmonicity of b_m on constant Hessians") {
  const PotentialField q = ball_field(quadratic(SymMatrix::diagonal(2, {0.8, -0.3, 0.0})), 2, 1.0 / 16);
  const AuditReport r = subharmonicity_trial(q);
  CHECK(r.passed);
  CHECK(r.checked_nodes > 0);
  CHECK(std::abs(r.metrics.at("min_laplace_beltrami")) <= 1e-9);

  SubharmonicityConfig above;
  const AuditReport none = subharmonicity_trial(ball_field(isotropic(1.5), 2, 1.0 / 16), above);
  CHECK_FALSE(none.passed);
  CHECK(none.violations.front().quantity == "hypothesis never satisfied");
}

TEST_CASE("subharmonicity trial on a rotated quartic near the centre") {
  // The continuum Δ_ḡ b_1 is non-negative for source radius below 0.82;
  // the trial runs on sources inside radius 0.6 with slack h.
  const Formula inner = [](const Point& x) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    return 0.5 * r2 + 0.25 * r2 * r2;
  };
  for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    const PotentialField u = sample_potential(inner, GridSpec::ball(2, h, 0.6));
    const RotatedPotential v = rotate(u, RotationParams::from_angle(kPi / 4));
    SubharmonicityConfig cfg;
    cfg.gap_tol = 0.0;
    cfg.c_slack = 1.0;
    const AuditReport r = subharmonicity_trial(v, u, cfg);
    CHECK(r.checked_nodes > 0);
    CHECK(r.passed);
  }
}

TEST_CASE("Hessian bound harness examples") {
  const double h = 1.0 / 32;
  const AuditReport k5 = hessian_bound_harness(ball_field(isotropic(5.0), 2, h));
  CHECK(k5.passed);
  CHECK(k5.metrics.at("max_rotated_eigenvalue") == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  CHECK(k5.metrics.at("touching_lambda") <= k5.metrics.at("touching_bound") + 1e-9);

  const AuditReport half = hessian_bound_harness(ball_field(isotropic(1.0), 2, h));
  CHECK(half.passed);
  CHECK(std::abs(half.metrics.at("max_rotated_eigenvalue")) <= 1e-6);
  CHECK(half.metrics.at("osc") == doctest::Approx(0.5));
}

TEST_CASE("audit reports serialise with the stable schema") {
  const nlohmann::json j = to_json(check_supersolution(ball_field(isotropic(3.0), 2, 0.125), kPi / 2));
  for (const char* key : {"checked_nodes", "violations", "min_margin", "passed"}) CHECK(j.contains(key));
  CHECK(j["passed"] == false);
  CHECK(j["violations"][0].contains("node"));
}
