#pragma once

#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "slag/hessian.hpp"
#include "slag/operators.hpp"
#include "slag/report.hpp"
#include "slag/rotation.hpp"

namespace slag {

struct JetCheckConfig {
  double tolerance = 1e-6;
  int rim_exclusion = 2;
  /// A node is a kink (no test function touches there) when the extreme
  /// Hessian eigenvalue at spacing h exceeds the one at 2h by more than
  /// this amount.
  double kink_threshold = 1.0;

  void validate() const;
};

/// Σ arctan λ_i(D²u) <= Θ + tolerance wherever a jet from below exists.
/// `skip` (optional, same grid) removes further nodes from the check.
AuditReport check_supersolution(const PotentialField& u, double theta, const JetCheckConfig& cfg = {},
                                const Mask* skip = nullptr);

/// Σ arctan λ_i(D²u) >= Θ − tolerance wherever a jet from above exists.
AuditReport check_subsolution(const PotentialField& u, double theta, const JetCheckConfig& cfg = {},
                              const Mask* skip = nullptr);

/// Rotates u (margin δ) and checks the rotated field as a supersolution
/// with phase Θ − nα. Throws PreconditionError when u itself fails the
/// supersolution check.
AuditReport check_rotation_preserves_supersolution(const PotentialField& u, double theta, double alpha, double delta,
                                                   const JetCheckConfig& cfg = {});

/// Mollify-rotate-check pipeline: the un-mollified rotation and each
/// mollified one must be subsolutions with phase Θ − nα away from the
/// images of creases, and sup|ū_ε − ū| must decrease with ε.
AuditReport check_rotation_preserves_subsolution(const PotentialField& u, double theta, double alpha,
                                                 const std::vector<double>& eps_list, const JetCheckConfig& cfg = {});

/// Per-node I + M².
struct MetricField {
  GridSpec grid;
  std::vector<SymMatrix> matrices;
  Mask interior;
};
MetricField induced_metric(const HessianField& h);

/// (1/√det g) ∂_i(√det g g^{ij} ∂_j f) in divergence form: half-point
/// averages on the diagonal, centred differences for the cross terms.
/// Defined where f and g are available on the whole stencil. Throws
/// DomainError naming a node where g is not positive definite.
ScalarField laplace_beltrami(const ScalarField& f, const MetricField& g);

/// b_m = (1/m) Σ_{i<=m} ln √(1 + λ_i²) over the top m Hessian eigenvalues;
/// nodes with λ_m − λ_{m+1} < gap_tol are flagged and left unmasked.
/// gap_tol < 0 selects 10h.
FlaggedResidual bm_field(const PotentialField& v, int m, double gap_tol = -1.0);
FlaggedResidual bm_field(const RotatedPotential& v, int m, double gap_tol = -1.0);

/// One coefficient of the h²_{ijk} expansion (1-based indices; unused ones
/// are 0).
struct Coefficient {
  std::string family;
  int i = 0, j = 0, k = 0;
  double value = 0.0;
};

/// Every coefficient family evaluated at the spectrum, without checking
/// the ordering hypothesis.
std::vector<Coefficient> coefficient_values(const Spectrum& lambdas, int m);

/// Whether 1 >= λ_1 >= … >= λ_m > λ_{m+1} >= … >= λ_n >= −1.
bool coefficient_hypothesis(const Spectrum& lambdas, int m);

/// Evaluates the coefficients and reports negatives; throws
/// PreconditionError when the ordering hypothesis fails.
AuditReport coefficient_audit(const Spectrum& lambdas, int m);

struct SweepResult {
  std::size_t tuples = 0;
  std::size_t negatives = 0;
  double min_value = std::numeric_limits<double>::infinity();
  Spectrum worst;
  int worst_m = 0;
};

/// Random tuples with n ∈ {2, 3}, m ∈ {1..n−1}. The hypothesis sweep draws
/// the top m eigenvalues in [0.8, 1] and the rest in [−1, λ_m); the control
/// sweep draws λ_1 in (1, 2] and the rest in [−1, λ_1) in order.
SweepResult coefficient_sweep(std::size_t count, std::uint64_t seed, bool control);

struct SubharmonicityConfig {
  int m = 1;
  double gap_tol = -1.0;  // < 0 selects 10h
  int rim_exclusion = 2;
  /// Nodes with Δ_ḡ b_m < −c_slack·h are violations (infinite: report only).
  double c_slack = std::numeric_limits<double>::infinity();
};

/// Δ_ḡ b_m on the nodes where λ̄_1 <= 1 and the spectral gap hypothesis
/// hold. Metrics: min_laplace_beltrami, c_fit = max(0, −min)/h,
/// submask_nodes.
AuditReport subharmonicity_trial(const PotentialField& v, const SubharmonicityConfig& cfg = {});
/// Same trial restricted to source_interior(v, source, cfg.rim_exclusion).
AuditReport subharmonicity_trial(const RotatedPotential& v, const PotentialField& source,
                                 const SubharmonicityConfig& cfg = {});

/// Slope nodes of the rotated domain whose continuous source point lies
/// within `cells` of the source mask rim are dropped; so are their slope
/// grid neighbours.
Mask source_interior(const RotatedPotential& v, const PotentialField& source, int cells);

struct HarnessConfig {
  double alpha = std::numbers::pi / 4;
  double gap_margin = 1e-3;
  /// Radius inside which the touching quadratic is forced to touch.
  double touch_radius = 0.5;
  double tolerance = 1e-6;
  int rim_exclusion = 2;
};

/// Touching-quadratic and strict-gap measurements for a convex solution.
AuditReport hessian_bound_harness(const PotentialField& u, const HarnessConfig& cfg = {});

}  // namespace slag
