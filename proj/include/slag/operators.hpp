#pragma once

#include <string>

#include "slag/hessian.hpp"
#include "slag/linalg.hpp"
#include "slag/report.hpp"

namespace slag {

enum class Variant { SLAG, MA, MAR };

std::string to_string(Variant v);
/// Accepts "slag", "ma", "mar" (any case); throws ConfigError otherwise.
Variant parse_variant(const std::string& text);

struct ProblemSpec {
  int dim = 2;
  double theta = 0.0;
  Variant variant = Variant::SLAG;
  double phi = 0.0;

  /// Throws PreconditionError when dim is not 2 or 3, or (for SLAG) when
  /// |theta| >= dim*pi/2.
  void validate() const;
};

/// Σ arctan λ_i(M).
double phase_sum(const Spectrum& s) noexcept;
double phase_sum(const SymMatrix& m);

/// Σ arctan λ_i − Θ on Hessian-interior nodes (the mask of the result).
ScalarField slag_residual(const HessianField& h, double theta);

/// Residual plus the nodes where the operator is undefined. Flagged nodes
/// are left out of the residual mask.
struct FlaggedResidual {
  ScalarField residual;
  AuditReport flags;
};

/// Σ ln λ_i − Φ; nodes with some λ_i <= 0 are flagged.
FlaggedResidual ma_residual(const HessianField& h, double phi);

/// Σ ln((1 + λ_i)/(1 − λ_i)) − Φ; nodes with some |λ_i| >= 1 are flagged.
FlaggedResidual mar_residual(const HessianField& h, double phi);

/// (I + M²)⁻¹: the derivative of Σ arctan λ_i at M in direction E is
/// trace((I + M²)⁻¹ E).
SymMatrix slag_linearization(const SymMatrix& m);

enum class Phase { Subcritical, Critical, Supercritical };

std::string to_string(Phase p);

/// Supercritical when |Θ| > (n − 2)π/2, critical when equal to within
/// 1e-12. Throws PreconditionError ("infeasible phase") when |Θ| >= nπ/2.
Phase phase_classify(double theta, int dim);

}  // namespace slag
