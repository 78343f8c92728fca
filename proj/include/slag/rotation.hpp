#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "slag/fenchel.hpp"
#include "slag/hessian.hpp"
#include "slag/linalg.hpp"

namespace slag {

struct RotationParams {
  double alpha = 0.0;
  double c = 1.0;
  double s = 0.0;

  /// Throws PreconditionError unless 0 < alpha < pi/2.
  static RotationParams from_angle(double alpha);
  double cot() const noexcept { return c / s; }
};

/// Potential of the rotated gradient graph on x̄ coordinates. `field.mask`
/// equals `domain.inside`; values outside it are stored but meaningless.
struct RotatedPotential {
  PotentialField field;
  DomainMask domain;
  RotationParams params;
  double delta = 0.0;
  std::string source_id;
  /// Source node attaining the discrete sup at each slope node.
  std::vector<std::size_t> source_node;
  /// Continuous maximiser x* after polishing (the node itself otherwise).
  std::vector<Point> source_point;
  /// 1 where the conjugate value was refined off the lattice.
  Mask polished;
};

struct RotateOptions {
  /// Semiconvexity margin; unset selects cot(alpha).
  std::optional<double> delta;
  /// Slope spacing; 0 keeps the source spacing.
  double slope_spacing = 0.0;
  /// Refine each conjugate value by a Newton solve on a local degree-5
  /// interpolant of the transformed potential. Slopes maximised near a
  /// kink of the transformed potential keep the lattice value.
  bool polish = true;
  /// Slack on the semiconvexity precondition; < 0 selects a round-off
  /// scaled default.
  double tol = -1.0;
};

/// ū(x̄) = (c/2s)|x̄|² − (1/s) ũ*(x̄) with ũ = s·u + (c/2)|x|². Throws
/// NotConvexError ("insufficient semiconvexity") unless every directional
/// second difference of u is at least −(cot α − δ) − tol.
RotatedPotential rotate(const PotentialField& u, const RotationParams& params, const RotateOptions& opt = {});

/// Discrete gradient map x̄ = c·x + s·Du at nodes with centred differences.
GradientField gradient_map(const PotentialField& u, const RotationParams& params);

/// λ̄ = tan(arctan λ − α) = (cλ − s)/(c + sλ), sorted descending. Throws
/// DomainError when some λ <= −cot α.
Spectrum rotate_spectrum(const Spectrum& spec, const RotationParams& params);

/// Scalar form of rotate_spectrum.
double rotate_eigenvalue(double lambda, const RotationParams& params);

/// Reverse rotation through rotate_{−α}(v) = −rotate_α(−v). Throws
/// PreconditionError ("slope saturates cot α") when some second difference
/// of v reaches cot α − tol.
PotentialField unrotate(const RotatedPotential& v, const RotateOptions& opt = {});
PotentialField unrotate(const PotentialField& v, const RotationParams& params, const RotateOptions& opt = {});

}  // namespace slag
