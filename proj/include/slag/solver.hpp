#pragma once

#include <string>
#include <vector>

#include "slag/grid.hpp"
#include "slag/operators.hpp"
#include "slag/report.hpp"

namespace slag {

struct SolverConfig {
  int max_iters = 50;
  double residual_tol = 1e-10;
  double damping = 1.0;
  double min_step = 1.0 / 1024;
  double convexity_floor = -1e-6;
  /// Flag iterates whose smallest Hessian eigenvalue drops below the floor.
  bool require_convex = false;

  /// Throws ConfigError when the fields violate their ranges.
  void validate() const;
};

struct SolveReport {
  int iterations = 0;
  double start_rhs = 0.0;  // constant right-hand side of the Poisson start
  double initial_residual = 0.0;
  double final_residual = 0.0;
  std::vector<double> residual_history;  // max-norm, starting with the initial guess
  std::vector<double> step_history;      // accepted step factors
  std::vector<double> min_eigen_history;
  bool converged = false;
  bool convexity_breach = false;
  std::string message;
};

nlohmann::json to_json(const SolveReport& r);

struct SolveResult {
  PotentialField field;
  SolveReport report;
};

/// Damped Newton for Σ arctan λ_i(D²u) = Θ on the Hessian-interior nodes of
/// `boundary`'s mask; the remaining masked nodes keep `boundary`'s values.
/// The start is the Poisson solution of Δu = c with the same data, c chosen
/// to minimise the starting residual (c = n·tan(Θ/n) unless that is beaten).
SolveResult solve_dirichlet(const PotentialField& boundary, const ProblemSpec& spec, const SolverConfig& cfg = {});
SolveResult solve_dirichlet(const Formula& g, const ProblemSpec& spec, const GridSpec& grid,
                            const SolverConfig& cfg = {});

/// Poisson problem Δu = rhs on the same unknowns (the Newton start).
PotentialField solve_poisson(const PotentialField& boundary, double rhs);

struct MollifierSpec {
  double epsilon = 0.0;
};

/// Normalised weights of the radial bump exp(−1/(1 − (r/ε)²)) on the
/// lattice offsets with |offset| < ε.
struct MollifierStencil {
  std::vector<Index> offsets;
  std::vector<double> weights;
};
MollifierStencil mollifier_stencil(const MollifierSpec& m, const GridSpec& grid);

struct MollifyResult {
  PotentialField field;
  std::size_t dropped = 0;  // masked nodes whose stencil left the mask
  std::string warning;
};

/// Discrete convolution; the output mask keeps the nodes whose whole stencil
/// is masked. Throws PreconditionError when ε < 2h.
MollifyResult mollify(const PotentialField& u, const MollifierSpec& m);

/// Extends a convex field to `target` (same spacing, lattice-aligned
/// origin): original values on the original mask, and outside it the
/// maximum of supporting planes taken at nodes near the mask rim. The output
/// mask is the ball of target.ball_radius (the whole box when it is 0).
PotentialField extend_convex(const PotentialField& u, const GridSpec& target);

struct JetCheckConfig;

/// Mollifies u at each ε and reruns the subsolution check on the result.
AuditReport subsolution_preservation_trial(const PotentialField& u, double theta, const std::vector<double>& eps_list,
                                           const JetCheckConfig& cfg);

/// x ↦ f² g(x/f): the domain-scaling device used with f = 1.2.
Formula scaled_formula(const Formula& g, double factor);

}  // namespace slag
