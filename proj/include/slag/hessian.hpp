#pragma once

#include <cstddef>
#include <vector>

#include "slag/grid.hpp"
#include "slag/linalg.hpp"

namespace slag {

/// Finite-difference Hessians on nodes whose full second-difference stencil
/// (±e_i and ±e_i±e_j, scaled by `step`) lies inside the mask.
struct HessianField {
  GridSpec grid;
  int step = 1;
  std::vector<SymMatrix> matrices;
  Mask interior;

  std::size_t interior_count() const noexcept;
};

/// True when every node of the second-difference stencil around `k` (with
/// offsets scaled by `step`) is in the box and in `mask`.
bool stencil_inside(const GridSpec& grid, std::span<const std::uint8_t> mask, std::size_t k, int step = 1);

/// Centred second differences (u(x+he_i) - 2u(x) + u(x-he_i))/h^2 on the
/// diagonal and the four-point cross stencil off the diagonal; exact on
/// quadratics. `step` > 1 uses the coarser spacing step*h on the same
/// nodes. Throws DomainTooSmall when no node has a full stencil.
HessianField hessian_field(const PotentialField& u, int step = 1);

/// Per-node descending spectra of `h` (entries outside the interior are
/// left default-constructed).
std::vector<Spectrum> spectra(const HessianField& h);

/// Minimum over interior nodes of the smallest Hessian eigenvalue.
double semiconvexity_modulus(const PotentialField& u);

struct ConvexityProbe {
  double modulus;          // min second difference per unit length^2
  std::size_t worst_node;  // node attaining it
};

/// Minimum over interior nodes and lattice directions d in {e_i, e_i ± e_j}
/// of the three-point second difference along d divided by |d|^2 h^2.
/// Every convex grid function has a non-negative value, including
/// piecewise-affine ones whose cross-stencil Hessian can be indefinite.
ConvexityProbe directional_convexity(const PotentialField& u);

/// Centred first differences on nodes whose ±e_i neighbours are masked.
struct GradientField {
  std::vector<Point> gradients;
  Mask defined;
};
GradientField centered_gradient(const PotentialField& u);

/// Nodes where the largest (from_above) or smallest Hessian eigenvalue
/// jumps by more than `threshold` between spacings h and 2h.
Mask kink_nodes(const PotentialField& u, double threshold, bool from_above);

}  // namespace slag
