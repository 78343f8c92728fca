#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "slag/grid.hpp"
#include "slag/report.hpp"

namespace slag {

/// Grid in slope (gradient) space. Uses GridSpec with `ball_radius == 0`.
using SlopeGrid = GridSpec;

/// Slope grid covering the range of first differences between adjacent
/// masked nodes, widened by `margin_cells` on each side. Node coordinates
/// are integer multiples of the spacing (which defaults to f's spacing), so
/// a lattice-aligned source and slope grid share nodes.
SlopeGrid auto_slope_grid(const PotentialField& f, double spacing = 0.0, int margin_cells = 2);

/// Throws NotConvexError (naming the worst node) when the directional
/// second differences of f drop below -tol. tol < 0 selects a round-off
/// scaled default.
void require_convex(const PotentialField& f, double tol = -1.0);

/// Discrete conjugate together with the source node attaining each sup.
struct Conjugate {
  PotentialField values;            // f* on the slope grid, mask all true
  std::vector<std::size_t> argmax;  // flat source-node index per slope node
};

/// f*(y) = max over masked nodes x of (y.x - f(x)); O(N*M) reference.
Conjugate conjugate_brute_argmax(const PotentialField& f, const SlopeGrid& slopes, bool check_convex = true);
PotentialField conjugate_brute(const PotentialField& f, const SlopeGrid& slopes);

/// Same sup, evaluated axis by axis with a linear-time one-dimensional
/// transform over the lower convex hull of each line of samples.
Conjugate conjugate_fast_argmax(const PotentialField& f, const SlopeGrid& slopes, bool check_convex = true);
PotentialField conjugate_fast(const PotentialField& f, const SlopeGrid& slopes);

/// Discrete subdifferential: slope nodes whose Fenchel gap
/// f(a) + f*(y) - y.a is within `tolerance`.
struct SlopeSet {
  int dim = 2;
  Point anchor{};
  std::size_t anchor_node = 0;
  std::vector<Point> members;
  double tolerance = 0.0;
  double min_gap = 0.0;  // smallest gap over the slope grid
};

/// Default tolerance: the smallest gap attained on the slope grid plus half
/// a squared slope cell, which keeps the set non-empty and one cell wide
/// around a smooth gradient.
SlopeSet subdifferential(const PotentialField& f, std::size_t node, std::optional<double> tolerance = std::nullopt);
SlopeSet subdifferential(const PotentialField& f, const Point& a, std::optional<double> tolerance = std::nullopt);
/// Reuses an already computed conjugate of f.
SlopeSet subdifferential(const PotentialField& f, const PotentialField& fstar, std::size_t node,
                         std::optional<double> tolerance = std::nullopt);

/// Slope-space domain mask (the image of the open domain under the
/// subdifferential).
struct DomainMask {
  SlopeGrid slope_grid;
  Mask inside;

  std::size_t count() const noexcept;
};

/// inside(y) iff the sup defining f*(y) is attained at a masked node that
/// is not on the mask rim (all face neighbours masked).
DomainMask slope_domain(const PotentialField& f, std::optional<SlopeGrid> slopes = std::nullopt);
DomainMask slope_domain_from(const PotentialField& f, const Conjugate& conj);

/// Masked nodes with at least one face neighbour outside the mask.
Mask rim_nodes(const PotentialField& f);

/// Symmetric Hausdorff distance between two point sets.
double hausdorff(std::span<const Point> a, std::span<const Point> b, int dim);

/// Nodes whose one-cell stencil straddles a crease: some neighbour offset d
/// has (f(a+d) + f(a-d) - 2 f(a)) / |d| > `jump`. Nodes without a full
/// stencil are never flagged.
Mask crease_nodes(const PotentialField& f, double jump);

/// Sum rule for Q = kappa/2 |x|^2: at each sample node, the Hausdorff
/// distance between subdifferential(v+Q) and subdifferential(v) + kappa*a
/// must be at most two slope cells plus `tol`. Samples within two cells of
/// the mask rim, and samples in crease_nodes(v, limit), are reported as notes,
/// not asserted: the discrete subdifferential of v+Q at a node next to a
/// crease takes in slopes of the facet across it.
AuditReport check_sum_rule(const PotentialField& v, double kappa, std::span<const std::size_t> samples,
                           double tol = 0.0);

/// Slope increase: for each sample a, the slope domain contains every slope
/// node within s_delta*(R - h - h*sqrt(n)/2 - |a|) - 2 cells of every
/// subdifferential member. Off-rim nodes fill the ball of radius R - h, and a
/// slope is maximised at a node up to half a cell diagonal from its preimage.
AuditReport check_slope_increase(const PotentialField& f, double s_delta, std::span<const std::size_t> samples);

}  // namespace slag
