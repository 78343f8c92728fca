#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace slag {

inline constexpr int kMaxDim = 3;

using Index = std::array<int, kMaxDim>;
using Point = std::array<double, kMaxDim>;
using Mask = std::vector<std::uint8_t>;

/// Uniform box grid. Axes beyond `dim` have extent 1, so flat indexing is
/// always three-dimensional and row-major (last axis fastest).
///
/// `ball_radius` is the radius of the masked ball domain centred at the
/// coordinate origin; slope-space grids carry `ball_radius == 0`, meaning
/// "no ball", and the containment check is skipped for them.
struct GridSpec {
  int dim = 2;
  Index shape{1, 1, 1};
  double spacing = 0.0;
  Point origin{0.0, 0.0, 0.0};
  double ball_radius = 1.0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
  }

  std::size_t flat(const Index& idx) const noexcept {
    return (static_cast<std::size_t>(idx[0]) * shape[1] + idx[1]) * shape[2] + idx[2];
  }

  Index unflat(std::size_t k) const noexcept {
    Index idx{0, 0, 0};
    idx[2] = static_cast<int>(k % shape[2]);
    k /= shape[2];
    idx[1] = static_cast<int>(k % shape[1]);
    idx[0] = static_cast<int>(k / shape[1]);
    return idx;
  }

  /// Flat-index offset of one step along `axis`.
  std::ptrdiff_t stride(int axis) const noexcept {
    if (axis == 0) return static_cast<std::ptrdiff_t>(shape[1]) * shape[2];
    if (axis == 1) return shape[2];
    return 1;
  }

  double coord(int axis, int i) const noexcept { return origin[axis] + i * spacing; }

  Point coords(std::size_t k) const noexcept {
    const Index idx = unflat(k);
    Point p{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a) p[a] = coord(a, idx[a]);
    return p;
  }

  bool contains(const Index& idx) const noexcept {
    for (int a = 0; a < kMaxDim; ++a)
      if (idx[a] < 0 || idx[a] >= shape[a]) return false;
    return true;
  }

  /// Throws PreconditionError when the grid violates its invariants.
  void validate() const;

  bool operator==(const GridSpec&) const = default;

  /// Centred grid covering [-R - pad*h, R + pad*h]^dim with a node at the
  /// origin and `ceil(R/h)` nodes per half-axis inside the ball.
  static GridSpec ball(int dim, double h, double radius = 1.0, int pad = 0);
};

/// Scalar samples on a grid plus the domain mask (true = inside domain).
/// Values outside the mask may be present but carry no meaning.
struct PotentialField {
  GridSpec grid;
  std::vector<double> values;
  Mask mask;
  std::string value_kind = "potential";

  std::size_t masked_count() const noexcept;
  bool inside(std::size_t k) const noexcept { return mask[k] != 0; }
};

/// Per-node scalar outputs (residuals, b_m, Laplace-Beltrami, ...) reuse the
/// field layout.
using ScalarField = PotentialField;

using Formula = std::function<double(const Point&)>;

double norm(const Point& p, int dim) noexcept;
double dot(const Point& a, const Point& b, int dim) noexcept;

/// Evaluates `formula` on every node; the mask is the closed ball of radius
/// `grid.ball_radius`. Throws DomainError naming the node when a masked
/// value is not finite.
PotentialField sample_potential(const Formula& formula, const GridSpec& grid);

/// Max minus min over masked nodes.
double osc(const PotentialField& u);

/// Number of face-connected components of `mask`.
std::size_t component_count(const GridSpec& grid, std::span<const std::uint8_t> mask);

/// Removes `cells` layers of nodes that touch the complement through any of
/// the 3^dim neighbours (or the box edge).
Mask erode(const GridSpec& grid, std::span<const std::uint8_t> mask, int cells);

/// Adds `cells` layers of 3^dim neighbours.
Mask dilate(const GridSpec& grid, std::span<const std::uint8_t> mask, int cells);

/// Calls `fn(offset)` for each of the 3^dim - 1 neighbour offsets.
void for_each_neighbour_offset(int dim, const std::function<void(const Index&)>& fn);

/// Checks the PotentialField invariants (sizes, finite masked values,
/// non-empty connected mask).
void validate_field(const PotentialField& u);

}  // namespace slag
