#pragma once

#include <cstdint>
#include <vector>

#include "slag/grid.hpp"
#include "slag/linalg.hpp"

namespace slag {

struct LocalJet {
  double value = 0.0;
  Point grad{0.0, 0.0, 0.0};
  SymMatrix hess;
};

/// Tensor-product Lagrange interpolation with `nodes` points per axis
/// (degree nodes - 1) on patches lying entirely inside the mask. Reproduces
/// polynomials of that degree in each variable exactly.
class PatchInterpolant {
 public:
  static constexpr int kMaxNodes = 8;

  explicit PatchInterpolant(const PotentialField& f, int nodes = 6);

  int nodes() const noexcept { return nodes_; }

  /// Lower corner of a fully masked patch whose node span contains x or
  /// misses it by at most one cell, preferring the patch centred on x.
  /// Returns false when none exists.
  bool select(const Point& x, Index& start) const;

  LocalJet eval(const Index& start, const Point& x) const;

 private:
  bool box_masked(const Index& lo) const;

  const PotentialField* f_;
  int nodes_;
  std::vector<std::uint32_t> sat_;  // summed-area table of the mask, padded by one
  Index sat_shape_{};
};

}  // namespace slag
