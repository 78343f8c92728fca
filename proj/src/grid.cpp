#include "slag/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include <fmt/core.h>

#include "slag/error.hpp"

namespace slag {

void GridSpec::validate() const {
  if (dim != 2 && dim != 3) throw PreconditionError(fmt::format("grid dim must be 2 or 3, got {}", dim));
  for (int a = 0; a < dim; ++a)
    if (shape[a] < 3) throw PreconditionError(fmt::format("grid axis {} has {} nodes (need >= 3)", a, shape[a]));
  for (int a = dim; a < kMaxDim; ++a)
    if (shape[a] != 1) throw PreconditionError("unused grid axes must have extent 1");
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw PreconditionError("grid spacing must be positive");
  if (ball_radius < 0.0) throw PreconditionError("ball_radius must be non-negative");
  if (ball_radius > 0.0) {
    const double slack = 1e-9 * spacing;
    for (int a = 0; a < dim; ++a) {
      const double lo = origin[a];
      const double hi = origin[a] + (shape[a] - 1) * spacing;
      if (lo > -ball_radius + slack || hi < ball_radius - slack)
        throw PreconditionError(fmt::format("grid box does not contain the ball of radius {} along axis {}",
                                            ball_radius, a));
    }
  }
}

GridSpec GridSpec::ball(int dim, double h, double radius, int pad) {
  GridSpec g;
  g.dim = dim;
  g.spacing = h;
  g.ball_radius = radius;
  const int half = static_cast<int>(std::ceil(radius / h - 1e-9)) + pad;
  for (int a = 0; a < kMaxDim; ++a) {
    g.shape[a] = a < dim ? 2 * half + 1 : 1;
    g.origin[a] = a < dim ? -half * h : 0.0;
  }
  g.validate();
  return g;
}

std::size_t PotentialField::masked_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
}

double norm(const Point& p, int dim) noexcept { return std::sqrt(dot(p, p, dim)); }

double dot(const Point& a, const Point& b, int dim) noexcept {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += a[i] * b[i];
  return s;
}

PotentialField sample_potential(const Formula& formula, const GridSpec& grid) {
  grid.validate();
  PotentialField u;
  u.grid = grid;
  u.values.resize(grid.size());
  u.mask.resize(grid.size());
  const double r2 = grid.ball_radius * grid.ball_radius * (1.0 + 1e-12);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Point x = grid.coords(k);
    u.values[k] = formula(x);
    u.mask[k] = dot(x, x, grid.dim) <= r2 ? 1 : 0;
    if (u.mask[k] && !std::isfinite(u.values[k]))
      throw DomainError(fmt::format("formula is not finite at masked node {}", k), k);
  }
  return u;
}

double osc(const PotentialField& u) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t k = 0; k < u.values.size(); ++k) {
    if (!u.mask[k]) continue;
    lo = std::min(lo, u.values[k]);
    hi = std::max(hi, u.values[k]);
  }
  if (lo > hi) throw PreconditionError("osc of an empty mask");
  return hi - lo;
}

std::size_t component_count(const GridSpec& grid, std::span<const std::uint8_t> mask) {
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::size_t components = 0;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || seen[start]) continue;
    ++components;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      const Index idx = grid.unflat(k);
      for (int a = 0; a < grid.dim; ++a) {
        for (int sgn : {-1, 1}) {
          Index n = idx;
          n[a] += sgn;
          if (!grid.contains(n)) continue;
          const std::size_t m = grid.flat(n);
          if (mask[m] && !seen[m]) {
            seen[m] = 1;
            stack.push_back(m);
          }
        }
      }
    }
  }
  return components;
}

void for_each_neighbour_offset(int dim, const std::function<void(const Index&)>& fn) {
  const int zr = dim == 3 ? 1 : 0;
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j)
      for (int l = -zr; l <= zr; ++l) {
        if (i == 0 && j == 0 && l == 0) continue;
        fn(Index{i, j, l});
      }
}

namespace {

Mask morph_step(const GridSpec& grid, std::span<const std::uint8_t> mask, bool grow) {
  Mask out(mask.begin(), mask.end());
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (grow == static_cast<bool>(mask[k])) continue;
    const Index idx = grid.unflat(k);
    bool hit = false;
    for_each_neighbour_offset(grid.dim, [&](const Index& o) {
      if (hit) return;
      const Index n{idx[0] + o[0], idx[1] + o[1], idx[2] + o[2]};
      if (!grid.contains(n)) {
        if (!grow) hit = true;
        return;
      }
      if (grow ? mask[grid.flat(n)] != 0 : mask[grid.flat(n)] == 0) hit = true;
    });
    if (hit) out[k] = grow ? 1 : 0;
  }
  return out;
}

}  // namespace

Mask erode(const GridSpec& grid, std::span<const std::uint8_t> mask, int cells) {
  Mask cur(mask.begin(), mask.end());
  for (int i = 0; i < cells; ++i) cur = morph_step(grid, cur, false);
  return cur;
}

Mask dilate(const GridSpec& grid, std::span<const std::uint8_t> mask, int cells) {
  Mask cur(mask.begin(), mask.end());
  for (int i = 0; i < cells; ++i) cur = morph_step(grid, cur, true);
  return cur;
}

void validate_field(const PotentialField& u) {
  u.grid.validate();
  if (u.values.size() != u.grid.size() || u.mask.size() != u.grid.size())
    throw PreconditionError("field storage does not match its grid");
  std::size_t count = 0;
  for (std::size_t k = 0; k < u.values.size(); ++k) {
    if (!u.mask[k]) continue;
    ++count;
    if (!std::isfinite(u.values[k])) throw DomainError(fmt::format("non-finite value at masked node {}", k), k);
  }
  if (count == 0) throw PreconditionError("field mask is empty");
  if (component_count(u.grid, u.mask) != 1) throw PreconditionError("field mask is not connected");
}

}  // namespace slag
