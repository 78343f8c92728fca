#include "slag/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Sparse>
#include <boost/math/tools/minima.hpp>
#include <Eigen/SparseLU>
#include <fmt/core.h>

#include "slag/audit.hpp"
#include "slag/error.hpp"
#include "slag/hessian.hpp"

namespace slag {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Unknown numbering over Hessian-interior nodes.
struct Layout {
  std::vector<int> id;  // node -> unknown index or -1
  std::vector<std::size_t> nodes;
};

Layout make_layout(const PotentialField& u) {
  Layout l;
  l.id.assign(u.grid.size(), -1);
  for (std::size_t k = 0; k < u.grid.size(); ++k)
    if (stencil_inside(u.grid, u.mask, k)) {
      l.id[k] = static_cast<int>(l.nodes.size());
      l.nodes.push_back(k);
    }
  if (l.nodes.empty()) throw DomainTooSmall("solver: no node has a full Hessian stencil");
  return l;
}

SymMatrix node_hessian(const PotentialField& u, std::size_t k) {
  const GridSpec& g = u.grid;
  const auto& v = u.values;
  const double ih2 = 1.0 / (g.spacing * g.spacing);
  SymMatrix m(g.dim);
  for (int i = 0; i < g.dim; ++i) {
    const std::ptrdiff_t si = g.stride(i);
    m(i, i) = (v[k + si] - 2.0 * v[k] + v[k - si]) * ih2;
    for (int j = i + 1; j < g.dim; ++j) {
      const std::ptrdiff_t sj = g.stride(j);
      const double c = (v[k + si + sj] - v[k + si - sj] - v[k - si + sj] + v[k - si - sj]) * 0.25 * ih2;
      m(i, j) = c;
      m(j, i) = c;
    }
  }
  return m;
}

struct Residual {
  Eigen::VectorXd f;
  double max_norm = 0.0;
  double min_eigen = 0.0;
};

Residual residual(const PotentialField& u, const Layout& l, double theta) {
  Residual r;
  r.f.resize(static_cast<Eigen::Index>(l.nodes.size()));
  r.min_eigen = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < l.nodes.size(); ++i) {
    const Spectrum s = eigen_decompose(node_hessian(u, l.nodes[i]));
    r.f[static_cast<Eigen::Index>(i)] = phase_sum(s) - theta;
    r.min_eigen = std::min(r.min_eigen, s.min());
  }
  r.max_norm = r.f.lpNorm<Eigen::Infinity>();
  return r;
}

// Adds coef * d(stencil entry)/d(u at node k + offset) to row `row`.
void add_entry(std::vector<Triplet>& t, const Layout& l, int row, std::size_t node, double coef) {
  const int col = l.id[node];
  if (col >= 0) t.emplace_back(row, col, coef);
}

// Row of J: sum over Hessian entries (i,j) of A_ij * dM_ij/du. Dirichlet
// nodes carry no column.
void assemble_row(std::vector<Triplet>& t, const PotentialField& u, const Layout& l, int row, const SymMatrix& a) {
  const GridSpec& g = u.grid;
  const std::size_t k = l.nodes[row];
  const double ih2 = 1.0 / (g.spacing * g.spacing);
  for (int i = 0; i < g.dim; ++i) {
    const std::ptrdiff_t si = g.stride(i);
    const double d = a(i, i) * ih2;
    add_entry(t, l, row, k + si, d);
    add_entry(t, l, row, k - si, d);
    add_entry(t, l, row, k, -2.0 * d);
    for (int j = i + 1; j < g.dim; ++j) {
      const std::ptrdiff_t sj = g.stride(j);
      const double c = 2.0 * a(i, j) * 0.25 * ih2;
      add_entry(t, l, row, k + si + sj, c);
      add_entry(t, l, row, k + si - sj, -c);
      add_entry(t, l, row, k - si + sj, -c);
      add_entry(t, l, row, k - si - sj, c);
    }
  }
}

Eigen::VectorXd sparse_solve(const SpMat& a, const Eigen::VectorXd& b) {
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw InternalError("sparse factorisation failed: " + lu.lastErrorMessage());
  Eigen::VectorXd x = lu.solve(b);
  if (lu.info() != Eigen::Success) throw InternalError("sparse solve failed");
  return x;
}

void require_finite_boundary(const PotentialField& b, const Layout& l) {
  for (std::size_t k = 0; k < b.values.size(); ++k)
    if (b.mask[k] && l.id[k] < 0 && !std::isfinite(b.values[k]))
      throw DomainError(fmt::format("boundary value at node {} is not finite", k), k);
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iters < 0) throw ConfigError("max_iters must be non-negative");
  if (!(residual_tol > 0.0)) throw ConfigError("residual_tol must be positive");
  if (!(min_step > 0.0 && min_step <= damping && damping <= 1.0))
    throw ConfigError("need 0 < min_step <= damping <= 1");
}

nlohmann::json to_json(const SolveReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["iterations"] = r.iterations;
  j["start_rhs"] = num(r.start_rhs);
  j["initial_residual"] = num(r.initial_residual);
  j["final_residual"] = num(r.final_residual);
  j["converged"] = r.converged;
  j["step_history"] = r.step_history;
  j["min_eigen_history"] = nlohmann::json::array();
  for (double v : r.min_eigen_history) j["min_eigen_history"].push_back(num(v));
  j["residual_history"] = nlohmann::json::array();
  for (double v : r.residual_history) j["residual_history"].push_back(num(v));
  j["convexity_breach"] = r.convexity_breach;
  j["message"] = r.message;
  return j;
}

PotentialField solve_poisson(const PotentialField& boundary, double rhs) {
  const Layout l = make_layout(boundary);
  require_finite_boundary(boundary, l);
  const GridSpec& g = boundary.grid;
  const double ih2 = 1.0 / (g.spacing * g.spacing);
  std::vector<Triplet> t;
  Eigen::VectorXd b = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(l.nodes.size()), rhs);
  for (std::size_t r = 0; r < l.nodes.size(); ++r) {
    const std::size_t k = l.nodes[r];
    const int row = static_cast<int>(r);
    t.emplace_back(row, row, -2.0 * g.dim * ih2);
    for (int i = 0; i < g.dim; ++i)
      for (std::ptrdiff_t off : {g.stride(i), -g.stride(i)}) {
        const std::size_t nb = k + off;
        if (l.id[nb] >= 0)
          t.emplace_back(row, l.id[nb], ih2);
        else
          b[row] -= boundary.values[nb] * ih2;
      }
  }
  SpMat a(static_cast<Eigen::Index>(l.nodes.size()), static_cast<Eigen::Index>(l.nodes.size()));
  a.setFromTriplets(t.begin(), t.end());
  const Eigen::VectorXd x = sparse_solve(a, b);
  PotentialField u = boundary;
  for (std::size_t r = 0; r < l.nodes.size(); ++r) u.values[l.nodes[r]] = x[static_cast<Eigen::Index>(r)];
  return u;
}

SolveResult solve_dirichlet(const PotentialField& boundary, const ProblemSpec& spec, const SolverConfig& cfg) {
  spec.validate();
  cfg.validate();
  if (spec.variant != Variant::SLAG) throw PreconditionError("solve_dirichlet handles the slag variant only");
  if (spec.dim != boundary.grid.dim) throw PreconditionError("problem dim differs from the grid dim");
  const Layout l = make_layout(boundary);
  const int n = spec.dim;

  SolveResult out;
  SolveReport& rep = out.report;
  // Newton start: the Poisson solution is affine in its constant right-hand
  // side c, u(c) = u0 + c * (u1 - u0). Take the c with the smallest residual
  // norm, searched around n tan(Theta/n) and never worse than it.
  const PotentialField u0 = solve_poisson(boundary, 0.0);
  const PotentialField u1 = solve_poisson(boundary, 1.0);
  auto start = [&](double c) {
    PotentialField u = u0;
    for (std::size_t k : l.nodes) u.values[k] += c * (u1.values[k] - u0.values[k]);
    return u;
  };
  auto start_norm = [&](double c) { return residual(start(c), l, spec.theta).f.norm(); };
  const double c0 = n * std::tan(spec.theta / n);
  const double reach = std::max(1.0, std::abs(c0));
  std::uintmax_t evals = 60;
  const auto [c_best, norm_best] = boost::math::tools::brent_find_minima(start_norm, c0 - reach, c0 + reach, 30, evals);
  rep.start_rhs = norm_best < start_norm(c0) ? c_best : c0;
  PotentialField u = start(rep.start_rhs);
  Residual res = residual(u, l, spec.theta);
  rep.initial_residual = res.max_norm;
  rep.residual_history.push_back(res.max_norm);
  rep.min_eigen_history.push_back(res.min_eigen);
  auto note_convexity = [&](double m) {
    if (cfg.require_convex && m < cfg.convexity_floor) rep.convexity_breach = true;
  };
  note_convexity(res.min_eigen);

  const auto nu = static_cast<Eigen::Index>(l.nodes.size());
  while (res.max_norm > cfg.residual_tol && rep.iterations < cfg.max_iters) {
    std::vector<Triplet> t;
    t.reserve(l.nodes.size() * (n == 2 ? 9 : 19));
    for (std::size_t r = 0; r < l.nodes.size(); ++r)
      assemble_row(t, u, l, static_cast<int>(r), slag_linearization(node_hessian(u, l.nodes[r])));
    SpMat jac(nu, nu);
    jac.setFromTriplets(t.begin(), t.end());
    const Eigen::VectorXd delta = sparse_solve(jac, -res.f);

    double step = cfg.damping;
    bool accepted = false;
    PotentialField trial = u;
    Residual tres;
    while (step >= cfg.min_step) {
      for (std::size_t r = 0; r < l.nodes.size(); ++r)
        trial.values[l.nodes[r]] = u.values[l.nodes[r]] + step * delta[static_cast<Eigen::Index>(r)];
      tres = residual(trial, l, spec.theta);
      if (tres.max_norm < res.max_norm) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++rep.iterations;
    if (!accepted) {
      rep.message = fmt::format("step factor fell below {} at iteration {}", cfg.min_step, rep.iterations);
      break;
    }
    u = std::move(trial);
    res = std::move(tres);
    rep.step_history.push_back(step);
    rep.residual_history.push_back(res.max_norm);
    rep.min_eigen_history.push_back(res.min_eigen);
    note_convexity(res.min_eigen);
  }
  rep.final_residual = res.max_norm;
  rep.converged = res.max_norm <= cfg.residual_tol;
  if (!rep.converged && rep.message.empty())
    rep.message = fmt::format("no convergence after {} iterations", rep.iterations);
  if (rep.convexity_breach) rep.message += (rep.message.empty() ? "" : "; ") + std::string("convexity floor breached");
  out.field = std::move(u);
  return out;
}

SolveResult solve_dirichlet(const Formula& g, const ProblemSpec& spec, const GridSpec& grid, const SolverConfig& cfg) {
  return solve_dirichlet(sample_potential(g, grid), spec, cfg);
}

MollifierStencil mollifier_stencil(const MollifierSpec& m, const GridSpec& grid) {
  const double h = grid.spacing;
  if (!(m.epsilon >= 2.0 * h * (1.0 - 1e-12)))
    throw PreconditionError(fmt::format("mollifier radius {} is below 2h = {}", m.epsilon, 2.0 * h));
  MollifierStencil st;
  const int reach = static_cast<int>(std::ceil(m.epsilon / h));
  const int r2 = grid.dim == 3 ? reach : 0;
  double total = 0.0;
  for (int i = -reach; i <= reach; ++i)
    for (int j = -reach; j <= reach; ++j)
      for (int k = -r2; k <= r2; ++k) {
        const double r = h * std::sqrt(static_cast<double>(i * i + j * j + k * k)) / m.epsilon;
        if (r >= 1.0) continue;
        const double w = std::exp(-1.0 / (1.0 - r * r));
        st.offsets.push_back({i, j, k});
        st.weights.push_back(w);
        total += w;
      }
  for (double& w : st.weights) w /= total;
  return st;
}

MollifyResult mollify(const PotentialField& u, const MollifierSpec& m) {
  const GridSpec& g = u.grid;
  const MollifierStencil st = mollifier_stencil(m, g);
  MollifyResult out;
  out.field = u;
  out.field.mask.assign(g.size(), 0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!u.mask[k]) continue;
    const Index idx = g.unflat(k);
    double acc = 0.0;
    bool covered = true;
    for (std::size_t s = 0; s < st.offsets.size(); ++s) {
      const Index& o = st.offsets[s];
      const Index p{idx[0] + o[0], idx[1] + o[1], idx[2] + o[2]};
      if (!g.contains(p) || !u.mask[g.flat(p)]) {
        covered = false;
        break;
      }
      acc += st.weights[s] * u.values[g.flat(p)];
    }
    if (!covered) {
      ++out.dropped;
      continue;
    }
    out.field.values[k] = acc;
    out.field.mask[k] = 1;
  }
  if (out.dropped > 0)
    out.warning = fmt::format("mollifier stencil left the mask at {} nodes; output mask shrunk", out.dropped);
  if (out.dropped == u.masked_count()) throw DomainTooSmall("mollified field has an empty mask");
  return out;
}

PotentialField extend_convex(const PotentialField& u, const GridSpec& target) {
  const GridSpec& g = u.grid;
  target.validate();
  if (target.dim != g.dim || std::abs(target.spacing - g.spacing) > 1e-12 * g.spacing)
    throw PreconditionError("extend_convex: target grid must share dim and spacing");
  Index shift{0, 0, 0};
  for (int a = 0; a < g.dim; ++a) {
    const double t = (g.origin[a] - target.origin[a]) / g.spacing;
    shift[a] = static_cast<int>(std::lround(t));
    if (std::abs(t - shift[a]) > 1e-9) throw PreconditionError("extend_convex: target grid is not lattice aligned");
  }
  const int n = g.dim;
  std::vector<std::size_t> masked;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (u.mask[k]) masked.push_back(k);
  if (masked.empty()) throw PreconditionError("extend_convex: empty mask");
  // Planes from nodes within three cells of the rim; interior planes never
  // attain the maximum outside a convex mask.
  const Mask deep = erode(g, u.mask, 3);
  const double h = g.spacing;
  double scale = 1.0;
  for (std::size_t k : masked) scale = std::max(scale, std::abs(u.values[k]));
  // A supporting plane lies under every sample. Difference slopes miss by
  // O(h^4) on smooth data and by O(h) when they mix facets of a crease, so
  // planes lowered by more than h^3 are not supporting and are dropped.
  const double support_tol = h * h * h * scale;
  auto value_at = [&](Index idx, int axis, int step, double& out) {
    idx[axis] += step;
    if (!g.contains(idx) || !u.mask[g.flat(idx)]) return false;
    out = u.values[g.flat(idx)];
    return true;
  };
  auto lowering = [&](const Point& p, std::size_t k, const std::vector<std::size_t>& over) {
    const Point xk = g.coords(k);
    double gap = 0.0;
    for (std::size_t j : over) {
      const Point xj = g.coords(j);
      double lin = u.values[k];
      for (int a = 0; a < n; ++a) lin += p[a] * (xj[a] - xk[a]);
      gap = std::max(gap, lin - u.values[j]);
    }
    return gap;
  };
  // Samples within support_tol of the lowered plane when they span a
  // full-dimensional patch (the plane is a facet of the data), else 0.
  struct Touch {
    std::size_t count = 0;
    bool facet = false;
  };
  auto touching = [&](const Point& p, std::size_t k, double gap, const std::vector<std::size_t>& over) {
    const Point xk = g.coords(k);
    const Index ik = g.unflat(k);
    Touch t;
    SymMatrix gram(n);
    for (std::size_t j : over) {
      const Point xj = g.coords(j);
      double lin = u.values[k] - gap;
      for (int a = 0; a < n; ++a) lin += p[a] * (xj[a] - xk[a]);
      if (u.values[j] - lin > support_tol) continue;
      ++t.count;
      const Index ij = g.unflat(j);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) gram(a, b) += double(ij[a] - ik[a]) * double(ij[b] - ik[b]);
    }
    // Integer offsets: a rank-deficient Gram matrix has a zero eigenvalue.
    // Lattice samples of smooth data have one-cell hull facets, so a facet
    // of the data must also cover more than a cell.
    t.facet = t.count >= std::size_t(2 * n + 2) && eigen_decompose(gram).min() > 0.5;
    if (!t.facet) t.count = 0;
    return t;
  };
  // Slope candidates along one axis, most accurate first: centred,
  // second-order one-sided, one-sided.
  auto own_slopes = [&](const Index& idx, int a) {
    std::vector<double> out;
    const double u0 = u.values[g.flat(idx)];
    double f1 = 0.0, f2 = 0.0, b1 = 0.0, b2 = 0.0;
    const bool hf1 = value_at(idx, a, 1, f1), hb1 = value_at(idx, a, -1, b1);
    const bool hf2 = hf1 && value_at(idx, a, 2, f2), hb2 = hb1 && value_at(idx, a, -2, b2);
    if (hf1 && hb1) out.push_back((f1 - b1) / (2 * h));
    if (hf2) out.push_back((-3 * u0 + 4 * f1 - f2) / (2 * h));
    if (hb2) out.push_back((3 * u0 - 4 * b1 + b2) / (2 * h));
    if (hf1) out.push_back((f1 - u0) / h);
    if (hb1) out.push_back((u0 - b1) / h);
    return out;
  };
  struct Plane {
    Point p;
    double b;  // value at the origin
    std::size_t node;
    bool facet;
  };
  std::vector<Plane> planes;
  std::size_t dropped = 0;
  for (std::size_t k : masked) {
    if (deep[k]) continue;
    const Index idx = g.unflat(k);
    std::array<std::vector<double>, kMaxDim> axis_slopes;
    for (int a = 0; a < n; ++a) {
      axis_slopes[a] = own_slopes(idx, a);
      if (!axis_slopes[a].empty()) continue;
      // No neighbour along a: carry the slope in from nodes along another
      // axis, extrapolated linearly when two are available.
      for (int b = 0; b < n; ++b)
        for (int sgn : {-1, 1}) {
          if (b == a) continue;
          Index i1 = idx, i2 = idx;
          i1[b] += sgn;
          i2[b] += 2 * sgn;
          if (!g.contains(i1) || !u.mask[g.flat(i1)]) continue;
          const std::vector<double> c1 = own_slopes(i1, a);
          if (c1.empty()) continue;
          const std::vector<double> c2 =
              g.contains(i2) && u.mask[g.flat(i2)] ? own_slopes(i2, a) : std::vector<double>{};
          if (!c2.empty()) axis_slopes[a].push_back(2 * c1[0] - c2[0]);
          axis_slopes[a].push_back(c1[0]);
        }
    }
    if (std::any_of(axis_slopes.begin(), axis_slopes.begin() + n, [](const auto& v) { return v.empty(); })) {
      ++dropped;
      continue;
    }
    // Pick the candidate that best supports the samples within two cells,
    // then lower it against every sample. Near a crease or on the rim a
    // whole cone of slopes supports the lattice data, and the tie rule
    // decides what the plane does outside the mask: planes touching more
    // samples (a facet rather than a slope mixed across a crease) win, then
    // the more accurate stencils.
    std::vector<std::size_t> near;
    const int r2 = n == 3 ? 2 : 0;
    for (int di = -2; di <= 2; ++di)
      for (int dj = -2; dj <= 2; ++dj)
        for (int dk = -r2; dk <= r2; ++dk) {
          const Index q{idx[0] + di, idx[1] + dj, idx[2] + dk};
          if (g.contains(q) && u.mask[g.flat(q)]) near.push_back(g.flat(q));
        }
    Point best{0.0, 0.0, 0.0};
    double best_gap = std::numeric_limits<double>::infinity();
    Touch best_touch;
    std::size_t best_rank = 0;
    const std::size_t s0 = axis_slopes[0].size(), s1 = n > 1 ? axis_slopes[1].size() : 1,
                      s2 = n > 2 ? axis_slopes[2].size() : 1;
    for (std::size_t a = 0; a < s0; ++a)
      for (std::size_t b = 0; b < s1; ++b)
        for (std::size_t c = 0; c < s2; ++c) {
          const Point p{axis_slopes[0][a], n > 1 ? axis_slopes[1][b] : 0.0, n > 2 ? axis_slopes[2][c] : 0.0};
          const double gap = lowering(p, k, near);
          const Touch touch = touching(p, k, gap, near);
          const std::size_t rank = a + b + c;
          const bool better =
              gap < best_gap - support_tol ||
              (gap <= best_gap + support_tol &&
               (touch.count > best_touch.count || (touch.count == best_touch.count && rank < best_rank)));
          if (better) {
            best_gap = gap;
            best = p;
            best_touch = touch;
            best_rank = rank;
          }
        }
    const double gap = lowering(best, k, masked);
    if (gap > support_tol) {
      ++dropped;
      continue;
    }
    planes.push_back({best, u.values[k] - dot(best, g.coords(k), n) - gap, k, best_touch.facet});
  }
  // Where the data has facets, a plane that is not one straddles a crease
  // and can overshoot away from the mask; drop it if a facet plane is near.
  Mask facet_nodes(g.size(), 0);
  for (const Plane& pl : planes)
    if (pl.facet) facet_nodes[pl.node] = 1;
  const Mask facet_near = dilate(g, facet_nodes, 2);
  const auto straddling = [&](const Plane& pl) { return !pl.facet && facet_near[pl.node]; };
  dropped += static_cast<std::size_t>(std::count_if(planes.begin(), planes.end(), straddling));
  planes.erase(std::remove_if(planes.begin(), planes.end(), straddling), planes.end());
  if (planes.empty())
    throw PreconditionError(fmt::format("extend_convex: no supporting plane near the rim ({} candidates dropped)", dropped));

  PotentialField out;
  out.grid = target;
  out.values.assign(target.size(), 0.0);
  out.mask.assign(target.size(), 0);
  out.value_kind = u.value_kind;
  const double r2 = target.ball_radius * target.ball_radius * (1.0 + 1e-12);
  for (std::size_t k = 0; k < target.size(); ++k) {
    const Point x = target.coords(k);
    out.mask[k] = target.ball_radius == 0.0 || dot(x, x, n) <= r2 ? 1 : 0;
    const Index ti = target.unflat(k);
    const Index si{ti[0] - shift[0], ti[1] - shift[1], ti[2] - shift[2]};
    if (g.contains(si) && u.mask[g.flat(si)]) {
      out.values[k] = u.values[g.flat(si)];
      out.mask[k] = 1;
      continue;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (const Plane& pl : planes) best = std::max(best, dot(pl.p, x, n) + pl.b);
    out.values[k] = best;
  }
  return out;
}

AuditReport subsolution_preservation_trial(const PotentialField& u, double theta, const std::vector<double>& eps_list,
                                           const JetCheckConfig& cfg) {
  AuditReport r;
  r.name = "subsolution-preservation";
  for (double eps : eps_list) {
    const MollifyResult m = mollify(u, {eps});
    if (!m.warning.empty()) r.notes.push_back(fmt::format("eps={:.4g}: {}", eps, m.warning));
    const AuditReport sub = check_subsolution(m.field, theta, cfg);
    r.absorb(sub, fmt::format("eps={:.4g}/", eps));
  }
  return r.finalize();
}

Formula scaled_formula(const Formula& g, double factor) {
  if (!(factor > 0.0)) throw PreconditionError("scaling factor must be positive");
  return [g, factor](const Point& x) {
    Point y = x;
    for (double& c : y) c /= factor;
    return factor * factor * g(y);
  };
}

}  // namespace slag
