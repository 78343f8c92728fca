#include "slag/operators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include <fmt/core.h>

#include "slag/error.hpp"

namespace slag {

namespace {

ScalarField blank_like(const HessianField& h, const char* kind) {
  ScalarField r;
  r.grid = h.grid;
  r.values.assign(h.grid.size(), 0.0);
  r.mask.assign(h.grid.size(), 0);
  r.value_kind = kind;
  return r;
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::SLAG: return "slag";
    case Variant::MA: return "ma";
    case Variant::MAR: return "mar";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "slag") return Variant::SLAG;
  if (t == "ma") return Variant::MA;
  if (t == "mar") return Variant::MAR;
  throw ConfigError(fmt::format("unknown variant '{}' (expected slag, ma or mar)", text));
}

void ProblemSpec::validate() const {
  if (dim != 2 && dim != 3) throw PreconditionError(fmt::format("problem dim must be 2 or 3, got {}", dim));
  if (!std::isfinite(theta) || !std::isfinite(phi)) throw PreconditionError("problem parameters must be finite");
  if (variant == Variant::SLAG && std::abs(theta) >= dim * std::numbers::pi / 2)
    throw PreconditionError(fmt::format("infeasible phase: |theta| = {} >= n*pi/2", std::abs(theta)));
}

double phase_sum(const Spectrum& s) noexcept {
  double t = 0.0;
  for (int i = 0; i < s.dim; ++i) t += std::atan(s.values[i]);
  return t;
}

double phase_sum(const SymMatrix& m) { return phase_sum(eigen_decompose(m)); }

ScalarField slag_residual(const HessianField& h, double theta) {
  ScalarField r = blank_like(h, "residual");
  for (std::size_t k = 0; k < r.values.size(); ++k) {
    if (!h.interior[k]) continue;
    r.values[k] = phase_sum(h.matrices[k]) - theta;
    r.mask[k] = 1;
  }
  return r;
}

FlaggedResidual ma_residual(const HessianField& h, double phi) {
  FlaggedResidual out{blank_like(h, "residual"), {}};
  out.flags.name = "ma-positivity";
  for (std::size_t k = 0; k < h.matrices.size(); ++k) {
    if (!h.interior[k]) continue;
    ++out.flags.checked_nodes;
    const Spectrum s = eigen_decompose(h.matrices[k]);
    out.flags.observe(s.min());
    if (!(s.min() > 0.0)) {
      out.flags.violate(k, "min_eigenvalue", s.min());
      continue;
    }
    double t = 0.0;
    for (int i = 0; i < s.dim; ++i) t += std::log(s.values[i]);
    out.residual.values[k] = t - phi;
    out.residual.mask[k] = 1;
  }
  out.flags.finalize();
  return out;
}

FlaggedResidual mar_residual(const HessianField& h, double phi) {
  FlaggedResidual out{blank_like(h, "residual"), {}};
  out.flags.name = "mar-range";
  for (std::size_t k = 0; k < h.matrices.size(); ++k) {
    if (!h.interior[k]) continue;
    ++out.flags.checked_nodes;
    const Spectrum s = eigen_decompose(h.matrices[k]);
    const double worst = std::max(std::abs(s.max()), std::abs(s.min()));
    out.flags.observe(1.0 - worst);
    if (!(worst < 1.0)) {
      out.flags.violate(k, "abs_eigenvalue", worst);
      continue;
    }
    double t = 0.0;
    for (int i = 0; i < s.dim; ++i) t += std::log((1.0 + s.values[i]) / (1.0 - s.values[i]));
    out.residual.values[k] = t - phi;
    out.residual.mask[k] = 1;
  }
  out.flags.finalize();
  return out;
}

SymMatrix slag_linearization(const SymMatrix& m) {
  SymMatrix a = SymMatrix::identity(m.dim()) + m * m;
  SymMatrix inv = a.inverse();
  for (int i = 0; i < m.dim(); ++i)
    for (int j = i + 1; j < m.dim(); ++j) {
      const double avg = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = avg;
      inv(j, i) = avg;
    }
  return inv;
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Subcritical: return "subcritical";
    case Phase::Critical: return "critical";
    case Phase::Supercritical: return "supercritical";
  }
  return "?";
}

Phase phase_classify(double theta, int dim) {
  if (dim < 1) throw PreconditionError("dimension must be positive");
  const double a = std::abs(theta);
  if (!(a < dim * std::numbers::pi / 2))
    throw PreconditionError(fmt::format("infeasible phase: |theta| = {} >= {}*pi/2", a, dim));
  const double threshold = (dim - 2) * std::numbers::pi / 2;
  if (std::abs(a - threshold) <= 1e-12) return Phase::Critical;
  return a > threshold ? Phase::Supercritical : Phase::Subcritical;
}

}  // namespace slag
