#pragma once

#include <array>
#include <cstddef>

namespace slag {

/// Symmetric (or, for intermediate products, general) matrix of order 2 or 3
/// stored densely.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int n) : n_(n) {}

  static SymMatrix identity(int n);
  static SymMatrix diagonal(int n, std::array<double, 3> d);

  int dim() const noexcept { return n_; }
  double& operator()(int i, int j) noexcept { return a_[3 * i + j]; }
  double operator()(int i, int j) const noexcept { return a_[3 * i + j]; }

  SymMatrix& operator+=(const SymMatrix& o) noexcept;
  SymMatrix& operator-=(const SymMatrix& o) noexcept;
  SymMatrix& operator*=(double s) noexcept;
  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) noexcept { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) noexcept { return a -= b; }
  friend SymMatrix operator*(SymMatrix a, double s) noexcept { return a *= s; }
  friend SymMatrix operator*(double s, SymMatrix a) noexcept { return a *= s; }
  friend SymMatrix operator*(const SymMatrix& a, const SymMatrix& b) noexcept;

  SymMatrix transpose() const noexcept;
  double trace() const noexcept;
  double frobenius() const noexcept;
  double determinant() const noexcept;
  /// Throws DomainError when singular.
  SymMatrix inverse() const;
  /// max |a_ij - a_ji|.
  double asymmetry() const noexcept;

 private:
  int n_ = 0;
  std::array<double, 9> a_{};
};

/// Eigenvalues sorted descending.
struct Spectrum {
  int dim = 0;
  std::array<double, 3> values{};

  double operator[](int i) const noexcept { return values[i]; }
  double max() const noexcept { return values[0]; }
  double min() const noexcept { return values[dim - 1]; }
};

/// Eigenvalues of a symmetric 2x2 (closed form) or 3x3 (cyclic Jacobi to an
/// off-diagonal norm of 1e-12 * ||M||) matrix.
Spectrum eigen_decompose(const SymMatrix& m);

/// Descending eigenvalues with the matching orthonormal eigenvectors as
/// columns of `vectors` (Jacobi in every dimension).
struct EigenSystem {
  Spectrum spectrum;
  SymMatrix vectors;
};
EigenSystem eigen_system(const SymMatrix& m);

}  // namespace slag
