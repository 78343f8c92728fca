#include "slag/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slag/error.hpp"

namespace slag {

SymMatrix SymMatrix::identity(int n) {
  SymMatrix m(n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

SymMatrix SymMatrix::diagonal(int n, std::array<double, 3> d) {
  SymMatrix m(n);
  for (int i = 0; i < n; ++i) m(i, i) = d[i];
  return m;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) noexcept {
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& o) noexcept {
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) noexcept {
  for (double& v : a_) v *= s;
  return *this;
}

SymMatrix operator*(const SymMatrix& a, const SymMatrix& b) noexcept {
  const int n = a.dim();
  SymMatrix c(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

SymMatrix SymMatrix::transpose() const noexcept {
  SymMatrix t(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) t(i, j) = (*this)(j, i);
  return t;
}

double SymMatrix::trace() const noexcept {
  double s = 0.0;
  for (int i = 0; i < n_; ++i) s += (*this)(i, i);
  return s;
}

double SymMatrix::frobenius() const noexcept {
  double s = 0.0;
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) s += (*this)(i, j) * (*this)(i, j);
  return std::sqrt(s);
}

double SymMatrix::determinant() const noexcept {
  const auto& m = *this;
  if (n_ == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

SymMatrix SymMatrix::inverse() const {
  const auto& m = *this;
  const double det = determinant();
  if (det == 0.0 || !std::isfinite(det)) throw DomainError("singular matrix");
  SymMatrix r(n_);
  if (n_ == 2) {
    r(0, 0) = m(1, 1) / det;
    r(1, 1) = m(0, 0) / det;
    r(0, 1) = -m(0, 1) / det;
    r(1, 0) = -m(1, 0) / det;
    return r;
  }
  r(0, 0) = (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) / det;
  r(0, 1) = (m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2)) / det;
  r(0, 2) = (m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1)) / det;
  r(1, 0) = (m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2)) / det;
  r(1, 1) = (m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)) / det;
  r(1, 2) = (m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2)) / det;
  r(2, 0) = (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0)) / det;
  r(2, 1) = (m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1)) / det;
  r(2, 2) = (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)) / det;
  return r;
}

double SymMatrix::asymmetry() const noexcept {
  double worst = 0.0;
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j) worst = std::max(worst, std::abs((*this)(i, j) - (*this)(j, i)));
  return worst;
}

namespace {

double off_norm(const SymMatrix& a) {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// Cyclic Jacobi; accumulates rotations into v.
void jacobi(SymMatrix& a, SymMatrix& v) {
  const int n = a.dim();
  const double scale = a.frobenius();
  v = SymMatrix::identity(n);
  if (scale == 0.0) return;
  for (int sweep = 0; sweep < 64; ++sweep) {
    if (off_norm(a) <= 1e-13 * scale) return;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
}

}  // namespace

Spectrum eigen_decompose(const SymMatrix& m) {
  Spectrum s;
  s.dim = m.dim();
  if (m.dim() == 2) {
    const double mean = 0.5 * (m(0, 0) + m(1, 1));
    const double off = 0.5 * (m(0, 1) + m(1, 0));
    const double rad = std::hypot(0.5 * (m(0, 0) - m(1, 1)), off);
    s.values = {mean + rad, mean - rad, 0.0};
    return s;
  }
  SymMatrix a = m;
  SymMatrix v;
  jacobi(a, v);
  for (int i = 0; i < 3; ++i) s.values[i] = a(i, i);
  std::sort(s.values.begin(), s.values.end(), std::greater<>());
  return s;
}

EigenSystem eigen_system(const SymMatrix& m) {
  const int n = m.dim();
  SymMatrix a = m;
  SymMatrix v;
  jacobi(a, v);
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.begin() + n, [&](int i, int j) { return a(i, i) > a(j, j); });
  EigenSystem es;
  es.spectrum.dim = n;
  es.vectors = SymMatrix(n);
  for (int c = 0; c < n; ++c) {
    es.spectrum.values[c] = a(order[c], order[c]);
    for (int r = 0; r < n; ++r) es.vectors(r, c) = v(r, order[c]);
  }
  return es;
}

}  // namespace slag
