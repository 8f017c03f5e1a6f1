#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "loctime/grid.hpp"

namespace loctime {

/// Row-major dense matrix. Just enough linear algebra to back the
/// exponential oracle; not a general-purpose type.
struct DenseMatrix {
  std::size_t n = 0;
  std::vector<double> d;

  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t n_) : n(n_), d(n_ * n_, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return d[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return d[i * n + j]; }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
};

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.n != b.n) throw ValidationError("dense multiply: size mismatch");
  const std::size_t n = a.n;
  DenseMatrix c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a.d[i * n + k];
      if (aik == 0.0) continue;
      const double* brow = &b.d[k * n];
      double* crow = &c.d[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  return c;
}

inline std::vector<double> operator*(const DenseMatrix& a,
                                     const std::vector<double>& v) {
  if (a.n != v.size()) throw ValidationError("dense matvec: size mismatch");
  std::vector<double> out(a.n, 0.0);
  for (std::size_t i = 0; i < a.n; ++i) {
    const double* row = &a.d[i * a.n];
    double s = 0.0;
    for (std::size_t j = 0; j < a.n; ++j) s += row[j] * v[j];
    out[i] = s;
  }
  return out;
}

inline double one_norm(const DenseMatrix& a) {
  double best = 0.0;
  for (std::size_t j = 0; j < a.n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < a.n; ++i) col += std::abs(a.at(i, j));
    best = std::max(best, col);
  }
  return best;
}

namespace detail {

/// Solve A X = B with partial-pivoted LU; A and B are consumed.
inline DenseMatrix lu_solve(DenseMatrix a, DenseMatrix b) {
  const std::size_t n = a.n;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(a.at(col, col));
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::abs(a.at(r, col));
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best == 0.0) throw NumericalError("lu_solve: singular matrix");
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j)
        std::swap(a.at(col, j), a.at(piv, j));
      for (std::size_t j = 0; j < n; ++j)
        std::swap(b.at(col, j), b.at(piv, j));
    }
    const double inv = 1.0 / a.at(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double m = a.at(r, col) * inv;
      if (m == 0.0) continue;
      a.at(r, col) = 0.0;
      for (std::size_t j = col + 1; j < n; ++j)
        a.at(r, j) -= m * a.at(col, j);
      for (std::size_t j = 0; j < n; ++j) b.at(r, j) -= m * b.at(col, j);
    }
  }
  for (std::size_t col = n; col-- > 0;) {
    const double inv = 1.0 / a.at(col, col);
    for (std::size_t j = 0; j < n; ++j) b.at(col, j) *= inv;
    for (std::size_t r = 0; r < col; ++r) {
      const double m = a.at(r, col);
      if (m == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j)
        b.at(r, j) -= m * b.at(col, j);
    }
  }
  return b;
}

inline void add_scaled(DenseMatrix& a, double c, const DenseMatrix& b) {
  for (std::size_t i = 0; i < a.d.size(); ++i) a.d[i] += c * b.d[i];
}

inline void add_identity(DenseMatrix& a, double c) {
  for (std::size_t i = 0; i < a.n; ++i) a.at(i, i) += c;
}

}  // namespace detail

/// Matrix exponential by degree-13 Pade with scaling and squaring.
/// Serves as the independent time-stepping oracle; capped at 2000 nodes
/// because the cost grows cubically.
inline DenseMatrix expm(DenseMatrix a) {
  if (a.n == 0) throw ValidationError("expm: empty matrix");
  if (a.n > 2000)
    throw ValidationError("expm: dense exponential supports at most 2000 nodes");
  static const double bc[14] = {64764752532480000.0,
                                32382376266240000.0,
                                7771770303897600.0,
                                1187353796428800.0,
                                129060195264000.0,
                                10559470521600.0,
                                670442572800.0,
                                33522128640.0,
                                1323241920.0,
                                40840800.0,
                                960960.0,
                                16380.0,
                                182.0,
                                1.0};
  const double theta13 = 5.371920351148152;

  int s = 0;
  const double nrm = one_norm(a);
  if (nrm > theta13) {
    s = static_cast<int>(std::ceil(std::log2(nrm / theta13)));
    const double scale = std::ldexp(1.0, -s);
    for (double& v : a.d) v *= scale;
  }

  const DenseMatrix a2 = a * a;
  const DenseMatrix a4 = a2 * a2;
  const DenseMatrix a6 = a2 * a4;

  DenseMatrix w(a.n);
  detail::add_scaled(w, bc[13], a6);
  detail::add_scaled(w, bc[11], a4);
  detail::add_scaled(w, bc[9], a2);
  DenseMatrix u = a6 * w;
  detail::add_scaled(u, bc[7], a6);
  detail::add_scaled(u, bc[5], a4);
  detail::add_scaled(u, bc[3], a2);
  detail::add_identity(u, bc[1]);
  u = a * u;

  DenseMatrix z(a.n);
  detail::add_scaled(z, bc[12], a6);
  detail::add_scaled(z, bc[10], a4);
  detail::add_scaled(z, bc[8], a2);
  DenseMatrix v = a6 * z;
  detail::add_scaled(v, bc[6], a6);
  detail::add_scaled(v, bc[4], a4);
  detail::add_scaled(v, bc[2], a2);
  detail::add_identity(v, bc[0]);

  DenseMatrix num = v;
  detail::add_scaled(num, 1.0, u);
  DenseMatrix den = std::move(v);
  detail::add_scaled(den, -1.0, u);

  DenseMatrix f = detail::lu_solve(std::move(den), std::move(num));
  for (int i = 0; i < s; ++i) f = f * f;
  return f;
}

}  // namespace loctime
