#pragma once

// Rayleigh channel draws and the small dense complex linear algebra behind
// zero-forcing beamforming: LQ factorization of the active users' rows,
// beamformer construction and orthogonal-projection gains.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "zfbf/mathkit.hpp"

namespace zfbf {

class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Rank deficiency detected while factoring selected channel rows.
class decomposition_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major complex matrix.
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<cplx> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const cplx> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  static CMatrix identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  CMatrix adjoint() const {
    CMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = std::conj((*this)(r, c));
    return t;
  }

  friend CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    if (a.cols_ != b.rows_) throw dimension_error("CMatrix product: inner dimensions differ");
    CMatrix p(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const cplx aik = a(i, k);
        for (std::size_t j = 0; j < b.cols_; ++j) p(i, j) += aik * b(k, j);
      }
    return p;
  }

  friend CMatrix operator-(const CMatrix& a, const CMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw dimension_error("CMatrix difference");
    CMatrix d = a;
    for (std::size_t i = 0; i < d.data_.size(); ++i) d.data_[i] -= b.data_[i];
    return d;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& x : data_) s += std::norm(x);
    return std::sqrt(s);
  }

  bool operator==(const CMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

/// Hermitian inner product a^H b.
inline cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

inline double norm_sq(std::span<const cplx> a) {
  double s = 0.0;
  for (const auto& x : a) s += std::norm(x);
  return s;
}

/// K x M channel; row k holds the entries of h_k.
class ChannelMatrix {
 public:
  explicit ChannelMatrix(CMatrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() < 2 || entries_.cols() < 2)
      throw dimension_error("ChannelMatrix: need K >= 2 users and M >= 2 antennas");
    for (std::size_t r = 0; r < entries_.rows(); ++r)
      for (const auto& x : entries_.row(r))
        if (!std::isfinite(x.real()) || !std::isfinite(x.imag()))
          throw dimension_error("ChannelMatrix: non-finite entry");
  }

  std::size_t k_users() const noexcept { return entries_.rows(); }
  std::size_t m_antennas() const noexcept { return entries_.cols(); }
  const CMatrix& entries() const noexcept { return entries_; }
  std::span<const cplx> user(std::size_t k) const { return entries_.row(k); }

  /// Rows of the listed users, in the given order.
  CMatrix rows(std::span<const std::size_t> users) const {
    CMatrix h(users.size(), m_antennas());
    for (std::size_t i = 0; i < users.size(); ++i) {
      const auto src = user(users[i]);
      std::copy(src.begin(), src.end(), h.row(i).begin());
    }
    return h;
  }

 private:
  CMatrix entries_;
};

inline ChannelMatrix draw_channel_matrix(std::size_t k, std::size_t m, RngStream& rng) {
  if (k < 2 || m < 2) throw dimension_error("draw_channel_matrix: need k >= 2 and m >= 2");
  CMatrix h(k, m);
  for (std::size_t r = 0; r < k; ++r)
    for (auto& x : h.row(r)) x = rng.complex_normal();
  return ChannelMatrix(std::move(h));
}

struct LQFactors {
  CMatrix l;  // n x n lower triangular, real nonnegative diagonal
  CMatrix q;  // n x M, orthonormal rows
};

/// h^H P_perp h for the orthogonal complement of span(basis): the squared
/// norm of h after removing its projection onto the basis vectors.
inline double projection_residual_sq(std::span<const cplx> h,
                                     const std::vector<std::vector<cplx>>& basis) {
  std::vector<cplx> r(h.begin(), h.end());
  if (basis.empty()) return norm_sq(r);
  // Orthonormalize the basis, then subtract twice for stability.
  std::vector<std::vector<cplx>> ortho;
  for (const auto& b : basis) {
    if (b.size() != h.size()) throw dimension_error("projection_residual_sq: size mismatch");
    std::vector<cplx> u = b;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& e : ortho) {
        const cplx c = inner(e, u);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] -= c * e[i];
      }
    const double n = std::sqrt(norm_sq(u));
    if (n <= 1e-12 * std::sqrt(norm_sq(b))) continue;  // dependent on earlier vectors
    for (auto& x : u) x /= n;
    ortho.push_back(std::move(u));
  }
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& e : ortho) {
      const cplx c = inner(e, r);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= c * e[i];
    }
  return norm_sq(r);
}

/// H = L Q by modified Gram-Schmidt over the rows (with one reorthogonalization
/// pass). Row i of H is sum_j L(i, j) q_j with L(i, j) = q_j^H h_i.
inline LQFactors lq_decompose(const CMatrix& h) {
  const std::size_t n = h.rows();
  const std::size_t m = h.cols();
  if (n == 0 || n > m) throw decomposition_error("lq_decompose: need 1 <= rows <= cols");
  LQFactors f{CMatrix(n, n), CMatrix(n, m)};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<cplx> v(h.row(i).begin(), h.row(i).end());
    const double row_norm = std::sqrt(norm_sq(v));
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < i; ++j) {
        const cplx c = inner(f.q.row(j), v);
        f.l(i, j) += c;
        const auto qj = f.q.row(j);
        for (std::size_t c2 = 0; c2 < m; ++c2) v[c2] -= c * qj[c2];
      }
    const double d = std::sqrt(norm_sq(v));
    if (!(d > 1e-12 * row_norm))
      throw decomposition_error("lq_decompose: rank-deficient rows (row " + std::to_string(i) + ")");
    f.l(i, i) = d;
    auto qi = f.q.row(i);
    for (std::size_t c2 = 0; c2 < m; ++c2) qi[c2] = v[c2] / d;
  }
  return f;
}

/// Inverse of a lower-triangular matrix by forward substitution.
inline CMatrix lower_triangular_inverse(const CMatrix& l) {
  const std::size_t n = l.rows();
  CMatrix inv(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(l(i, i)) == 0.0) throw decomposition_error("singular L factor");
    inv(i, i) = 1.0 / l(i, i);
    for (std::size_t j = 0; j < i; ++j) {
      cplx s = 0.0;
      for (std::size_t k = j; k < i; ++k) s += l(i, k) * inv(k, j);
      inv(i, j) = -s / l(i, i);
    }
  }
  return inv;
}

struct BeamformerSet {
  CMatrix w;                      // M x n, unit-norm columns
  std::vector<double> g_norms_sq; // ||g_i||^2, g_i = column i of L^{-1}
  std::vector<double> d;          // 1 / ||g_i||
};

/// W = Q^H L^{-1} D, so that H W = D: user i sees real gain 1/||g_i|| and no
/// interference from the other columns.
inline BeamformerSet build_beamformers(const LQFactors& f) {
  const std::size_t n = f.l.rows();
  const CMatrix linv = lower_triangular_inverse(f.l);
  BeamformerSet b{f.q.adjoint() * linv, std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += std::norm(linv(r, i));
    b.g_norms_sq[i] = s;
    b.d[i] = 1.0 / std::sqrt(s);
    for (std::size_t r = 0; r < b.w.rows(); ++r) b.w(r, i) *= b.d[i];
  }
  return b;
}

}  // namespace zfbf
