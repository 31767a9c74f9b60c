#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "zfbf/channel.hpp"

namespace zfbf {
namespace {

CMatrix from_rows(const std::vector<std::vector<cplx>>& rows) {
  CMatrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

std::vector<cplx> to_vec(std::span<const cplx> s) { return {s.begin(), s.end()}; }

// Explicit Gauss-Jordan inverse with partial pivoting, independent of the LQ path.
CMatrix gauss_jordan_inverse(CMatrix a) {
  const std::size_t n = a.rows();
  CMatrix inv = CMatrix::identity(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    for (std::size_t j = 0; j < n; ++j) {
      std::swap(a(c, j), a(piv, j));
      std::swap(inv(c, j), inv(piv, j));
    }
    const cplx p = a(c, c);
    for (std::size_t j = 0; j < n; ++j) {
      a(c, j) /= p;
      inv(c, j) /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const cplx f = a(r, c);
      for (std::size_t j = 0; j < n; ++j) {
        a(r, j) -= f * a(c, j);
        inv(r, j) -= f * inv(c, j);
      }
    }
  }
  return inv;
}

TEST(ChannelMatrix, Validation) {
  EXPECT_THROW(ChannelMatrix(CMatrix(1, 2)), dimension_error);
  EXPECT_THROW(ChannelMatrix(CMatrix(2, 1)), dimension_error);
  CMatrix bad(2, 2);
  bad(1, 1) = cplx(std::nan(""), 0.0);
  EXPECT_THROW(ChannelMatrix{bad}, dimension_error);
  RngStream rng(1, 0);
  EXPECT_THROW(draw_channel_matrix(1, 2, rng), dimension_error);
}

TEST(DrawChannelMatrix, DeterministicPerStream) {
  RngStream a(99, 3);
  RngStream b(99, 3);
  const ChannelMatrix x = draw_channel_matrix(2, 2, a);
  const ChannelMatrix y = draw_channel_matrix(2, 2, b);
  EXPECT_EQ(x.entries(), y.entries());
  EXPECT_EQ(x.k_users(), 2u);
  EXPECT_EQ(x.m_antennas(), 2u);
}

TEST(DrawChannelMatrix, MeanNormEqualsAntennaCount) {
  RngStream rng(5, 0);
  constexpr int rows = 1'000'000;
  double sum = 0.0;
  for (int i = 0; i < rows / 2; ++i) {
    const ChannelMatrix h = draw_channel_matrix(2, 4, rng);
    sum += norm_sq(h.user(0)) + norm_sq(h.user(1));
  }
  EXPECT_NEAR(sum / rows, 4.0, 0.01);
}

// Kolmogorov-Smirnov distance of ||h||^2 against the Gamma(M, 1) CDF.
double ks_distance(std::size_t m, std::uint64_t seed) {
  constexpr std::size_t n = 1'000'000;
  std::vector<double> x;
  x.reserve(n);
  RngStream rng(seed, 0);
  while (x.size() < n) {
    const ChannelMatrix h = draw_channel_matrix(2, m, rng);
    x.push_back(norm_sq(h.user(0)));
    x.push_back(norm_sq(h.user(1)));
  }
  std::sort(x.begin(), x.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = oracle::gamma_cdf(x[i], static_cast<int>(m));
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  return d;
}

TEST(DrawChannelMatrix, NormFollowsGammaLaw) {
  EXPECT_LT(ks_distance(2, 11), 0.002);
  EXPECT_LT(ks_distance(4, 12), 0.002);
}

TEST(ProjectionResidual, Examples) {
  const std::vector<cplx> e1{1.0, 0.0};
  const std::vector<cplx> e2{0.0, 1.0};
  EXPECT_DOUBLE_EQ(projection_residual_sq(e1, {e2}), 1.0);
  EXPECT_NEAR(projection_residual_sq(e1, {e1}), 0.0, 1e-30);
  const std::vector<cplx> h{cplx(3.0, 1.0), cplx(-2.0, 0.5)};
  EXPECT_NEAR(projection_residual_sq(h, {e1}), std::norm(h[1]), 1e-14);
  EXPECT_DOUBLE_EQ(projection_residual_sq(h, {}), norm_sq(h));
  EXPECT_THROW(projection_residual_sq(h, {std::vector<cplx>{1.0, 0.0, 0.0}}), dimension_error);
}

TEST(LqDecompose, Examples) {
  const LQFactors a = lq_decompose(from_rows({{2.0, 0.0}}));
  EXPECT_EQ(a.l, from_rows({{2.0}}));
  EXPECT_EQ(a.q, from_rows({{1.0, 0.0}}));
  const LQFactors b = lq_decompose(CMatrix::identity(2));
  EXPECT_EQ(b.l, CMatrix::identity(2));
  EXPECT_EQ(b.q, CMatrix::identity(2));
}

TEST(LqDecompose, RandomRowsFactorAndOrthonormal) {
  RngStream rng(21, 0);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t m = 2 + t % 4;
    const std::size_t n = 1 + t % m;
    const ChannelMatrix h = draw_channel_matrix(std::max<std::size_t>(n, 2), m, rng);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    const CMatrix rows = h.rows(idx);
    const LQFactors f = lq_decompose(rows);
    EXPECT_LE((rows - f.l * f.q).frobenius_norm(), 1e-10 * rows.frobenius_norm());
    EXPECT_LE((f.q * f.q.adjoint() - CMatrix::identity(n)).frobenius_norm(), 1e-10);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(f.l(i, i).imag(), 0.0);
      EXPECT_GE(f.l(i, i).real(), 0.0);
      for (std::size_t j = i + 1; j < n; ++j) EXPECT_EQ(f.l(i, j), cplx(0.0));
    }
  }
}

TEST(LqDecompose, DiagonalMatchesProjectionResiduals) {
  RngStream rng(22, 0);
  for (int t = 0; t < 200; ++t) {
    const ChannelMatrix h = draw_channel_matrix(2, 4, rng);
    const LQFactors f = lq_decompose(h.entries());
    const double g1 = norm_sq(h.user(0));
    const double b2 = projection_residual_sq(h.user(1), {to_vec(h.user(0))});
    EXPECT_NEAR(std::norm(f.l(0, 0)), g1, 1e-12 * g1);
    EXPECT_NEAR(std::norm(f.l(1, 1)), b2, 1e-10 * b2);
  }
}

TEST(LqDecompose, RankDeficiencyFailsLoudly) {
  EXPECT_THROW(lq_decompose(from_rows({{1.0, 2.0}, {2.0, 4.0}})), decomposition_error);
  EXPECT_THROW(lq_decompose(from_rows({{1.0, 0.0}, {0.0, 0.0}})), decomposition_error);
  EXPECT_THROW(lq_decompose(CMatrix(3, 2)), decomposition_error);
}

TEST(BuildBeamformers, SingleUserIsMatchedFilter) {
  const std::vector<cplx> h{cplx(1.0, 2.0), cplx(-0.5, 0.25), cplx(0.0, 1.0)};
  const LQFactors f = lq_decompose(from_rows({h}));
  const BeamformerSet b = build_beamformers(f);
  const double g = norm_sq(h);
  EXPECT_NEAR(b.g_norms_sq[0], 1.0 / g, 1e-15);
  // w = conj(h)/||h|| up to a unit-modulus factor: |h^T w| = ||h||.
  cplx hw = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) hw += h[i] * b.w(i, 0);
  EXPECT_NEAR(std::abs(hw), std::sqrt(g), 1e-12);
}

TEST(BuildBeamformers, OrthogonalRowsDecouple) {
  const CMatrix h = from_rows({{2.0, 0.0}, {0.0, 1.0}});
  const BeamformerSet b = build_beamformers(lq_decompose(h));
  EXPECT_NEAR(b.g_norms_sq[0], 0.25, 1e-15);
  EXPECT_NEAR(b.g_norms_sq[1], 1.0, 1e-15);
  EXPECT_NEAR(std::abs(b.w(0, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(b.w(1, 1)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(b.w(1, 0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(b.w(0, 1)), 0.0, 1e-15);
}

TEST(BuildBeamformers, RandomPairsInvariants) {
  RngStream rng(23, 0);
  for (int t = 0; t < 10'000; ++t) {
    const std::size_t m = 2 + t % 3;
    const ChannelMatrix h = draw_channel_matrix(2, m, rng);
    const CMatrix hh = h.entries();
    const BeamformerSet b = build_beamformers(lq_decompose(hh));
    const CMatrix hw = hh * b.w;
    EXPECT_LE(std::abs(hw(0, 1)), 1e-8);
    EXPECT_LE(std::abs(hw(1, 0)), 1e-8);
    for (std::size_t i = 0; i < 2; ++i) {
      double col = 0.0;
      for (std::size_t r = 0; r < m; ++r) col += std::norm(b.w(r, i));
      EXPECT_NEAR(col, 1.0, 1e-10);
      EXPECT_NEAR(hw(i, i).real(), b.d[i], 1e-10 * b.d[i]);
    }
    // 1/||g_i||^2 equals the residual of row i off the other row.
    const double beta1 = projection_residual_sq(h.user(0), {to_vec(h.user(1))});
    const double beta2 = projection_residual_sq(h.user(1), {to_vec(h.user(0))});
    EXPECT_NEAR(1.0 / b.g_norms_sq[0], beta1, 1e-9 * beta1);
    EXPECT_NEAR(1.0 / b.g_norms_sq[1], beta2, 1e-9 * beta2);
  }
}

TEST(BuildBeamformers, GNormsMatchGramInverseDiagonal) {
  RngStream rng(24, 0);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + t % 3;
    const ChannelMatrix h = draw_channel_matrix(n, 5, rng);
    const CMatrix hh = h.entries();
    const BeamformerSet b = build_beamformers(lq_decompose(hh));
    const CMatrix ginv = gauss_jordan_inverse(hh * hh.adjoint());
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(b.g_norms_sq[i], ginv(i, i).real(), 1e-9 * b.g_norms_sq[i]);
  }
}

// (v, z) of one user against an independent user's direction follows
// z^{M-2} e^{-v} / Gamma(M-1) on v >= z >= 0. Compare binned frequencies with
// exact bin masses: the v-integral is closed form, z by adaptive Simpson.
TEST(UnorderedLaw, RandomPairHistogramMatchesDensity) {
  constexpr int m = 3;
  constexpr std::size_t bins = 20;
  constexpr double upper = 12.0;
  constexpr std::size_t n = 1'000'000;
  std::vector<double> counts(bins * bins, 0.0);
  double outside = 0.0;
  RngStream rng(31, 0);
  for (std::size_t t = 0; t < n; ++t) {
    const ChannelMatrix h = draw_channel_matrix(2, m, rng);
    const double v = norm_sq(h.user(1));
    const double z = projection_residual_sq(h.user(1), {to_vec(h.user(0))});
    if (v >= upper || z >= upper) {
      outside += 1.0;
      continue;
    }
    const auto i = std::min(bins - 1, static_cast<std::size_t>(v / upper * bins));
    const auto j = std::min(bins - 1, static_cast<std::size_t>(z / upper * bins));
    counts[i * bins + j] += 1.0;
  }
  const double w = upper / bins;
  double tv = 0.0;
  double inside = 0.0;
  for (std::size_t i = 0; i < bins; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v0 = i * w, v1 = (i + 1) * w, z0 = j * w, z1 = (j + 1) * w;
      const double mass = oracle::simpson(
          [&](double z) {
            const double lo = std::max(v0, z);
            return lo < v1 ? std::pow(z, m - 2) * (std::exp(-lo) - std::exp(-v1)) / oracle::factorial(m - 2) : 0.0;
          },
          z0, std::min(z1, v1), 1e-12);
      inside += mass;
      tv += std::abs(counts[i * bins + j] / n - mass);
    }
  tv += std::abs(outside / n - (1.0 - inside));
  EXPECT_LT(0.5 * tv, 0.02);
  EXPECT_NEAR(inside, 1.0, 0.01);
}

}  // namespace
}  // namespace zfbf
