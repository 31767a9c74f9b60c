#pragma once

// Greedy zero-forcing dirty-paper (ZF DP) benchmark. Users are appended in
// order of largest residual off the already-selected channels; with DPC each
// user sees only its own LQ diagonal gain |l_ii|^2. This is a benchmark-grade
// reading of the scheme, not a full reimplementation of its original design.

#include <cmath>
#include <cstddef>
#include <vector>

#include "zfbf/channel.hpp"
#include "zfbf/empirical.hpp"
#include "zfbf/mathkit.hpp"
#include "zfbf/parallel.hpp"
#include "zfbf/scheduler.hpp"

namespace zfbf {

struct ZfdpOutcome {
  std::vector<std::size_t> scheduled;
  std::vector<double> diag_gains;
  std::vector<double> powers;
  double rate = 0.0;

  double total_power() const {
    double s = 0.0;
    for (double p : powers) s += p;
    return s;
  }
};

/// Full greedy order (up to min(M, K) users) with the prospective |l_ii|^2 of
/// each step. The sequence of gains is nonincreasing, so applying a cutoff mu
/// amounts to keeping the prefix with gain > mu.
struct ZfdpOrder {
  std::vector<std::size_t> users;
  std::vector<double> gains;
};

inline ZfdpOrder zfdp_order(const ChannelMatrix& h) {
  const std::size_t k = h.k_users();
  const std::size_t m = h.m_antennas();
  const std::size_t n_max = std::min(k, m);
  ZfdpOrder order;
  // Residuals of every user off the span of the selected rows, updated in
  // place one orthonormal direction at a time.
  CMatrix resid = h.entries();
  std::vector<double> rnorm(k);
  for (std::size_t u = 0; u < k; ++u) rnorm[u] = norm_sq(resid.row(u));
  std::vector<bool> taken(k, false);
  while (order.users.size() < n_max) {
    std::size_t best = k;
    double best_gain = -1.0;
    for (std::size_t u = 0; u < k; ++u)
      if (!taken[u] && rnorm[u] > best_gain) {
        best_gain = rnorm[u];
        best = u;
      }
    const double scale = norm_sq(h.user(best));
    if (!(best_gain > 1e-24 * scale)) throw decomposition_error("zfdp_order: rank-deficient channel");
    taken[best] = true;
    order.users.push_back(best);
    order.gains.push_back(best_gain);
    std::vector<cplx> q(resid.row(best).begin(), resid.row(best).end());
    const double qn = std::sqrt(best_gain);
    for (auto& x : q) x /= qn;
    for (std::size_t u = 0; u < k; ++u) {
      if (taken[u]) continue;
      auto r = resid.row(u);
      const cplx c = inner(q, r);
      for (std::size_t i = 0; i < m; ++i) r[i] -= c * q[i];
      rnorm[u] = norm_sq(r);
    }
  }
  return order;
}

inline ZfdpOutcome zfdp_apply_cutoff(const ZfdpOrder& order, double mu) {
  if (!(mu > 0.0)) throw domain_error("zfdp: mu must be positive");
  ZfdpOutcome o;
  for (std::size_t i = 0; i < order.users.size() && order.gains[i] > mu; ++i) {
    o.scheduled.push_back(order.users[i]);
    o.diag_gains.push_back(order.gains[i]);
    o.powers.push_back(1.0 / mu - 1.0 / order.gains[i]);
    o.rate += std::log(order.gains[i] / mu);
  }
  return o;
}

/// Greedy ZF DP selection and water-filling at cutoff mu; the diagonal gains
/// are taken from the LQ factorization of the selected rows in order.
inline ZfdpOutcome zfdp_select(const ChannelMatrix& h, double mu) {
  ZfdpOutcome o = zfdp_apply_cutoff(zfdp_order(h), mu);
  if (o.scheduled.empty()) return o;
  const LQFactors f = lq_decompose(h.rows(o.scheduled));
  o.rate = 0.0;
  for (std::size_t i = 0; i < o.scheduled.size(); ++i) {
    const double d = std::norm(f.l(i, i));
    o.diag_gains[i] = d;
    o.powers[i] = waterfill_power(mu, 1.0 / d);
    o.rate += std::log(d / mu);
  }
  return o;
}

inline ZfdpOutcome zfdp_select(const ChannelMatrix& h, const CutoffValue& mu) {
  if (!mu.matches(h.k_users(), h.m_antennas()))
    throw domain_error("zfdp_select: cutoff was solved for a different (K, M)");
  return zfdp_select(h, mu.mu);
}

/// Empirical ZF DP cutoff: draws `trials` channels once (trial t uses
/// substream rng.stream_id() + t of rng.seed()), then searches mu so that the
/// sample mean of total allocated power equals p_avg.
inline CutoffValue zfdp_empirical_cutoff(std::size_t k, std::size_t m, double p_avg, std::size_t trials,
                                         const RngStream& rng, std::size_t workers = 1) {
  if (k < 2 || m < 2) throw dimension_error("zfdp_empirical_cutoff: need k >= 2 and m >= 2");
  if (trials < 100'000) throw domain_error("zfdp_empirical_cutoff: needs at least 1e5 trials");
  const std::size_t n = std::min(k, m);
  std::vector<double> gains(trials * n, 0.0);
  for_each_chunk(trials, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      RngStream s(rng.seed(), rng.stream_id() + t);
      const ZfdpOrder o = zfdp_order(draw_channel_matrix(k, m, s));
      std::copy(o.gains.begin(), o.gains.end(), gains.begin() + static_cast<std::ptrdiff_t>(t * n));
    }
  });
  auto mean_power = [&](double mu) {
    const double inv_mu = 1.0 / mu;
    double total = 0.0;
    for (std::size_t t = 0; t < trials; ++t)
      for (std::size_t i = 0; i < n; ++i) {
        const double g = gains[t * n + i];
        if (!(g > mu)) break;
        total += inv_mu - 1.0 / g;
      }
    return total / static_cast<double>(trials);
  };
  const double mu = solve_empirical_cutoff(mean_power, p_avg);
  return CutoffValue{mu, Provenance::empirical, k, m, p_avg};
}

}  // namespace zfbf
