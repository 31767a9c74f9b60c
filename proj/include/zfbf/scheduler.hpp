#pragma once

// Greedy two-user ZFBF scheduling ("optimum ZFBF") with water-filling power
// allocation under a long-term power constraint. Rates are in nats.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "zfbf/channel.hpp"
#include "zfbf/mathkit.hpp"

namespace zfbf {

enum class Provenance { analytic, empirical };

inline const char* to_string(Provenance p) {
  return p == Provenance::analytic ? "analytic" : "empirical";
}

/// Water-filling cutoff mu for one (K, M, P) configuration. Users whose
/// effective gain does not exceed mu get no power.
struct CutoffValue {
  double mu = 0.0;
  Provenance provenance = Provenance::analytic;
  std::size_t k_users = 0;
  std::size_t m_antennas = 0;
  double p_avg = 0.0;

  bool matches(std::size_t k, std::size_t m) const noexcept {
    return k == k_users && m == m_antennas;
  }
};

inline double waterfill_power(double mu, double g_norm_sq) {
  if (!(mu > 0.0) || !(g_norm_sq > 0.0)) throw domain_error("waterfill_power: mu and g must be positive");
  return std::max(0.0, 1.0 / mu - g_norm_sq);
}

/// C(U_1) = log(gamma1 / mu).
inline double rate_one_user(double gamma1, double mu) {
  if (!(mu > 0.0) || !(gamma1 > mu)) throw domain_error("rate_one_user: require gamma1 > mu > 0");
  return std::log(gamma1 / mu);
}

/// C(U_2) = log(gamma1 beta2^2 / (gamma2 mu^2)) = log(beta1/mu) + log(beta2/mu).
inline double rate_two_users(double gamma1, double gamma2, double beta2, double mu) {
  if (!(mu > 0.0) || !(beta2 > mu) || !(gamma2 >= beta2) || !(gamma1 >= gamma2))
    throw domain_error("rate_two_users: require gamma1 >= gamma2 >= beta2 > mu > 0");
  return std::log(gamma1 / mu) + std::log(beta2 / mu) + std::log(beta2 / gamma2);
}

/// Mu-independent part of the greedy search: the strongest user and the
/// best second candidate by beta_k^2 / gamma_k.
struct GreedyCandidates {
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double beta2 = 0.0;

  double beta1() const { return gamma2 > 0.0 ? gamma1 * beta2 / gamma2 : 0.0; }
};

inline GreedyCandidates greedy_candidates(const ChannelMatrix& h) {
  const std::size_t k = h.k_users();
  GreedyCandidates c;
  c.gamma1 = -1.0;
  for (std::size_t u = 0; u < k; ++u) {
    const double g = norm_sq(h.user(u));
    if (g > c.gamma1) {  // strict: ties keep the lowest index
      c.gamma1 = g;
      c.k1 = u;
    }
  }
  const auto h1 = h.user(c.k1);
  const std::vector<std::vector<cplx>> basis{std::vector<cplx>(h1.begin(), h1.end())};
  double best = -1.0;
  for (std::size_t u = 0; u < k; ++u) {
    if (u == c.k1) continue;
    const double g = norm_sq(h.user(u));
    const double b = projection_residual_sq(h.user(u), basis);
    const double score = g > 0.0 ? b * b / g : 0.0;
    if (score > best) {
      best = score;
      c.k2 = u;
      c.gamma2 = g;
      c.beta2 = b;
    }
  }
  return c;
}

struct ScheduleOutcome {
  std::vector<std::size_t> scheduled;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double beta2 = 0.0;
  double beta1 = 0.0;
  std::vector<double> powers;
  double rate = 0.0;
  BeamformerSet beams;  // empty unless users are scheduled by greedy_select

  double total_power() const {
    double s = 0.0;
    for (double p : powers) s += p;
    return s;
  }
};

/// Number of users the greedy rule schedules at cutoff mu (0, 1 or 2).
inline int schedule_size(const GreedyCandidates& c, double mu) {
  if (!(c.gamma1 > mu)) return 0;
  // C(U_2) > C(U_1) reduces to beta2^2 / (gamma2 mu) > 1.
  if (c.beta2 > mu && rate_two_users(c.gamma1, c.gamma2, c.beta2, mu) > rate_one_user(c.gamma1, mu))
    return 2;
  return 1;
}

/// Total allocated power for the schedule chosen at mu.
inline double schedule_power(const GreedyCandidates& c, double mu) {
  switch (schedule_size(c, mu)) {
    case 2: return 2.0 / mu - 1.0 / c.beta1() - 1.0 / c.beta2;
    case 1: return 1.0 / mu - 1.0 / c.gamma1;
    default: return 0.0;
  }
}

/// Applies the cutoff to precomputed candidates without building beamformers.
inline ScheduleOutcome decide_schedule(const GreedyCandidates& c, double mu) {
  if (!(mu > 0.0)) throw domain_error("decide_schedule: mu must be positive");
  ScheduleOutcome o;
  o.gamma1 = c.gamma1;
  o.gamma2 = c.gamma2;
  o.beta2 = c.beta2;
  o.beta1 = c.beta1();
  switch (schedule_size(c, mu)) {
    case 2:
      o.scheduled = {c.k1, c.k2};
      o.powers = {1.0 / mu - 1.0 / o.beta1, 1.0 / mu - 1.0 / c.beta2};
      o.rate = rate_two_users(c.gamma1, c.gamma2, c.beta2, mu);
      break;
    case 1:
      o.scheduled = {c.k1};
      o.powers = {1.0 / mu - 1.0 / c.gamma1};
      o.rate = rate_one_user(c.gamma1, mu);
      break;
    default:
      break;
  }
  return o;
}

/// Full greedy selection for one realization: the scheduled users' beamformers
/// are rebuilt from their own rows, and powers come from water-filling on the
/// resulting ||g_i||^2.
inline ScheduleOutcome greedy_select(const ChannelMatrix& h, double mu) {
  const GreedyCandidates c = greedy_candidates(h);
  ScheduleOutcome o = decide_schedule(c, mu);
  if (o.scheduled.empty()) return o;
  const LQFactors f = lq_decompose(h.rows(o.scheduled));
  o.beams = build_beamformers(f);
  for (std::size_t i = 0; i < o.scheduled.size(); ++i)
    o.powers[i] = waterfill_power(mu, o.beams.g_norms_sq[i]);
  return o;
}

inline ScheduleOutcome greedy_select(const ChannelMatrix& h, const CutoffValue& mu) {
  if (!mu.matches(h.k_users(), h.m_antennas()))
    throw domain_error("greedy_select: cutoff was solved for a different (K, M)");
  return greedy_select(h, mu.mu);
}

}  // namespace zfbf
