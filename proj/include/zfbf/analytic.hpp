#pragma once

// Closed-form law of the greedy scheduler's gain triple (gamma1, gamma2,
// beta2) and the nested-quadrature engine that turns it into the average
// allocated power, the water-filling cutoff and the average sum rate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>

#include "zfbf/mathkit.hpp"
#include "zfbf/scheduler.hpp"

namespace zfbf {

struct PdfParams {
  std::size_t k_users = 2;
  std::size_t m_antennas = 2;

  void validate() const {
    if (k_users < 2 || m_antennas < 2)
      throw domain_error("PdfParams: need K >= 2 and M >= 2");
  }
};

struct GainTriple {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double beta2 = 0.0;

  bool in_support() const noexcept {
    return gamma1 >= gamma2 && gamma2 >= beta2 && beta2 >= 0.0;
  }
};

/// Joint density of (||h||^2, h^H P_perp h) for one unordered user:
/// z^{M-2} e^{-v} / Gamma(M-1) on v >= z >= 0.
inline double unordered_pdf(double v, double z, std::size_t m) {
  if (m < 2) throw domain_error("unordered_pdf: M must be >= 2");
  if (!(v >= z && z >= 0.0)) return 0.0;
  const double zp = m == 2 ? 1.0 : std::pow(z, static_cast<double>(m - 2));
  return zp * std::exp(-v) / gamma_fn(static_cast<double>(m - 1));
}

namespace detail {

// Gamma(M) - Gamma(M, a) + a^{(M-1)/2} (Gamma((M+1)/2, a) - Gamma((M+1)/2, gamma1)),
// with a = beta2^2 / gamma2 <= gamma1.
inline double s1_bracket(double gamma1, double a, std::size_t m) {
  const double md = static_cast<double>(m);
  const double s = 0.5 * (md + 1.0);
  return lower_incomplete_gamma(md, a) +
         std::pow(a, 0.5 * (md - 1.0)) * incomplete_gamma_between(s, std::min(a, gamma1), gamma1);
}

}  // namespace detail

/// Probability mass of one competing user over
/// S1 = {z <= v <= gamma1} intersected with {z^2/v <= beta2^2/gamma2}, i.e. the
/// chance that a third user neither beats gamma1 nor outscores the selected
/// second user.
inline double s1_integral(double gamma1, double gamma2, double beta2, std::size_t m) {
  if (m < 2) throw domain_error("s1_integral: M must be >= 2");
  if (!GainTriple{gamma1, gamma2, beta2}.in_support())
    throw domain_error("s1_integral: require gamma1 >= gamma2 >= beta2 >= 0");
  if (gamma2 == 0.0) return 0.0;
  const double a = beta2 * beta2 / gamma2;
  return detail::s1_bracket(gamma1, a, m) / gamma_fn(static_cast<double>(m));
}

namespace detail {

// Joint density factored as outer(gamma1) * inner(gamma2, beta2 | gamma1).
// The incomplete gamma at gamma1 is cached per outer point.
class TripleDensity {
 public:
  explicit TripleDensity(const PdfParams& p) : k_(p.k_users), m_(p.m_antennas) {
    p.validate();
    const double md = static_cast<double>(m_);
    gamma_m_ = gamma_fn(md);
    log_gamma_m_ = std::log(gamma_m_);
    half_s_ = 0.5 * (md + 1.0);
    const double kd = static_cast<double>(k_);
    log_const_ = std::log(kd) + std::log(kd - 1.0) + std::log(md - 1.0) - 2.0 * log_gamma_m_;
  }

  std::size_t k() const noexcept { return k_; }
  std::size_t m() const noexcept { return m_; }

  // log of K!/(K-2)! (M-1)/Gamma(M)^2 e^{-gamma1} gamma1^{M-1}
  double log_outer(double gamma1) const {
    return log_const_ - gamma1 + (static_cast<double>(m_) - 1.0) * std::log(gamma1);
  }

  // e^{-gamma2} beta2^{M-2} (bracket / Gamma(M))^{K-2}
  double inner(double gamma1, double upper_at_gamma1, double gamma2, double beta2) const {
    double v = std::exp(-gamma2);
    if (m_ > 2) v *= int_pow(beta2, m_ - 2);
    if (k_ > 2) {
      const double a = gamma2 > 0.0 ? beta2 * beta2 / gamma2 : 0.0;
      const double r = normalized_bracket(std::min(a, gamma1), upper_at_gamma1);
      if (!(r > 0.0)) return 0.0;
      v *= int_pow(std::min(r, 1.0), k_ - 2);
    }
    return v;
  }

  // bracket / Gamma(M) at a = beta2^2/gamma2. This sits in the innermost
  // loop, so the incomplete gammas share one exponential.
  double normalized_bracket(double a, double upper_at_gamma1) const {
    if (a == 0.0) return 0.0;
    const std::size_t m = m_;
    const double ea = std::exp(-a);
    // Regularized lower incomplete gamma P(M, a).
    double lower;
    if (a < 1.0) {
      double term = 1.0;
      double sum = 1.0;
      for (int n = 1; n < 60; ++n) {
        term *= a / (static_cast<double>(m) + n);
        sum += term;
        if (term < 1e-17 * sum) break;
      }
      lower = sum * int_pow(a, m) * ea / gamma_m_ / static_cast<double>(m);
    } else {
      double term = 1.0;
      double sum = 1.0;
      for (std::size_t j = 1; j < m; ++j) {
        term *= a / static_cast<double>(j);
        sum += term;
      }
      lower = 1.0 - ea * sum;
    }
    // Gamma((M+1)/2, a) via the same recurrences as upper_incomplete_gamma.
    const double sa = std::sqrt(a);
    double up;
    double x;
    double xpow;
    if (m % 2 == 1) {
      up = ea;
      x = 1.0;
      xpow = a;
    } else {
      up = sqrt_pi_ * std::erfc(sa);
      x = 0.5;
      xpow = sa;
    }
    for (; x + 0.5 < half_s_; x += 1.0) {
      up = x * up + xpow * ea;
      xpow *= a;
    }
    double diff = up - upper_at_gamma1;
    if (diff < 0.0) diff = 0.0;
    // a^{(M-1)/2}
    const double scale = (m % 2 == 1) ? int_pow(a, (m - 1) / 2) : int_pow(a, (m - 2) / 2) * sa;
    return lower + scale * diff / gamma_m_;
  }

  static double int_pow(double x, std::size_t n) {
    double r = 1.0;
    while (n) {
      if (n & 1u) r *= x;
      x *= x;
      n >>= 1u;
    }
    return r;
  }

  double upper_at(double gamma1) const { return upper_incomplete_gamma(half_s_, gamma1); }

 private:
  std::size_t k_;
  std::size_t m_;
  double gamma_m_ = 1.0;
  double log_gamma_m_ = 0.0;
  double sqrt_pi_ = std::sqrt(std::numbers::pi);
  double half_s_ = 0.0;
  double log_const_ = 0.0;
};

}  // namespace detail

/// Joint density of the greedy scheduler's (gamma1, gamma2, beta2):
///
///   K!/(K-2)! e^{-(gamma1+gamma2)} gamma1^{M-1} beta2^{M-2} (M-1)/Gamma(M)^K
///     * { Gamma(M) - Gamma(M, beta2^2/gamma2)
///         + (beta2/sqrt(gamma2))^{M-1} (Gamma((M+1)/2, beta2^2/gamma2) - Gamma((M+1)/2, gamma1)) }^{K-2}
///
/// on gamma1 >= gamma2 >= beta2 >= 0, zero elsewhere. The bracket power is
/// evaluated in logs as (bracket/Gamma(M))^{K-2} so large K does not overflow.
inline double joint_pdf(const PdfParams& params, const GainTriple& t) {
  params.validate();
  if (!t.in_support()) return 0.0;
  if (t.gamma1 == 0.0) return 0.0;
  if (t.beta2 == 0.0 && params.m_antennas > 2) return 0.0;
  if (t.gamma2 == 0.0 && params.k_users > 2) return 0.0;
  const detail::TripleDensity d(params);
  return std::exp(d.log_outer(t.gamma1)) * d.inner(t.gamma1, d.upper_at(t.gamma1), t.gamma2, t.beta2);
}

/// Probability that (gamma1, gamma2, beta2) falls in an axis-aligned box.
/// The box is clipped to the support and each axis is split where the
/// clipping bound enters, so the tensor Gauss-Legendre rule sees smooth
/// integrands on every piece.
inline double joint_pdf_box_mass(const PdfParams& params, double g1_lo, double g1_hi, double g2_lo,
                                 double g2_hi, double b2_lo, double b2_hi) {
  params.validate();
  if (!(g1_lo <= g1_hi && g2_lo <= g2_hi && b2_lo <= b2_hi)) throw domain_error("joint_pdf_box_mass: bad box");
  g2_lo = std::max(g2_lo, 0.0);
  b2_lo = std::max(b2_lo, 0.0);
  g1_lo = std::max({g1_lo, g2_lo, b2_lo});
  if (!(g1_hi > g1_lo) || !(g2_hi > g2_lo) || !(b2_hi > b2_lo)) return 0.0;
  const detail::TripleDensity dens(params);
  const auto& rule = detail::gauss10();

  auto gl = [&](double a, double b, auto&& f) {
    if (!(b > a)) return 0.0;
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double sum = 0.0;
    for (int i = 0; i < 10; ++i) sum += rule.weight[i] * f(c + h * rule.node[i]);
    return sum * h;
  };
  auto split = [&](double a, double b, double cut, auto&& f) {
    if (cut > a && cut < b) return gl(a, cut, f) + gl(cut, b, f);
    return gl(a, b, f);
  };

  auto over_g1 = [&](double g1) {
    const double up1 = dens.upper_at(g1);
    auto over_g2 = [&](double g2) {
      const double hi = std::min(b2_hi, g2);
      return gl(b2_lo, hi, [&](double b2) { return dens.inner(g1, up1, g2, b2); });
    };
    const double hi2 = std::min(g2_hi, g1);
    return std::exp(dens.log_outer(g1)) * split(std::max(g2_lo, b2_lo), hi2, b2_hi, over_g2);
  };
  return split(g1_lo, g1_hi, g2_hi, over_g1);
}

enum class RegionWeight { power, rate };

/// Partition of the support by scheduling decision at cutoff mu.
enum class ScheduleRegion {
  none,                // gamma1 <= mu
  one_user_weak_beta,  // beta2 <= mu
  one_user_low_gain,   // mu < beta2 <= sqrt(mu gamma1), gamma2 >= beta2^2/mu
  two_user_mid,        // mu < beta2 <= sqrt(mu gamma1), gamma2 < beta2^2/mu
  two_user_high,       // beta2 > sqrt(mu gamma1)
};

inline ScheduleRegion classify_region(const GainTriple& t, double mu) {
  if (!(t.gamma1 > mu)) return ScheduleRegion::none;
  if (!(t.beta2 > mu)) return ScheduleRegion::one_user_weak_beta;
  if (t.beta2 > std::sqrt(mu * t.gamma1)) return ScheduleRegion::two_user_high;
  if (t.gamma2 >= t.beta2 * t.beta2 / mu) return ScheduleRegion::one_user_low_gain;
  return ScheduleRegion::two_user_mid;
}

inline bool region_schedules_two(ScheduleRegion r) {
  return r == ScheduleRegion::two_user_mid || r == ScheduleRegion::two_user_high;
}

/// Default quadrature budget: outer rel_tol, middle rel_tol/10, inner rel_tol/100.
inline IntegrationSpec analytic_default_spec() {
  IntegrationSpec s;
  s.rel_tol = 1e-8;
  s.abs_tol = 1e-13;
  return s;
}

/// Average of the chosen weight (allocated sum power or realized sum rate)
/// over the four scheduling regions, integrating gamma2 innermost, then beta2,
/// then gamma1 over [mu, inf).
inline double scheduling_region_integral(const PdfParams& params, double mu, RegionWeight weight,
                                         const IntegrationSpec& spec = analytic_default_spec()) {
  params.validate();
  spec.validate();
  if (!(mu > 0.0)) throw domain_error("scheduling_region_integral: mu must be positive");
  const detail::TripleDensity dens(params);
  IntegrationSpec mid = spec.with_rel_tol(spec.rel_tol * 0.1);
  IntegrationSpec in = spec.with_rel_tol(spec.rel_tol * 0.01);
  mid.abs_tol = spec.abs_tol * 0.1;
  in.abs_tol = spec.abs_tol * 0.01;
  const bool power = weight == RegionWeight::power;
  const double log_mu = std::log(mu);

  auto outer = [&](double g1) {
    const double up1 = dens.upper_at(g1);
    const double w1 = power ? 1.0 / mu - 1.0 / g1 : std::log(g1) - log_mu;
    auto kernel = [&](double g2, double b2) { return dens.inner(g1, up1, g2, b2); };
    auto w2 = [&](double g2, double b2) {
      return power ? 2.0 / mu - (g1 + g2) / (g1 * b2)
                   : std::log(g1) + 2.0 * std::log(b2) - std::log(g2) - 2.0 * log_mu;
    };
    auto one_user = [&](double b2, double lo) {
      return w1 * integrate_1d([&](double g2) { return kernel(g2, b2); }, lo, g1, in);
    };
    auto two_user = [&](double b2, double hi) {
      return integrate_1d([&](double g2) { return w2(g2, b2) * kernel(g2, b2); }, b2, hi, in);
    };
    const double split = std::sqrt(mu * g1);
    double total = 0.0;
    total += integrate_1d([&](double b2) { return one_user(b2, b2); }, 0.0, mu, mid);
    total += integrate_1d(
        [&](double b2) {
          const double edge = std::min(b2 * b2 / mu, g1);
          return one_user(b2, edge) + two_user(b2, edge);
        },
        mu, split, mid);
    total += integrate_1d([&](double b2) { return two_user(b2, g1); }, split, g1, mid);
    return std::exp(dens.log_outer(g1)) * total;
  };

  const double kd = static_cast<double>(params.k_users);
  const double md = static_cast<double>(params.m_antennas);
  const double cst = kd * kd * (md - 1.0) / std::pow(gamma_fn(md), 2) * gamma_fn(md - 1.0);
  auto envelope = [&](double x) {
    return cst * std::exp(-x) * std::pow(x, md - 1.0) * (2.0 / mu + 2.0 * std::abs(std::log(x / mu)));
  };
  return integrate_1d(outer, mu, std::numeric_limits<double>::infinity(), spec, envelope);
}

/// Water-filling cutoff mu solving E[allocated power](mu) = p_avg. The average
/// power is strictly decreasing in mu, so the root is unique.
inline CutoffValue solve_cutoff(const PdfParams& params, double p_avg,
                                const IntegrationSpec& spec = analytic_default_spec(),
                                double rel_tol = 1e-9) {
  params.validate();
  if (!(p_avg > 0.0) || !std::isfinite(p_avg)) throw domain_error("solve_cutoff: p_avg must be positive");
  auto f = [&](double mu) {
    return scheduling_region_integral(params, mu, RegionWeight::power, spec) - p_avg;
  };
  constexpr double mu_floor = 1e-6;
  double lo = 1.0;
  double hi = 1.0;
  if (f(1.0) > 0.0) {
    // Double the upper end until the average power drops below p_avg.
    for (int i = 0;; ++i) {
      if (i > 60) throw bracketing_error("solve_cutoff: no upper bracket for p_avg = " + std::to_string(p_avg));
      lo = hi;
      hi *= 2.0;
      if (f(hi) <= 0.0) break;
    }
  } else {
    for (;;) {
      hi = lo;
      lo = std::max(0.5 * lo, mu_floor);
      if (f(lo) > 0.0) break;
      if (lo == mu_floor)
        throw bracketing_error("solve_cutoff: p_avg = " + std::to_string(p_avg) + " not reached at mu = 1e-6");
    }
  }
  const double mu = find_root(f, lo, hi, rel_tol);
  return CutoffValue{mu, Provenance::analytic, params.k_users, params.m_antennas, p_avg};
}

/// Average sum rate (nats) at a given cutoff.
inline double expected_sum_rate_at(const PdfParams& params, double mu,
                                   const IntegrationSpec& spec = analytic_default_spec()) {
  return scheduling_region_integral(params, mu, RegionWeight::rate, spec);
}

/// Average sum rate (nats) for average power p_avg.
inline double expected_sum_rate(const PdfParams& params, double p_avg,
                                const IntegrationSpec& spec = analytic_default_spec()) {
  const CutoffValue c = solve_cutoff(params, p_avg, spec);
  return expected_sum_rate_at(params, c.mu, spec);
}

}  // namespace zfbf
