#pragma once

// Reduced-size consistency checks run by `zfbf selftest`: closed form vs
// quadrature, analytic vs empirical cutoff, and per-trial structure.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "zfbf/analytic.hpp"
#include "zfbf/harness.hpp"

namespace zfbf {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline std::vector<CheckResult> run_selftest(std::uint64_t seed = 7, std::size_t workers = 1) {
  std::vector<CheckResult> out;
  auto record = [&](std::string name, bool ok, std::string detail) {
    out.push_back({std::move(name), ok, std::move(detail)});
  };

  {
    // S1 mass against direct quadrature of the unordered density.
    double worst = 0.0;
    for (std::size_t m : {2u, 3u, 4u}) {
      const double g1 = 2.5, g2 = 1.2, b2 = 0.7;
      const double a = b2 * b2 / g2;
      IntegrationSpec s;
      s.rel_tol = 1e-12;
      s.abs_tol = 0.0;
      auto zint = [&](double v, double hi) {
        return integrate_1d([&](double z) { return unordered_pdf(v, z, m); }, 0.0, hi, s);
      };
      const double brute = integrate_1d([&](double v) { return zint(v, v); }, 0.0, a, s) +
                           integrate_1d([&](double v) { return zint(v, std::sqrt(a * v)); }, a, g1, s);
      worst = std::max(worst, std::abs(s1_integral(g1, g2, b2, m) - brute) / brute);
    }
    record("s1_closed_form", worst < 1e-8, "max rel err " + format_real(worst));
  }

  {
    const PdfParams p{3, 2};
    IntegrationSpec s;
    s.rel_tol = 1e-7;
    s.abs_tol = 1e-12;
    const detail::TripleDensity d(p);
    const double mass = integrate_1d(
        [&](double g1) {
          const double up = d.upper_at(g1);
          return std::exp(d.log_outer(g1)) *
                 integrate_1d([&](double g2) {
                   return integrate_1d([&](double b2) { return d.inner(g1, up, g2, b2); }, 0.0, g2, s);
                 }, 0.0, g1, s);
        },
        0.0, std::numeric_limits<double>::infinity(), s,
        [](double x) { return 10.0 * std::exp(-x) * x * x; });
    record("pdf_normalization_K3_M2", std::abs(mass - 1.0) < 1e-3, "mass " + format_real(mass));
  }

  RunConfig cfg;
  cfg.k_users = 4;
  cfg.m_antennas = 2;
  cfg.p_avg_db = 5.0;
  cfg.trials = 200'000;
  cfg.seed = seed;
  cfg.workers = workers;
  const CutoffValue analytic = solve_cutoff({4, 2}, cfg.p_linear());
  const CutoffValue empirical = empirical_cutoff(cfg);
  const double rel = std::abs(analytic.mu - empirical.mu) / analytic.mu;
  record("cutoff_cross_check", rel < 0.02,
         "analytic " + format_real(analytic.mu) + " empirical " + format_real(empirical.mu));

  cfg.seed = seed + 1;
  const MonteCarloStats st = run_monte_carlo(cfg, analytic);
  const double prel = std::abs(st.mean_power - cfg.p_linear()) / cfg.p_linear();
  record("power_closure", prel < 0.02, "mean power " + format_real(st.mean_power));
  const double ar = expected_sum_rate_at({4, 2}, analytic.mu);
  const double rrel = std::abs(ar - st.mean_rate) / ar;
  record("sum_rate_match", rrel < 0.02, "analytic " + format_real(ar) + " simulated " + format_real(st.mean_rate));

  {
    bool ok = true;
    RngStream rng(seed, 99);
    for (int t = 0; t < 2000 && ok; ++t) {
      const ChannelMatrix h = draw_channel_matrix(6, 3, rng);
      const ScheduleOutcome o = greedy_select(h, 0.3);
      if (o.scheduled.size() != 2) continue;
      const CMatrix hw = h.rows(o.scheduled) * o.beams.w;
      ok = std::abs(hw(0, 1)) < 1e-8 && std::abs(hw(1, 0)) < 1e-8 &&
           std::abs(o.gamma1 * o.beta2 - o.gamma2 * o.beta1) <= 1e-10 * o.gamma1 * o.beta2;
    }
    record("zero_interference", ok, ok ? "2000 trials" : "violation found");
  }
  return out;
}

}  // namespace zfbf
