#pragma once

#include <cmath>
#include <string>

#include "zfbf/mathkit.hpp"

namespace zfbf {

/// Solves mean_power(mu) = p_avg for a sample-average power curve. With
/// common random numbers the curve is nonincreasing in mu trial by trial,
/// so bracketed search converges to a single crossing.
template <class MeanPower>
double solve_empirical_cutoff(MeanPower&& mean_power, double p_avg, double rel_tol = 1e-10) {
  if (!(p_avg > 0.0)) throw domain_error("empirical cutoff: p_avg must be positive");
  auto f = [&](double mu) { return mean_power(mu) - p_avg; };
  double lo = 1.0;
  double hi = 1.0;
  if (f(1.0) > 0.0) {
    do {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e12) throw bracketing_error("empirical cutoff: no upper bracket");
    } while (f(hi) > 0.0);
  } else {
    do {
      hi = lo;
      lo *= 0.5;
      if (lo < 1e-9) throw bracketing_error("empirical cutoff: p_avg = " + std::to_string(p_avg) + " unreachable");
    } while (f(lo) <= 0.0);
  }
  return find_root(f, lo, hi, rel_tol);
}

}  // namespace zfbf
