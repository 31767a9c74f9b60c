#pragma once

// Special functions, counter-based sampling, adaptive quadrature and
// bracketed root finding shared by the rest of the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace zfbf {

using cplx = std::complex<double>;

// Argument outside the mathematical domain of an operation.
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Adaptive quadrature ran out of subdivisions.
class non_convergence_error : public std::runtime_error {
 public:
  non_convergence_error(const std::string& what, double estimate, double error_bound)
      : std::runtime_error(what), estimate_(estimate), error_bound_(error_bound) {}
  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

// Root search interval does not contain a sign change.
class bracketing_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IntegrationSpec {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  // Minimum extent of a semi-infinite axis before the envelope test applies.
  double tail_cut = 8.0;
  int max_subdivisions = 2000;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol >= 0.0) || !(tail_cut > 0.0) || max_subdivisions < 1)
      throw domain_error("IntegrationSpec: invalid tolerance or subdivision settings");
  }

  IntegrationSpec with_rel_tol(double r) const {
    IntegrationSpec s = *this;
    s.rel_tol = r;
    return s;
  }
};

namespace detail {

// 2s must be a positive integer.
inline int twice_half_integer(double s) {
  const double t = 2.0 * s;
  const double r = std::round(t);
  if (!(s > 0.0) || std::abs(t - r) > 1e-12 * std::max(1.0, t) || r > 400.0)
    throw domain_error("argument must be a positive multiple of 1/2, got " + std::to_string(s));
  return static_cast<int>(r);
}

}  // namespace detail

/// Gamma function restricted to positive half-integers.
inline double gamma_fn(double s) {
  const int n2 = detail::twice_half_integer(s);
  double g;
  double x;
  if (n2 % 2 == 0) {
    g = 1.0;  // Gamma(1)
    x = 1.0;
  } else {
    g = std::sqrt(std::numbers::pi);  // Gamma(1/2)
    x = 0.5;
  }
  for (; x + 0.5 < s; x += 1.0) g *= x;
  return g;
}

/// Upper incomplete gamma Gamma(s, x) for half-integer s.
///
/// Integer s uses the finite sum (s-1)! e^{-x} sum_{j<s} x^j / j!. Half-integer
/// s starts from Gamma(1/2, x) = sqrt(pi) erfc(sqrt(x)) and climbs with
/// Gamma(s+1, x) = s Gamma(s, x) + x^s e^{-x}. Both recurrences only add
/// positive terms, so no cancellation occurs.
inline double upper_incomplete_gamma(double s, double x) {
  const int n2 = detail::twice_half_integer(s);
  if (!(x >= 0.0)) throw domain_error("upper_incomplete_gamma: x must be nonnegative");
  if (x == 0.0) return gamma_fn(s);
  const double ex = std::exp(-x);
  double a;
  double g;
  if (n2 % 2 == 0) {
    a = 1.0;
    g = ex;  // Gamma(1, x)
  } else {
    a = 0.5;
    g = std::sqrt(std::numbers::pi) * std::erfc(std::sqrt(x));
  }
  for (; a + 0.5 < s; a += 1.0) g = a * g + std::pow(x, a) * ex;
  return g;
}

/// Lower incomplete gamma gamma(s, x) = Gamma(s) - Gamma(s, x).
/// Uses the power series below s + 1 to avoid cancellation for small x.
inline double lower_incomplete_gamma(double s, double x) {
  detail::twice_half_integer(s);
  if (!(x >= 0.0)) throw domain_error("lower_incomplete_gamma: x must be nonnegative");
  if (x == 0.0) return 0.0;
  if (x >= s + 1.0) return gamma_fn(s) - upper_incomplete_gamma(s, x);
  double term = 1.0 / s;
  double sum = term;
  for (int n = 1; n < 500; ++n) {
    term *= x / (s + n);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum * std::exp(s * std::log(x) - x);
}

/// Integral of t^{s-1} e^{-t} over [x0, x1], x0 <= x1, evaluated without
/// subtracting two nearly equal tails.
inline double incomplete_gamma_between(double s, double x0, double x1) {
  if (!(x0 <= x1)) throw domain_error("incomplete_gamma_between: x0 must not exceed x1");
  if (x0 == x1) return 0.0;
  if (x1 < s + 1.0) return lower_incomplete_gamma(s, x1) - lower_incomplete_gamma(s, x0);
  if (x0 > s + 1.0) return upper_incomplete_gamma(s, x0) - upper_incomplete_gamma(s, x1);
  return gamma_fn(s) - lower_incomplete_gamma(s, x0) - upper_incomplete_gamma(s, x1);
}

// ---------------------------------------------------------------------------
// Quadrature

namespace detail {

struct GaussRule {
  std::array<double, 10> node{};
  std::array<double, 10> weight{};
};

// 10-point Gauss-Legendre rule on [-1, 1] from Newton iteration on P_10.
inline const GaussRule& gauss10() {
  static const GaussRule rule = [] {
    GaussRule r;
    constexpr int n = 10;
    for (int i = 0; i < n; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      r.node[i] = x;
      r.weight[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
  }();
  return rule;
}

template <class F>
double gauss10_on(F& f, double a, double b) {
  const auto& r = gauss10();
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < 10; ++i) s += r.weight[i] * f(c + h * r.node[i]);
  return s * h;
}

struct Panel {
  double a, b, coarse, left, right, err;
  bool operator<(const Panel& o) const { return err < o.err; }
};

template <class F>
Panel make_panel(F& f, double a, double b, double coarse) {
  const double m = 0.5 * (a + b);
  const double l = gauss10_on(f, a, m);
  const double r = gauss10_on(f, m, b);
  return Panel{a, b, coarse, l, r, std::abs(l + r - coarse)};
}

// Globally adaptive bisection: each panel compares the 10-point rule on the
// whole panel with the sum over its halves; the worst panel is split next.
template <class F>
double integrate_finite(F& f, double a, double b, const IntegrationSpec& spec) {
  if (a == b) return 0.0;
  std::priority_queue<Panel> heap;
  heap.push(make_panel(f, a, b, gauss10_on(f, a, b)));
  double total = heap.top().left + heap.top().right;
  double err = heap.top().err;
  int panels = 1;
  while (err > std::max(spec.abs_tol, spec.rel_tol * std::abs(total))) {
    if (panels >= spec.max_subdivisions)
      throw non_convergence_error("integrate_1d: subdivision limit reached", total, err);
    Panel p = heap.top();
    heap.pop();
    const double m = 0.5 * (p.a + p.b);
    if (!(m > p.a && m < p.b)) {
      throw non_convergence_error("integrate_1d: panel width underflow", total, err);
    }
    Panel lp = make_panel(f, p.a, m, p.left);
    Panel rp = make_panel(f, m, p.b, p.right);
    total += (lp.left + lp.right + rp.left + rp.right) - (p.left + p.right);
    err += lp.err + rp.err - p.err;
    heap.push(lp);
    heap.push(rp);
    ++panels;
    if (err < 0.0) err = 0.0;
  }
  // Recompute from the final partition; the running sum accumulates rounding.
  double sum = 0.0;
  while (!heap.empty()) {
    sum += heap.top().left + heap.top().right;
    heap.pop();
  }
  return sum;
}

}  // namespace detail

/// Default exponential envelope for semi-infinite integrands.
struct exp_envelope {
  double operator()(double x) const { return std::exp(-x); }
};

/// Upper truncation point of [a, inf): the first x >= a + tail_cut at which
/// envelope(x) drops below abs_tol * 1e-3 (or 1e-300 when abs_tol is zero).
template <class Envelope = exp_envelope>
double truncation_point(double a, const IntegrationSpec& spec, Envelope env = {}) {
  const double floor_v = std::max(spec.abs_tol * 1e-3, 1e-300);
  double x = a + spec.tail_cut;
  for (int i = 0; i < 100000 && !(env(x) < floor_v); ++i) x += 0.5 * spec.tail_cut;
  return x;
}

/// Adaptive quadrature of f over [a, b]; b may be +infinity, in which case the
/// axis is truncated where `env` (an upper envelope of |f|, e^{-x} by default)
/// falls below abs_tol * 1e-3.
template <class F, class Envelope = exp_envelope>
double integrate_1d(F&& f, double a, double b, const IntegrationSpec& spec = {},
                    Envelope env = {}) {
  spec.validate();
  if (std::isinf(b)) {
    if (b < 0) throw domain_error("integrate_1d: upper limit -inf not supported");
    b = truncation_point(a, spec, env);
  }
  if (!(b >= a)) throw domain_error("integrate_1d: require a <= b");
  return detail::integrate_finite(f, a, b, spec);
}

/// Bracketed root of a continuous monotone function by Brent's method:
/// inverse quadratic or secant steps when they land well inside the bracket,
/// bisection otherwise. Every iterate stays inside [lo, hi]; stops once the
/// bracket half-width is at most rel_tol * |x| / 2.
template <class F>
double find_root(F&& f, double lo, double hi, double rel_tol = 1e-12, int max_iter = 500) {
  if (!(lo < hi)) throw domain_error("find_root: require lo < hi");
  double a = lo;
  double b = hi;
  double fa = f(a);
  double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (std::signbit(fa) == std::signbit(fb))
    throw bracketing_error("find_root: no sign change on [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]");
  double c = a;
  double fc = fa;
  double d = b - a;
  double e = d;
  for (int it = 0; it < max_iter; ++it) {
    if (std::signbit(fb) == std::signbit(fc)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = 0.5 * rel_tol * std::abs(b) + 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) +
                       std::numeric_limits<double>::min();
    const double m = 0.5 * (c - b);
    if (std::abs(m) <= tol || fb == 0.0) return b;
    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      double p;
      double q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        const double qa = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
        q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0)
        q = -q;
      else
        p = -p;
      if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol ? d : (m > 0.0 ? tol : -tol);
    fb = f(b);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Sampling

/// Counter-based generator: draw n of stream (seed, stream_id) is a pure
/// function of (seed, stream_id, n), so results never depend on how trials
/// are distributed across workers.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id), key_(mix(mix(seed) ^ (stream_id * 0xD1B54A32D192ED03ull))) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64() noexcept {
    return mix(key_ + 0x9E3779B97F4A7C15ull * (++counter_));
  }

  /// Uniform on (0, 1].
  double uniform_open0() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Circularly symmetric CN(0, 1): real and imaginary parts N(0, 1/2), via
  /// Box-Muller.
  cplx complex_normal() noexcept {
    const double r = std::sqrt(-std::log(uniform_open0()));
    const double theta = 2.0 * std::numbers::pi * uniform_open0();
    return {r * std::cos(theta), r * std::sin(theta)};
  }

 private:
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline std::vector<cplx> sample_complex_gaussian_vector(std::size_t m, RngStream& rng) {
  if (m < 1) throw domain_error("sample_complex_gaussian_vector: m must be >= 1");
  std::vector<cplx> v(m);
  for (auto& x : v) x = rng.complex_normal();
  return v;
}

}  // namespace zfbf
