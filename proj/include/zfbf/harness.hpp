#pragma once

// Monte Carlo engine, empirical cutoff search, figure sweeps and the
// histogram check of the gain-triple density.

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "zfbf/analytic.hpp"
#include "zfbf/channel.hpp"
#include "zfbf/empirical.hpp"
#include "zfbf/mathkit.hpp"
#include "zfbf/parallel.hpp"
#include "zfbf/scheduler.hpp"
#include "zfbf/zfdp.hpp"

namespace zfbf {

inline constexpr const char* kVersion = "0.1.0";

class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Scheme { zfbf, zfdp };
enum class RateUnit { nats, bits };
enum class OutputFormat { csv, json };

inline const char* to_string(Scheme s) { return s == Scheme::zfbf ? "zfbf" : "zfdp"; }
inline const char* to_string(RateUnit u) { return u == RateUnit::nats ? "nats" : "bits"; }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double convert_rate(double nats, RateUnit unit) {
  return unit == RateUnit::nats ? nats : nats / std::numbers::ln2;
}

struct RunConfig {
  std::size_t k_users = 4;
  std::size_t m_antennas = 2;
  double p_avg_db = 5.0;
  std::size_t trials = 1'000'000;
  std::uint64_t seed = 1;
  Scheme scheme = Scheme::zfbf;
  RateUnit rate_unit = RateUnit::nats;
  OutputFormat output = OutputFormat::csv;
  std::size_t workers = 1;

  double p_linear() const { return db_to_linear(p_avg_db); }

  void validate() const {
    if (trials < 1) throw config_error("trials must be >= 1");
    if (k_users < 2) throw config_error("users (K) must be >= 2");
    if (m_antennas < 2) throw config_error("antennas (M) must be >= 2");
    if (!std::isfinite(p_avg_db)) throw config_error("power-db must be finite");
    if (workers < 1) throw config_error("workers must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Histogram of (gamma1, gamma2, beta2)

class HistogramGrid {
 public:
  HistogramGrid() = default;
  /// Uniform bins on [0, upper[axis]] for each axis.
  HistogramGrid(std::size_t bins, std::array<double, 3> upper) : bins_(bins), upper_(upper) {
    if (bins < 1) throw config_error("histogram needs at least one bin per axis");
    for (double u : upper)
      if (!(u > 0.0)) throw config_error("histogram upper edges must be positive");
    counts_.assign(bins * bins * bins, 0);
  }

  std::size_t bins() const noexcept { return bins_; }
  double edge(std::size_t axis, std::size_t i) const {
    return upper_[axis] * static_cast<double>(i) / static_cast<double>(bins_);
  }
  std::size_t index(std::size_t i, std::size_t j, std::size_t l) const { return (i * bins_ + j) * bins_ + l; }
  std::uint64_t count(std::size_t i, std::size_t j, std::size_t l) const { return counts_[index(i, j, l)]; }
  std::uint64_t total() const noexcept { return total_; }
  std::uint64_t outside() const noexcept { return outside_; }
  std::uint64_t empty_schedules() const noexcept { return empty_; }

  void add(const GainTriple& t, bool empty_schedule) {
    ++total_;
    if (empty_schedule) ++empty_;
    const std::array<double, 3> x{t.gamma1, t.gamma2, t.beta2};
    std::array<std::size_t, 3> idx{};
    for (std::size_t a = 0; a < 3; ++a) {
      if (!(x[a] >= 0.0) || !(x[a] < upper_[a])) {
        ++outside_;
        return;
      }
      idx[a] = std::min(bins_ - 1, static_cast<std::size_t>(x[a] / upper_[a] * static_cast<double>(bins_)));
    }
    ++counts_[index(idx[0], idx[1], idx[2])];
  }

  HistogramGrid cleared() const { return HistogramGrid(bins_, upper_); }

  void merge(const HistogramGrid& o) {
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    total_ += o.total_;
    outside_ += o.outside_;
    empty_ += o.empty_;
  }

  /// True when the bin's box meets gamma1 >= gamma2 >= beta2 >= 0.
  bool bin_meets_support(std::size_t i, std::size_t j, std::size_t l) const {
    return edge(0, i + 1) > edge(1, j) && edge(1, j + 1) > edge(2, l);
  }

 private:
  std::size_t bins_ = 0;
  std::array<double, 3> upper_{};
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  std::uint64_t outside_ = 0;
  std::uint64_t empty_ = 0;
};

// ---------------------------------------------------------------------------
// Monte Carlo

struct MonteCarloStats {
  std::size_t trials = 0;
  double mean_rate = 0.0;  // nats
  double mean_power = 0.0;
  double stderr_rate = 0.0;
  std::vector<std::uint64_t> size_counts;  // index = number of scheduled users
  std::optional<HistogramGrid> histogram;

  double size_frequency(std::size_t n) const {
    return n < size_counts.size() ? static_cast<double>(size_counts[n]) / static_cast<double>(trials) : 0.0;
  }
};

namespace detail {

inline void check_cutoff(const RunConfig& config, const CutoffValue& mu) {
  if (!mu.matches(config.k_users, config.m_antennas))
    throw config_error("cutoff was solved for a different (K, M)");
  if (std::abs(mu.p_avg - config.p_linear()) > 1e-9 * config.p_linear())
    throw config_error("cutoff was solved for a different average power");
  if (!(mu.mu > 0.0)) throw config_error("cutoff must be positive");
}

struct ChunkSums {
  double rate = 0.0;
  double rate_sq = 0.0;
  double power = 0.0;
  std::vector<std::uint64_t> sizes;
};

}  // namespace detail

/// Averages rate and allocated power over `trials` channel draws; trial t
/// uses RngStream(seed, t). Pass a histogram template to also bin the gain
/// triple of every trial (ZFBF only).
inline MonteCarloStats run_monte_carlo(const RunConfig& config, const CutoffValue& mu,
                                       std::optional<HistogramGrid> histogram = std::nullopt) {
  config.validate();
  detail::check_cutoff(config, mu);
  if (histogram && config.scheme != Scheme::zfbf)
    throw config_error("gain-triple histogram is only defined for the zfbf scheme");
  const std::size_t k = config.k_users;
  const std::size_t m = config.m_antennas;
  const std::size_t max_size = config.scheme == Scheme::zfbf ? 2 : std::min(k, m);
  const std::size_t n_chunks = (config.trials + kTrialChunk - 1) / kTrialChunk;
  std::vector<detail::ChunkSums> sums(n_chunks);
  std::mutex hist_mutex;
  if (histogram) histogram = histogram->cleared();
  const std::optional<HistogramGrid> blank = histogram;

  for_each_chunk(config.trials, config.workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
    detail::ChunkSums s;
    s.sizes.assign(max_size + 1, 0);
    std::optional<HistogramGrid> local = blank;
    for (std::size_t t = begin; t < end; ++t) {
      RngStream rng(config.seed, t);
      const ChannelMatrix h = draw_channel_matrix(k, m, rng);
      double rate;
      double power;
      std::size_t n;
      if (config.scheme == Scheme::zfbf) {
        const ScheduleOutcome o = greedy_select(h, mu.mu);
        rate = o.rate;
        power = o.total_power();
        n = o.scheduled.size();
        if (local) local->add({o.gamma1, o.gamma2, o.beta2}, n == 0);
      } else {
        const ZfdpOutcome o = zfdp_select(h, mu.mu);
        rate = o.rate;
        power = o.total_power();
        n = o.scheduled.size();
      }
      s.rate += rate;
      s.rate_sq += rate * rate;
      s.power += power;
      ++s.sizes[n];
    }
    sums[c] = std::move(s);
    if (local) {
      std::lock_guard lock(hist_mutex);  // integer counts: merge order is irrelevant
      histogram->merge(*local);
    }
  });

  MonteCarloStats st;
  st.trials = config.trials;
  st.size_counts.assign(max_size + 1, 0);
  double rate = 0.0;
  double rate_sq = 0.0;
  double power = 0.0;
  for (const auto& s : sums) {
    rate += s.rate;
    rate_sq += s.rate_sq;
    power += s.power;
    for (std::size_t i = 0; i < s.sizes.size(); ++i) st.size_counts[i] += s.sizes[i];
  }
  const double n = static_cast<double>(config.trials);
  st.mean_rate = rate / n;
  st.mean_power = power / n;
  if (config.trials > 1) {
    const double var = std::max(0.0, (rate_sq - n * st.mean_rate * st.mean_rate) / (n - 1.0));
    st.stderr_rate = std::sqrt(var / n);
  }
  st.histogram = std::move(histogram);
  return st;
}

/// Empirical cutoff by common-random-numbers search: the mu-independent part
/// of every trial is computed once, then mu is solved so that the sample mean
/// of allocated power equals P.
inline CutoffValue empirical_cutoff(const RunConfig& config) {
  config.validate();
  if (config.trials < 100'000) throw config_error("empirical cutoff needs at least 1e5 trials");
  const std::size_t k = config.k_users;
  const std::size_t m = config.m_antennas;
  if (config.scheme == Scheme::zfdp)
    return zfdp_empirical_cutoff(k, m, config.p_linear(), config.trials, RngStream(config.seed, 0),
                                 config.workers);
  std::vector<GreedyCandidates> cand(config.trials);
  for_each_chunk(config.trials, config.workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      RngStream rng(config.seed, t);
      cand[t] = greedy_candidates(draw_channel_matrix(k, m, rng));
    }
  });
  auto mean_power = [&](double mu) {
    double total = 0.0;
    for (const auto& c : cand) total += schedule_power(c, mu);
    return total / static_cast<double>(cand.size());
  };
  const double mu = solve_empirical_cutoff(mean_power, config.p_linear());
  return CutoffValue{mu, Provenance::empirical, k, m, config.p_linear()};
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  std::size_t k_users = 0;
  std::size_t m_antennas = 0;
  double p_db = 0.0;
  std::string scheme;  // zfbf_analytic, zfbf_sim or zfdp_sim
  double mu = 0.0;
  double mean_rate = 0.0;  // nats
  double mean_power = 0.0;
  std::size_t trials = 0;
  double stderr_rate = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  const SweepRow* find(std::size_t k, std::size_t m, double p_db, const std::string& scheme) const {
    for (const auto& r : rows)
      if (r.k_users == k && r.m_antennas == m && r.p_db == p_db && r.scheme == scheme) return &r;
    return nullptr;
  }
};

/// Memoized analytic cutoff and average sum rate per (K, M, P_dB).
class AnalyticCache {
 public:
  struct Entry {
    CutoffValue cutoff;
    double mean_rate = 0.0;
    double mean_power = 0.0;
  };

  explicit AnalyticCache(IntegrationSpec spec = analytic_default_spec()) : spec_(spec) {}

  const Entry& get(std::size_t k, std::size_t m, double p_db) {
    const auto key = std::make_tuple(k, m, p_db);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const PdfParams params{k, m};
    Entry e;
    e.cutoff = solve_cutoff(params, db_to_linear(p_db), spec_);
    e.mean_rate = expected_sum_rate_at(params, e.cutoff.mu, spec_);
    e.mean_power = scheduling_region_integral(params, e.cutoff.mu, RegionWeight::power, spec_);
    return cache_.emplace(key, e).first->second;
  }

 private:
  IntegrationSpec spec_;
  std::map<std::tuple<std::size_t, std::size_t, double>, Entry> cache_;
};

struct SweepOptions {
  std::size_t trials = 1'000'000;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  bool simulate_zfbf = true;
};

namespace detail {

inline SweepRow sim_row(std::size_t k, std::size_t m, double p_db, const char* scheme, const CutoffValue& mu,
                        const MonteCarloStats& st) {
  return SweepRow{k, m, p_db, scheme, mu.mu, st.mean_rate, st.mean_power, st.trials, st.stderr_rate};
}

inline void sweep_point(SweepResult& out, AnalyticCache& cache, std::size_t k, std::size_t m, double p_db,
                        const SweepOptions& opt) {
  const auto& a = cache.get(k, m, p_db);
  out.rows.push_back(SweepRow{k, m, p_db, "zfbf_analytic", a.cutoff.mu, a.mean_rate, a.mean_power, 0, 0.0});

  RunConfig cfg;
  cfg.k_users = k;
  cfg.m_antennas = m;
  cfg.p_avg_db = p_db;
  cfg.trials = opt.trials;
  cfg.seed = opt.seed;
  cfg.workers = opt.workers;
  if (opt.simulate_zfbf) {
    cfg.scheme = Scheme::zfbf;
    out.rows.push_back(sim_row(k, m, p_db, "zfbf_sim", a.cutoff, run_monte_carlo(cfg, a.cutoff)));
  }
  cfg.scheme = Scheme::zfdp;
  const CutoffValue zmu = empirical_cutoff(cfg);
  cfg.seed = opt.seed + 1;  // fresh draws for the reported averages
  out.rows.push_back(sim_row(k, m, p_db, "zfdp_sim", zmu, run_monte_carlo(cfg, zmu)));
}

}  // namespace detail

/// Sum rate against K: analytic and simulated ZFBF plus simulated ZF DP.
inline SweepResult reproduce_fig1(const std::vector<std::size_t>& m_list, double p_db,
                                  const std::vector<std::size_t>& k_list, const SweepOptions& opt,
                                  AnalyticCache* cache = nullptr) {
  AnalyticCache local;
  AnalyticCache& c = cache ? *cache : local;
  SweepResult out;
  for (std::size_t m : m_list)
    for (std::size_t k : k_list) detail::sweep_point(out, c, k, m, p_db, opt);
  return out;
}

/// Cutoffs against K for every (M, P): analytic ZFBF and empirical ZF DP.
inline SweepResult reproduce_fig2(const std::vector<std::size_t>& m_list, const std::vector<double>& p_db_list,
                                  const std::vector<std::size_t>& k_list, const SweepOptions& opt,
                                  AnalyticCache* cache = nullptr) {
  AnalyticCache local;
  AnalyticCache& c = cache ? *cache : local;
  SweepOptions o = opt;
  o.simulate_zfbf = false;
  SweepResult out;
  for (std::size_t m : m_list)
    for (double p_db : p_db_list)
      for (std::size_t k : k_list) detail::sweep_point(out, c, k, m, p_db, o);
  return out;
}

// ---------------------------------------------------------------------------
// Density validation

struct BinResidual {
  std::size_t i = 0, j = 0, l = 0;
  double empirical = 0.0;
  double analytic = 0.0;
};

struct PdfReport {
  double tv_distance = 0.0;
  double max_abs_residual = 0.0;
  double outside_empirical = 0.0;
  double outside_analytic = 0.0;
  std::vector<BinResidual> residuals;  // support bins only
  CutoffValue cutoff;
  MonteCarloStats stats;
};

/// Upper histogram edge: the point where Pr[gamma1 > x] = 1e-3 for the max of
/// K Gamma(M, 1) norms.
inline double histogram_upper_edge(std::size_t k, std::size_t m) {
  const double md = static_cast<double>(m);
  const double kd = static_cast<double>(k);
  auto tail = [&](double x) {
    return 1.0 - std::pow(lower_incomplete_gamma(md, x) / gamma_fn(md), kd) - 1e-3;
  };
  return find_root(tail, 1e-3, 200.0, 1e-6);
}

/// Bins the scheduler's gain triple over `trials` draws and compares bin
/// frequencies with the density's bin masses. The mass beyond the grid
/// enters the total-variation distance as one extra bin.
inline PdfReport pdf_validate(std::size_t k, std::size_t m, double p_db, std::size_t trials, std::size_t bins,
                              std::uint64_t seed, std::size_t workers = 1,
                              std::optional<CutoffValue> cutoff = std::nullopt) {
  RunConfig cfg;
  cfg.k_users = k;
  cfg.m_antennas = m;
  cfg.p_avg_db = p_db;
  cfg.trials = trials;
  cfg.seed = seed;
  cfg.workers = workers;
  cfg.validate();
  const PdfParams params{k, m};
  PdfReport rep;
  rep.cutoff = cutoff ? *cutoff : solve_cutoff(params, cfg.p_linear());
  const double upper = histogram_upper_edge(k, m);
  rep.stats = run_monte_carlo(cfg, rep.cutoff, HistogramGrid(bins, {upper, upper, upper}));
  const HistogramGrid& h = *rep.stats.histogram;
  const double n = static_cast<double>(h.total());
  double inside_analytic = 0.0;
  double tv = 0.0;
  for (std::size_t i = 0; i < bins; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      for (std::size_t l = 0; l <= j; ++l) {
        if (!h.bin_meets_support(i, j, l)) continue;
        const double pa = joint_pdf_box_mass(params, h.edge(0, i), h.edge(0, i + 1), h.edge(1, j),
                                             h.edge(1, j + 1), h.edge(2, l), h.edge(2, l + 1));
        const double pe = static_cast<double>(h.count(i, j, l)) / n;
        inside_analytic += pa;
        tv += std::abs(pe - pa);
        rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(pe - pa));
        rep.residuals.push_back({i, j, l, pe, pa});
      }
  rep.outside_empirical = static_cast<double>(h.outside()) / n;
  rep.outside_analytic = std::max(0.0, 1.0 - inside_analytic);
  tv += std::abs(rep.outside_empirical - rep.outside_analytic);
  rep.tv_distance = 0.5 * tv;
  return rep;
}

// ---------------------------------------------------------------------------
// Output

/// Locale-independent shortest form with 12 significant digits.
inline std::string format_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return std::string(buf, r.ptr);
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& res) {
  os << "K,M,P_db,scheme,mu,inv_mu,mean_rate_nats,mean_rate_bits,mean_power,trials,stderr_rate_nats\n";
  for (const auto& r : res.rows) {
    os << r.k_users << ',' << r.m_antennas << ',' << format_real(r.p_db) << ',' << r.scheme << ','
       << format_real(r.mu) << ',' << format_real(1.0 / r.mu) << ',' << format_real(r.mean_rate) << ','
       << format_real(convert_rate(r.mean_rate, RateUnit::bits)) << ',' << format_real(r.mean_power) << ','
       << r.trials << ',' << format_real(r.stderr_rate) << '\n';
  }
}

/// gnuplot script for the sweep CSV: sum rate (fig1) or 1/mu (fig2) against K.
inline void write_plot_script(std::ostream& os, const std::string& csv_path, bool cutoff_plot) {
  os << "# gnuplot script; run: gnuplot -p <this file>\n"
     << "set datafile separator ','\n"
     << "set key left top\n"
     << "set xlabel 'K (users)'\n";
  if (cutoff_plot) {
    os << "set ylabel '1/mu'\n"
       << "plot for [s in 'zfbf_analytic zfdp_sim'] for [m in '2 4'] for [p in '0 5'] '" << csv_path
       << "' using (strcol(4) eq s && strcol(2) eq m && strcol(3) eq p ? $1 : 1/0):6 "
          "with linespoints title s.' M='.m.' P='.p.' dB'\n";
  } else {
    os << "set ylabel 'average sum rate (bits/s/Hz)'\n"
       << "plot for [s in 'zfbf_analytic zfbf_sim zfdp_sim'] for [m in '2 4'] '" << csv_path
       << "' using (strcol(4) eq s && strcol(2) eq m ? $1 : 1/0):8 with linespoints title s.' M='.m\n";
  }
}

}  // namespace zfbf
