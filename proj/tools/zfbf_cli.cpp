// zfbf: command-line front end for the ZFBF scheduling laboratory.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
// 4 self-test failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "zfbf/zfbf.hpp"

namespace {

using nlohmann::json;
using namespace zfbf;

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitSelftest = 4;

struct CliOptions {
  RunConfig run;
  std::string out_path;
  std::string cutoff_method = "analytic";
  std::size_t bins = 20;
  std::vector<std::size_t> m_list{2, 4};
  std::vector<double> p_list{0.0, 5.0};
  std::size_t k_min = 2;
  std::size_t k_max = 12;
};

// Writes to --out when given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw config_error("cannot open output file " + path);
    }
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

json config_json(const RunConfig& c) {
  return json{{"users", c.k_users},           {"antennas", c.m_antennas},
              {"power_db", c.p_avg_db},        {"power_linear", c.p_linear()},
              {"trials", c.trials},            {"seed", c.seed},
              {"scheme", to_string(c.scheme)}, {"unit", to_string(c.rate_unit)},
              {"workers", c.workers}};
}

void emit(const CliOptions& o, const std::string& command, const std::vector<std::pair<std::string, json>>& fields) {
  Sink sink(o.out_path);
  auto& os = sink.os();
  if (o.run.output == OutputFormat::json) {
    json results = json::object();
    for (const auto& [k, v] : fields) results[k] = v;
    json doc{{"version", kVersion}, {"command", command}, {"config", config_json(o.run)}, {"results", results}};
    os << doc.dump(2) << '\n';
    return;
  }
  for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << fields[i].first;
  os << '\n';
  for (std::size_t i = 0; i < fields.size(); ++i) {
    os << (i ? "," : "");
    const json& v = fields[i].second;
    if (v.is_number_float())
      os << format_real(v.get<double>());
    else if (v.is_string())
      os << v.get<std::string>();
    else
      os << v.dump();
  }
  os << '\n';
}

CutoffValue cutoff_for(const CliOptions& o) {
  if (o.cutoff_method == "empirical" || o.run.scheme == Scheme::zfdp) return empirical_cutoff(o.run);
  return solve_cutoff({o.run.k_users, o.run.m_antennas}, o.run.p_linear());
}

int cmd_cutoff(const CliOptions& o) {
  if (o.run.scheme == Scheme::zfdp && o.cutoff_method == "analytic")
    throw config_error("no analytic cutoff exists for the zfdp scheme; request the empirical cutoff");
  const CutoffValue c = cutoff_for(o);
  emit(o, "cutoff",
       {{"K", c.k_users}, {"M", c.m_antennas}, {"P_db", o.run.p_avg_db}, {"scheme", to_string(o.run.scheme)},
        {"provenance", to_string(c.provenance)}, {"mu", c.mu}, {"inv_mu", 1.0 / c.mu}});
  return 0;
}

int cmd_simulate(const CliOptions& o) {
  const CutoffValue c = cutoff_for(o);
  RunConfig cfg = o.run;
  if (c.provenance == Provenance::empirical) cfg.seed = o.run.seed + 1;
  const MonteCarloStats st = run_monte_carlo(cfg, c);
  std::vector<std::pair<std::string, json>> f{
      {"K", cfg.k_users},
      {"M", cfg.m_antennas},
      {"P_db", cfg.p_avg_db},
      {"scheme", to_string(cfg.scheme)},
      {"provenance", to_string(c.provenance)},
      {"mu", c.mu},
      {"mean_rate", convert_rate(st.mean_rate, cfg.rate_unit)},
      {"stderr_rate", convert_rate(st.stderr_rate, cfg.rate_unit)},
      {"unit", to_string(cfg.rate_unit)},
      {"mean_power", st.mean_power},
      {"trials", st.trials}};
  for (std::size_t n = 0; n < st.size_counts.size(); ++n)
    f.emplace_back("freq_" + std::to_string(n) + "_users", st.size_frequency(n));
  emit(o, "simulate", f);
  return 0;
}

int cmd_sumrate(const CliOptions& o) {
  const PdfParams params{o.run.k_users, o.run.m_antennas};
  const CutoffValue c = solve_cutoff(params, o.run.p_linear());
  const double rate = expected_sum_rate_at(params, c.mu);
  emit(o, "sumrate-analytic",
       {{"K", c.k_users}, {"M", c.m_antennas}, {"P_db", o.run.p_avg_db}, {"mu", c.mu},
        {"mean_rate", convert_rate(rate, o.run.rate_unit)}, {"unit", to_string(o.run.rate_unit)}});
  return 0;
}

int cmd_pdf_check(const CliOptions& o) {
  const PdfReport r = pdf_validate(o.run.k_users, o.run.m_antennas, o.run.p_avg_db, o.run.trials, o.bins,
                                   o.run.seed, o.run.workers);
  emit(o, "pdf-check",
       {{"K", o.run.k_users}, {"M", o.run.m_antennas}, {"trials", o.run.trials}, {"bins", o.bins},
        {"tv_distance", r.tv_distance}, {"max_abs_residual", r.max_abs_residual},
        {"outside_empirical", r.outside_empirical}, {"outside_analytic", r.outside_analytic},
        {"empty_fraction", r.stats.size_frequency(0)}});
  return 0;
}

std::vector<std::size_t> k_range(const CliOptions& o) {
  if (o.k_min < 2 || o.k_max < o.k_min) throw config_error("need 2 <= k-min <= k-max");
  std::vector<std::size_t> ks;
  for (std::size_t k = o.k_min; k <= o.k_max; ++k) ks.push_back(k);
  return ks;
}

int emit_sweep(const CliOptions& o, const std::string& command, const SweepResult& res, bool cutoff_plot) {
  Sink sink(o.out_path);
  if (o.run.output == OutputFormat::json) {
    json rows = json::array();
    for (const auto& r : res.rows)
      rows.push_back({{"K", r.k_users},
                      {"M", r.m_antennas},
                      {"P_db", r.p_db},
                      {"scheme", r.scheme},
                      {"mu", r.mu},
                      {"inv_mu", 1.0 / r.mu},
                      {"mean_rate", convert_rate(r.mean_rate, o.run.rate_unit)},
                      {"mean_power", r.mean_power},
                      {"trials", r.trials},
                      {"stderr_rate", convert_rate(r.stderr_rate, o.run.rate_unit)}});
    json doc{{"version", kVersion}, {"command", command}, {"config", config_json(o.run)}, {"results", rows}};
    sink.os() << doc.dump(2) << '\n';
  } else {
    write_sweep_csv(sink.os(), res);
    if (!o.out_path.empty()) {
      std::ofstream gp(o.out_path + ".gp");
      write_plot_script(gp, o.out_path, cutoff_plot);
    }
  }
  return 0;
}

int cmd_fig1(const CliOptions& o) {
  SweepOptions so{o.run.trials, o.run.seed, o.run.workers, true};
  return emit_sweep(o, "fig1", reproduce_fig1(o.m_list, o.run.p_avg_db, k_range(o), so), false);
}

int cmd_fig2(const CliOptions& o) {
  SweepOptions so{o.run.trials, o.run.seed, o.run.workers, false};
  return emit_sweep(o, "fig2", reproduce_fig2(o.m_list, o.p_list, k_range(o), so), true);
}

int cmd_selftest(const CliOptions& o) {
  bool ok = true;
  for (const auto& c : run_selftest(o.run.seed, o.run.workers)) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    ok = ok && c.passed;
  }
  return ok ? 0 : kExitSelftest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Greedy ZFBF scheduling with water-filling: analytic and Monte Carlo engines"};
  app.set_config("--config", "", "flat key=value file mirroring the long flags");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kVersion));

  CliOptions o;
  std::string scheme = "zfbf", unit = "nats", format = "csv";
  app.add_option("--users,-K", o.run.k_users, "number of users K")->capture_default_str();
  app.add_option("--antennas,-M", o.run.m_antennas, "transmit antennas M")->capture_default_str();
  app.add_option("--power-db,-P", o.run.p_avg_db, "average power P in dB")->capture_default_str();
  app.add_option("--trials,-n", o.run.trials, "Monte Carlo trials")->capture_default_str();
  app.add_option("--seed", o.run.seed, "RNG seed")->capture_default_str();
  app.add_option("--scheme", scheme, "zfbf or zfdp")->check(CLI::IsMember({"zfbf", "zfdp"}))->capture_default_str();
  app.add_option("--unit", unit, "rate unit")->check(CLI::IsMember({"nats", "bits"}))->capture_default_str();
  app.add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  app.add_option("--workers", o.run.workers, "worker threads")->capture_default_str();
  app.add_option("--out", o.out_path, "output file (default stdout)");

  auto* cutoff = app.add_subcommand("cutoff", "water-filling cutoff mu");
  cutoff->add_option("--method", o.cutoff_method, "analytic or empirical")
      ->check(CLI::IsMember({"analytic", "empirical"}))
      ->capture_default_str();
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo average rate and power");
  simulate->add_option("--cutoff-method", o.cutoff_method, "cutoff used for zfbf")
      ->check(CLI::IsMember({"analytic", "empirical"}))
      ->capture_default_str();
  auto* sumrate = app.add_subcommand("sumrate-analytic", "average sum rate from the closed-form density");
  auto* pdf = app.add_subcommand("pdf-check", "histogram of the gain triple against its density");
  pdf->add_option("--bins", o.bins, "bins per axis")->capture_default_str();
  auto* fig1 = app.add_subcommand("fig1", "sum rate against K");
  auto* fig2 = app.add_subcommand("fig2", "inverse cutoff against K");
  for (auto* sub : {fig1, fig2}) {
    sub->add_option("--m-list", o.m_list, "antenna counts")->delimiter(',')->capture_default_str();
    sub->add_option("--k-min", o.k_min)->capture_default_str();
    sub->add_option("--k-max", o.k_max)->capture_default_str();
  }
  fig2->add_option("--p-list", o.p_list, "powers in dB")->delimiter(',')->capture_default_str();
  auto* selftest = app.add_subcommand("selftest", "reduced-size consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  o.run.scheme = scheme == "zfdp" ? Scheme::zfdp : Scheme::zfbf;
  o.run.rate_unit = unit == "bits" ? RateUnit::bits : RateUnit::nats;
  o.run.output = format == "json" ? OutputFormat::json : OutputFormat::csv;

  try {
    o.run.validate();
    if (*cutoff) return cmd_cutoff(o);
    if (*simulate) return cmd_simulate(o);
    if (*sumrate) return cmd_sumrate(o);
    if (*pdf) return cmd_pdf_check(o);
    if (*fig1) return cmd_fig1(o);
    if (*fig2) return cmd_fig2(o);
    if (*selftest) return cmd_selftest(o);
  } catch (const non_convergence_error& e) {
    std::cerr << "error: " << e.what() << " (estimate " << e.estimate() << ", error bound " << e.error_bound()
              << ")\n";
    return kExitNumeric;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const bracketing_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const domain_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const decomposition_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const dimension_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
