// Command line front end: run, suite, rmt, sweep-kappa, fd-ref.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rfm/analysis.hpp"
#include "rfm/config.hpp"
#include "rfm/error.hpp"
#include "rfm/fd_wave.hpp"
#include "rfm/runner.hpp"
#include "rfm/system.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::string out = "out";
  std::string seeds;
  std::size_t workers = 1;
  std::size_t eval_stride = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* opt = cmd->add_option("--config", f.config, "Config file (key = value lines)");
  if (config_required) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
  cmd->add_option("--seeds", f.seeds, "Seed list, e.g. 0,1,2 or 0-4");
  cmd->add_option("--workers", f.workers, "Concurrent seeds")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--eval-stride", f.eval_stride, "Test-error evaluation stride");
}

rfm::Config load(const CommonFlags& f) {
  rfm::Config cfg = f.config.empty() ? rfm::Config{} : rfm::Config::load(f.config);
  if (!f.seeds.empty()) cfg.set("seeds", f.seeds);
  if (f.eval_stride > 0) cfg.set("eval_stride", std::to_string(f.eval_stride));
  return cfg;
}

void print_report(const rfm::SuiteResult& res) {
  for (const auto& r : res.reports) {
    const auto row = rfm::aggregate_row(r);
    const auto& cols = rfm::aggregate_columns();
    std::cout << r.config.hash() << " (" << rfm::to_string(r.config.solver) << ")\n";
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (!row[i].empty()) std::cout << "  " << cols[i] << " = " << row[i] << "\n";
    }
  }
  std::cout << "aggregate: " << res.aggregate_csv.string() << "\nmanifest: " << res.manifest.string() << "\n";
}

int cmd_run(const CommonFlags& f) {
  const rfm::Config cfg = load(f);
  rfm::SuiteSpec spec;
  spec.kind = rfm::SuiteKind::baseline;
  spec.base = rfm::experiment_from_config(cfg);
  spec.solvers = {spec.base.solver};
  const auto res = rfm::run_suite(spec, f.out, f.workers);
  print_report(res);
  if (res.failures > 0) {
    std::cerr << "run failed; see " << res.manifest.string() << "\n";
    return 1;
  }
  return 0;
}

int cmd_suite(const CommonFlags& f) {
  const rfm::Config cfg = load(f);
  const auto spec = rfm::suite_from_config(cfg);
  const auto res = rfm::run_suite(spec, f.out, f.workers);
  print_report(res);
  if (res.failures > 0) {
    std::cerr << res.failures << " of " << res.cells << " cells failed; see " << res.manifest.string() << "\n";
    return 1;
  }
  return 0;
}

int cmd_rmt(const CommonFlags& f) {
  const rfm::Config cfg = load(f);
  rfm::RmtConfig rc;
  rc.n = cfg.get_size("n", rc.n);
  rc.ell = cfg.get_size("ell", rc.ell);
  rc.K = cfg.get_size("K", rc.K);
  rc.trials = cfg.get_size("trials", rc.trials);
  const auto seeds = cfg.get_seed_list("seeds", {0});
  if (const auto unused = cfg.unused_keys(); !unused.empty()) {
    throw rfm::Error(rfm::ErrorCode::configuration, "unknown config key '" + unused.front() + "'");
  }

  std::ostringstream csv;
  csv << "seed,n,ell,K,trials,mean_fro_product,fro_bound,fro_bound_slack,mean_fro_single,fro_single_expected,"
         "mean_spec_block,epsilon,mean_spec_product,epsilon_sq,kappa_est_eps2,kappa_est_eps\n";
  bool ok = true;
  for (const auto seed : seeds) {
    const auto fr = rfm::rmt_frobenius_experiment(rc, seed);
    const auto sp = rfm::rmt_spectral_experiment(rc, seed);
    csv << seed << ',' << rc.n << ',' << rc.ell << ',' << rc.K << ',' << rc.trials << ',' << fr.mean_product << ','
        << fr.bound << ',' << fr.slack_bound << ',' << fr.mean_single << ',' << fr.single_expected << ','
        << sp.mean_block << ',' << sp.epsilon << ',' << sp.mean_product << ',' << sp.epsilon_squared << ','
        << sp.kappa_estimate_eps2 << ',' << sp.kappa_estimate_eps << '\n';
    const bool fro_ok = fr.mean_product <= fr.slack_bound;
    const bool block_ok = sp.mean_block <= sp.epsilon;
    const bool prod_ok = sp.mean_product <= sp.epsilon_squared;
    std::printf("seed %llu: E||Q1'P1||_F = %.4f (bound %.4f) %s; E||P1||_2 = %.4f (eps %.4f) %s; "
                "E||Q1'P1||_2 = %.4f (eps^2 %.4f) %s\n",
                static_cast<unsigned long long>(seed), fr.mean_product, fr.slack_bound, fro_ok ? "ok" : "VIOLATED",
                sp.mean_block, sp.epsilon, block_ok ? "ok" : "VIOLATED", sp.mean_product, sp.epsilon_squared,
                prod_ok ? "ok" : "VIOLATED");
    ok = ok && fro_ok && block_ok && prod_ok;
  }
  rfm::write_atomic(fs::path(f.out) / "rmt.csv", csv.str());
  std::cout << "wrote " << (fs::path(f.out) / "rmt.csv").string() << "\n";
  return ok ? 0 : 2;
}

int cmd_sweep(const CommonFlags& f) {
  const rfm::Config cfg = load(f);
  rfm::SweepConfig sc;
  sc.omega0 = cfg.get_double("omega0", sc.omega0);
  sc.per_dim = cfg.get_size("S", sc.per_dim);
  sc.interior_points = cfg.get_size("interior_points", sc.interior_points);
  sc.features = cfg.get_size_list("features", sc.features);
  sc.overlaps = cfg.get_double_list("overlaps", sc.overlaps);
  sc.seeds = cfg.get_seed_list("seeds", sc.seeds);
  if (const auto unused = cfg.unused_keys(); !unused.empty()) {
    throw rfm::Error(rfm::ErrorCode::configuration, "unknown config key '" + unused.front() + "'");
  }
  const auto cells = rfm::kappa_vs_overlap_sweep(sc);
  std::ostringstream csv;
  csv.precision(6);
  csv << "K,delta,seed,kappa_M,kappa_Q\n";
  std::ostringstream med;
  med.precision(6);
  med << "K,delta,median_kappa_M,median_kappa_Q\n";
  bool ok = true;
  for (const auto& c : cells) {
    for (std::size_t i = 0; i < sc.seeds.size(); ++i) {
      csv << c.K << ',' << c.overlap << ',' << sc.seeds[i] << ',' << c.kappa_m[i] << ',' << c.kappa_q[i] << '\n';
      if (c.kappa_q[i] > c.kappa_m[i]) ok = false;
    }
    med << c.K << ',' << c.overlap << ',' << c.median_kappa_m << ',' << c.median_kappa_q << '\n';
    std::printf("K=%zu delta=%.2f  median kappa(M)=%.3e  kappa(Q)=%.3e\n", c.K, c.overlap, c.median_kappa_m,
                c.median_kappa_q);
  }
  rfm::write_atomic(fs::path(f.out) / "kappa_sweep.csv", csv.str());
  rfm::write_atomic(fs::path(f.out) / "kappa_sweep_median.csv", med.str());
  if (!ok) std::cerr << "kappa(Q) exceeded kappa(M) in at least one cell\n";
  return ok ? 0 : 2;
}

int cmd_fd_ref(const CommonFlags& f, double max_drift) {
  const rfm::Config cfg = load(f);
  rfm::WaveParams p;
  p.source_width = cfg.get_double("lambda", p.source_width);
  rfm::FdWaveOptions opt;
  opt.points_per_wavelength = cfg.get_double("fd_ppw", opt.points_per_wavelength);
  opt.cfl = cfg.get_double("fd_cfl", opt.cfl);
  cfg.get_seed_list("seeds", {});
  cfg.get_size("eval_stride", 0);
  if (const auto unused = cfg.unused_keys(); !unused.empty()) {
    throw rfm::Error(rfm::ErrorCode::configuration, "unknown config key '" + unused.front() + "'");
  }
  const auto sim = rfm::simulate_wave(p, opt);
  std::ostringstream stem;
  stem << "fd_wave_lambda" << p.source_width << "_ppw" << opt.points_per_wavelength << "_cfl" << opt.cfl;
  fs::create_directories(f.out);
  rfm::save_reference(sim.field, fs::path(f.out) / stem.str());
  std::ostringstream energy;
  energy.precision(12);
  energy << "step,energy\n";
  for (std::size_t k = 0; k < sim.energy.size(); ++k) energy << k << ',' << sim.energy[k] << '\n';
  rfm::write_atomic(fs::path(f.out) / (stem.str() + "_energy.csv"), energy.str());
  double drift = 0.0;
  for (const double e : sim.energy) drift = std::max(drift, std::abs(e - sim.energy.front()) / sim.energy.front());
  std::printf("grid %zu^2 x %zu steps, dx = %.4g, dt = %.4g, max relative energy drift = %.3e\n",
              sim.field.axes[0].size(), sim.steps, sim.dx, sim.dt, drift);
  std::cout << "wrote " << (fs::path(f.out) / stem.str()).string() << ".{json,bin}\n";
  return drift <= max_drift ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-decomposed random feature least-squares solver with RRQR filtering and preconditioning"};
  app.require_subcommand(1);
  CommonFlags run_f, suite_f, rmt_f, sweep_f, fd_f;
  double max_drift = 0.01;
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Threads used inside one solve (0 = hardware)");

  auto* run = app.add_subcommand("run", "Run a single experiment configuration over its seeds");
  add_common(run, run_f, true);
  auto* suite = app.add_subcommand("suite", "Run a suite (baseline, ablation-*, strong-*, weak)");
  add_common(suite, suite_f, true);
  auto* rmt = app.add_subcommand("rmt", "Random-matrix verification experiments");
  add_common(rmt, rmt_f, false);
  auto* sweep = app.add_subcommand("sweep-kappa", "kappa(M), kappa(Q) over a (K, delta) grid");
  add_common(sweep, sweep_f, false);
  auto* fd = app.add_subcommand("fd-ref", "Generate and cache the finite-difference wave reference");
  add_common(fd, fd_f, false);
  fd->add_option("--max-drift", max_drift, "Fail if relative energy drift exceeds this")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (threads > 0) rfm::set_thread_count(threads);
    if (*run) return cmd_run(run_f);
    if (*suite) return cmd_suite(suite_f);
    if (*rmt) return cmd_rmt(rmt_f);
    if (*sweep) return cmd_sweep(sweep_f);
    if (*fd) return cmd_fd_ref(fd_f, max_drift);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
