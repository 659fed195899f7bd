#include "rfm/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rfm/error.hpp"
#include "rfm/fd_wave.hpp"
#include "rfm/filter_precond.hpp"
#include "rfm/problems.hpp"
#include "rfm/system.hpp"

namespace rfm {

SolverKind parse_solver(const std::string& name) {
  if (name == "rrqr-lsqr") return SolverKind::rrqr_lsqr;
  if (name == "lsqr") return SolverKind::lsqr;
  if (name == "cg") return SolverKind::cg;
  if (name == "as-cg") return SolverKind::as_cg;
  throw Error(ErrorCode::configuration, "unknown solver '" + name + "' (rrqr-lsqr, lsqr, cg, as-cg)");
}

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::rrqr_lsqr: return "rrqr-lsqr";
    case SolverKind::lsqr: return "lsqr";
    case SolverKind::cg: return "cg";
    case SolverKind::as_cg: return "as-cg";
  }
  return "?";
}

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::configuration, what); }

}  // namespace

void ExperimentConfig::validate() const {
  if (problem == "oscillator") {
    if (!(omega0 > 2.0)) invalid("oscillator needs omega0 > 2 (under-damped with mu = 4, m = 1)");
    if (!(initial_value_weight > 0.0) || !(initial_velocity_weight > 0.0)) invalid("boundary weights must be positive");
  } else if (problem == "laplace") {
    if (scales < 1) invalid("laplace needs n >= 1");
  } else if (problem == "wave") {
    if (!(source_width > 0.0)) invalid("wave needs lambda > 0");
    if (!(fd_points_per_wavelength >= 4.0)) invalid("fd_ppw must be at least 4");
    if (!(fd_cfl > 0.0) || fd_cfl > 1.0 / std::sqrt(2.0)) invalid("fd_cfl must lie in (0, 1/sqrt(2)]");
  } else {
    invalid("unknown problem '" + problem + "' (oscillator, laplace, wave)");
  }
  if (per_dim < 2) invalid("S must be at least 2");
  if (!(overlap > 0.0)) invalid("delta must be positive");
  if (features < 1) invalid("K must be at least 1");
  if (depth < 1) invalid("h must be at least 1");
  if (!(sigma >= 0.0)) invalid("sigma must be non-negative");
  if (solve.max_iters < 1) invalid("max_iters must be at least 1");
  if (solve.eval_stride < 1) invalid("eval_stride must be at least 1");
  if (seeds.empty()) invalid("seed list is empty");
  if (interior_points == 1) invalid("interior_points must be 0 (automatic) or at least 2");
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream s;
  s.precision(17);
  s << "problem=" << problem;
  if (problem == "oscillator") {
    s << ";omega0=" << omega0 << ";bc_value_weight=" << initial_value_weight
      << ";bc_velocity_weight=" << initial_velocity_weight;
  } else if (problem == "laplace") {
    s << ";n=" << scales;
  } else {
    s << ";lambda=" << source_width << ";fd_ppw=" << fd_points_per_wavelength << ";fd_cfl=" << fd_cfl;
  }
  s << ";S=" << per_dim << ";delta=" << overlap << ";K=" << features << ";h=" << depth
    << ";activation=" << to_string(activation) << ";interior_points=" << interior_points
    << ";solver=" << to_string(solver) << ";max_iters=" << solve.max_iters << ";eval_stride=" << solve.eval_stride
    << ";rtol=" << solve.rtol;
  if (solver == SolverKind::rrqr_lsqr) s << ";sigma=" << sigma;
  return s.str();
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical())));
  return buf;
}

ExperimentConfig experiment_from_config(const Config& cfg) { return experiment_from_config(cfg, true); }

ExperimentConfig experiment_from_config(const Config& c, bool strict) {
  ExperimentConfig e;
  e.problem = c.get_string("problem", e.problem);
  e.omega0 = c.get_double("omega0", e.omega0);
  e.scales = c.get_size("n", e.scales);
  e.source_width = c.get_double("lambda", e.source_width);
  e.initial_value_weight = c.get_double("bc_value_weight", e.initial_value_weight);
  e.initial_velocity_weight = c.get_double("bc_velocity_weight", e.initial_velocity_weight);
  e.per_dim = c.get_size("S", e.per_dim);
  e.overlap = c.get_double("delta", e.overlap);
  e.features = c.get_size("K", e.features);
  e.depth = c.get_size("h", e.depth);
  e.activation = parse_activation(c.get_string("activation", std::string(to_string(e.activation))));
  e.sigma = c.get_double("sigma", e.sigma);
  e.interior_points = c.get_size("interior_points", e.interior_points);
  e.solver = parse_solver(c.get_string("solver", to_string(e.solver)));
  e.solve.max_iters = c.get_size("max_iters", e.solve.max_iters);
  e.solve.eval_stride = c.get_size("eval_stride", e.solve.eval_stride);
  e.solve.rtol = c.get_double("rtol", e.solve.rtol);
  e.seeds = c.get_seed_list("seeds", e.seeds);
  e.compute_kappa = c.get_bool("compute_kappa", e.compute_kappa);
  e.kappa_cap = c.get_size("kappa_cap", e.kappa_cap);
  e.fd_points_per_wavelength = c.get_double("fd_ppw", e.fd_points_per_wavelength);
  e.fd_cfl = c.get_double("fd_cfl", e.fd_cfl);
  e.reference_cache = c.get_string("reference_cache", "");
  if (strict) {
    const auto unused = c.unused_keys();
    if (!unused.empty()) invalid("unknown config key '" + unused.front() + "'");
  }
  e.validate();
  return e;
}

namespace {

std::shared_ptr<const ReferenceField> wave_reference(const ExperimentConfig& cfg) {
  static std::mutex mutex;
  static std::map<std::string, std::shared_ptr<const ReferenceField>> cache;
  std::ostringstream key;
  key.precision(17);
  key << "fd_wave_lambda" << cfg.source_width << "_ppw" << cfg.fd_points_per_wavelength << "_cfl" << cfg.fd_cfl;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(key.str());
  if (it != cache.end()) return it->second;

  std::shared_ptr<const ReferenceField> ref;
  const std::filesystem::path stem = cfg.reference_cache.empty() ? std::filesystem::path{} : cfg.reference_cache / key.str();
  if (!stem.empty() && std::filesystem::exists(std::filesystem::path(stem).concat(".json"))) {
    ref = std::make_shared<const ReferenceField>(load_reference(stem));
  } else {
    WaveParams p;
    p.source_width = cfg.source_width;
    ref = std::make_shared<const ReferenceField>(fd_wave_reference(p, cfg.fd_points_per_wavelength, cfg.fd_cfl));
    if (!stem.empty()) {
      std::filesystem::create_directories(cfg.reference_cache);
      save_reference(*ref, stem);
    }
  }
  cache.emplace(key.str(), ref);
  return ref;
}

ProblemSpec make_problem(const ExperimentConfig& cfg) {
  if (cfg.problem == "oscillator") {
    return oscillator_problem(cfg.omega0, cfg.initial_value_weight, cfg.initial_velocity_weight);
  }
  if (cfg.problem == "laplace") return laplace_problem(cfg.scales);
  return wave_problem(cfg.source_width, wave_reference(cfg));
}

ConditionEstimate squared(ConditionEstimate c) {
  c.value *= c.value;
  c.sigma_max *= c.sigma_max;
  c.sigma_min *= c.sigma_min;
  return c;
}

}  // namespace

SeedReport run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const ProblemSpec problem = make_problem(cfg);
  const Decomposition dec(problem.domain, cfg.per_dim, cfg.overlap);
  const TestSet test = make_test_set(problem, dec);

  SeedReport rep;
  rep.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  const FeatureBasis basis = init_basis(dec, cfg.features, cfg.depth, cfg.activation, RandomSource(seed));
  const GlobalSystem sys = assemble(problem, dec, basis, cfg.interior_points);
  rep.rows = sys.rows();
  rep.cols = sys.cols();

  // Evaluation infrastructure is outside the timed region.
  const auto pause = std::chrono::steady_clock::now();
  const EvaluationOperator eval = evaluation_operator(problem, dec, basis, test.points);
  auto elapsed = pause - start;
  auto resume = std::chrono::steady_clock::now();

  auto error_of = [&](const Vector& a) { return l1_error(test, eval.evaluate(a)); };
  const LinearOperator m_op = make_operator(sys.matrix);
  SolveResult result;
  std::optional<FilteredSystem> fs;
  std::optional<PreconditionedOperator> q;
  std::optional<AdditiveSchwarz> as;
  switch (cfg.solver) {
    case SolverKind::rrqr_lsqr: {
      fs.emplace(filter(sys, cfg.sigma));
      q.emplace(*fs);
      const LinearOperator q_op = make_operator(q->matrix());
      result = lsqr(q_op, sys.rhs, cfg.solve, [&](const Vector& y) { return error_of(recover_solution(*fs, y)); });
      rep.drop_fraction = fs->drop_fraction();
      rep.filter_summary = fs->summary_json();
      break;
    }
    case SolverKind::lsqr:
      result = lsqr(m_op, sys.rhs, cfg.solve, error_of);
      break;
    case SolverKind::cg:
      result = cg_normal(m_op, sys.rhs, cfg.solve, error_of);
      break;
    case SolverKind::as_cg:
      as.emplace(as_preconditioner(sys));
      rep.as_truncated_blocks = as->truncated_blocks;
      result = cg_normal(m_op, sys.rhs, cfg.solve, error_of, as->as_function());
      break;
  }
  elapsed += std::chrono::steady_clock::now() - resume;
  rep.seconds = std::chrono::duration<double>(elapsed).count();

  rep.best_error = result.best_error;
  rep.best_iteration = result.best_iteration;
  rep.final_error = result.history.back().error;
  rep.breakdown = result.breakdown;
  rep.history = std::move(result.history);

  if (cfg.compute_kappa) {
    rep.kappa_m = condition_number(sys.matrix, cfg.kappa_cap);
    switch (cfg.solver) {
      case SolverKind::rrqr_lsqr:
        // Without dropped columns M^ is M up to a column permutation.
        rep.kappa_mhat = fs->reduced_cols() == sys.cols() ? *rep.kappa_m
                                                          : condition_number(filtered_matrix(*fs), cfg.kappa_cap);
        rep.kappa_q = condition_number(q->matrix(), cfg.kappa_cap);
        break;
      case SolverKind::lsqr:
        break;
      case SolverKind::cg:
        if (sys.cols() <= cfg.kappa_cap && sys.rows() <= cfg.kappa_cap) {
          const DenseMatrix m = sys.matrix.to_dense();
          rep.kappa_mtm = condition_number(DenseMatrix(m.transpose() * m));
        } else {
          rep.kappa_mtm = squared(*rep.kappa_m);
          rep.kappa_mtm->exact = false;
        }
        break;
      case SolverKind::as_cg:
        rep.kappa_as = squared(condition_number(as->scaled_matrix(sys.matrix), cfg.kappa_cap));
        break;
    }
  }
  return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, std::size_t workers) {
  cfg.validate();
  ExperimentReport report;
  report.config = cfg;
  report.seeds.resize(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      try {
        report.seeds[i] = run_seed(cfg, cfg.seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, cfg.seeds.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "config " + cfg.hash() + " seed " + std::to_string(cfg.seeds[i]) + ": " + e.what());
    }
  }
  return report;
}

double ExperimentReport::median_error() const {
  std::vector<double> e;
  for (const auto& s : seeds) e.push_back(s.best_error);
  return median(e);
}

double ExperimentReport::error_range() const {
  if (seeds.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(seeds.begin(), seeds.end(),
                                            [](const auto& a, const auto& b) { return a.best_error < b.best_error; });
  return hi->best_error - lo->best_error;
}

double ExperimentReport::mean_time() const {
  if (seeds.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : seeds) s += r.seconds;
  return s / static_cast<double>(seeds.size());
}

double ExperimentReport::std_time() const {
  if (seeds.empty()) return 0.0;
  const double m = mean_time();
  double s = 0.0;
  for (const auto& r : seeds) s += (r.seconds - m) * (r.seconds - m);
  return std::sqrt(s / static_cast<double>(seeds.size()));
}

double ExperimentReport::median_drop_fraction() const {
  std::vector<double> d;
  for (const auto& s : seeds) d.push_back(s.drop_fraction);
  return median(d);
}

std::optional<ConditionEstimate> ExperimentReport::median_kappa(
    std::optional<ConditionEstimate> SeedReport::*column) const {
  std::vector<double> v;
  bool exact = true;
  for (const auto& s : seeds) {
    if (!(s.*column)) return std::nullopt;
    v.push_back((s.*column)->value);
    exact = exact && (s.*column)->exact;
  }
  if (v.empty()) return std::nullopt;
  ConditionEstimate c;
  c.value = median(v);
  c.exact = exact;
  return c;
}

const std::vector<std::string>& aggregate_columns() {
  static const std::vector<std::string> cols{
      "network", "h", "K", "kappa_M", "kappa_Mhat", "kappa_MhatSinv", "kappa_MtM", "kappa_AS", "optimiser", "sigma",
      "drop_pct", "e_l1_median", "e_l1_range", "time_mean", "time_std"};
  return cols;
}

std::vector<std::string> aggregate_row(const ExperimentReport& r) {
  const ExperimentConfig& c = r.config;
  auto kappa = [&](std::optional<ConditionEstimate> SeedReport::*col) -> std::string {
    const auto k = r.median_kappa(col);
    if (!k) return "";
    return (k->exact ? "" : "~") + fmt("%.2e", k->value);
  };
  const bool rrqr = c.solver == SolverKind::rrqr_lsqr;
  std::string network = "ELM-FBPINN";
  if (rrqr) network += " RRQR";
  if (c.solver == SolverKind::as_cg) network += " AS";
  const std::string optimiser = (c.solver == SolverKind::cg || c.solver == SolverKind::as_cg) ? "CG" : "LSQR";
  return {network,
          std::to_string(c.depth),
          std::to_string(c.features),
          kappa(&SeedReport::kappa_m),
          kappa(&SeedReport::kappa_mhat),
          kappa(&SeedReport::kappa_q),
          kappa(&SeedReport::kappa_mtm),
          kappa(&SeedReport::kappa_as),
          optimiser,
          rrqr ? fmt("%.0e", c.sigma) : "",
          rrqr ? fmt("%.1f", 100.0 * r.median_drop_fraction()) : "",
          fmt("%.3e", r.median_error()),
          fmt("%.3e", r.error_range()),
          fmt("%.4f", r.mean_time()),
          fmt("%.4f", r.std_time())};
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    const auto& cell = cells[i];
    if (cell.find_first_of(",\"\n") != std::string::npos) {
      out += '"';
      for (const char ch : cell) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      out += '"';
    } else {
      out += cell;
    }
  }
  return out;
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorCode::io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_convergence_csv(const SeedReport& seed, const std::filesystem::path& path) {
  std::ostringstream s;
  s.precision(10);
  s << "iteration,residual,error\n";
  for (const auto& rec : seed.history) s << rec.iteration << ',' << rec.residual << ',' << rec.error << '\n';
  write_atomic(path, s.str());
}

SuiteKind parse_suite_kind(const std::string& name) {
  if (name == "baseline") return SuiteKind::baseline;
  if (name == "ablation-sigma") return SuiteKind::ablation_sigma;
  if (name == "ablation-activation") return SuiteKind::ablation_activation;
  if (name == "ablation-depth") return SuiteKind::ablation_depth;
  if (name == "strong-K") return SuiteKind::strong_k;
  if (name == "strong-Sdelta") return SuiteKind::strong_s_delta;
  if (name == "weak") return SuiteKind::weak;
  invalid("unknown suite '" + name +
          "' (baseline, ablation-sigma, ablation-activation, ablation-depth, strong-K, strong-Sdelta, weak)");
}

std::vector<ExperimentConfig> SuiteSpec::cells() const {
  std::vector<ExperimentConfig> out;
  auto require = [](bool ok, const char* what) {
    if (!ok) invalid(std::string("suite list '") + what + "' must be non-empty");
  };
  auto per_solver = [&](ExperimentConfig c) {
    for (const SolverKind s : solvers) {
      c.solver = s;
      out.push_back(c);
    }
  };
  require(!solvers.empty(), "solvers");
  switch (kind) {
    case SuiteKind::baseline:
      per_solver(base);
      break;
    case SuiteKind::ablation_sigma:
      require(!sigmas.empty(), "sigmas");
      for (const double s : sigmas) {
        ExperimentConfig c = base;
        c.solver = SolverKind::rrqr_lsqr;
        c.sigma = s;
        out.push_back(c);
      }
      break;
    case SuiteKind::ablation_activation:
      require(!activations.empty(), "activations");
      for (const Activation a : activations) {
        ExperimentConfig c = base;
        c.activation = a;
        per_solver(c);
      }
      break;
    case SuiteKind::ablation_depth:
      require(!depths.empty(), "depths");
      for (const std::size_t h : depths) {
        ExperimentConfig c = base;
        c.depth = h;
        per_solver(c);
      }
      break;
    case SuiteKind::strong_k:
      require(!features.empty(), "features");
      for (const std::size_t k : features) {
        ExperimentConfig c = base;
        c.features = k;
        per_solver(c);
      }
      break;
    case SuiteKind::strong_s_delta:
      require(!per_dims.empty(), "per_dims");
      if (overlaps.size() != per_dims.size()) invalid("'overlaps' must have one entry per 'per_dims' entry");
      for (std::size_t i = 0; i < per_dims.size(); ++i) {
        ExperimentConfig c = base;
        c.per_dim = per_dims[i];
        c.overlap = overlaps[i];
        per_solver(c);
      }
      break;
    case SuiteKind::weak:
      require(!weak_values.empty(), "weak_values");
      if (per_dims.size() != weak_values.size()) invalid("'per_dims' must have one entry per 'weak_values' entry");
      for (std::size_t i = 0; i < weak_values.size(); ++i) {
        ExperimentConfig c = base;
        c.per_dim = per_dims[i];
        if (c.problem == "oscillator") {
          c.omega0 = weak_values[i];
        } else if (c.problem == "laplace") {
          c.scales = static_cast<std::size_t>(weak_values[i]);
        } else {
          c.source_width = weak_values[i];
        }
        per_solver(c);
      }
      break;
  }
  for (const auto& c : out) c.validate();
  return out;
}

SuiteSpec suite_from_config(const Config& cfg) {
  SuiteSpec s;
  s.kind = parse_suite_kind(cfg.get_string("suite", "baseline"));
  s.base = experiment_from_config(cfg, false);
  const auto solvers = cfg.get_list("solvers");
  if (!solvers.empty()) {
    s.solvers.clear();
    for (const auto& name : solvers) s.solvers.push_back(parse_solver(name));
  } else {
    s.solvers = {s.base.solver};
  }
  s.sigmas = cfg.get_double_list("sigmas", {});
  for (const auto& a : cfg.get_list("activations")) s.activations.push_back(parse_activation(a));
  s.depths = cfg.get_size_list("depths", {});
  s.features = cfg.get_size_list("features", {});
  s.per_dims = cfg.get_size_list("per_dims", {});
  s.overlaps = cfg.get_double_list("overlaps", {});
  s.weak_values = cfg.get_double_list("weak_values", {});
  const auto unused = cfg.unused_keys();
  if (!unused.empty()) invalid("unknown config key '" + unused.front() + "'");
  return s;
}

SuiteResult run_suite(const SuiteSpec& suite, const std::filesystem::path& out, std::size_t workers) {
  const auto cells = suite.cells();
  SuiteResult res;
  res.cells = cells.size();
  res.aggregate_csv = out / "aggregate.csv";
  res.manifest = out / "manifest.json";
  std::filesystem::create_directories(out / "runs");

  std::string csv = csv_line(aggregate_columns()) + "\n";
  nlohmann::json manifest = nlohmann::json::object();
  std::size_t row = 0;
  for (const auto& cell : cells) {
    nlohmann::json entry;
    entry["config"] = cell.canonical();
    entry["seeds"] = cell.seeds;
    try {
      ExperimentReport report = run_experiment(cell, workers);
      std::vector<std::string> files;
      for (const auto& s : report.seeds) {
        const auto name = "runs/" + cell.hash() + "_seed" + std::to_string(s.seed) + ".csv";
        write_convergence_csv(s, out / name);
        files.push_back(name);
      }
      csv += csv_line(aggregate_row(report)) + "\n";
      entry["status"] = "ok";
      entry["aggregate_row"] = row++;
      entry["convergence_files"] = files;
      std::vector<double> errs, drops;
      for (const auto& s : report.seeds) {
        errs.push_back(s.best_error);
        drops.push_back(s.drop_fraction);
      }
      entry["best_errors"] = errs;
      if (cell.solver == SolverKind::rrqr_lsqr && !report.seeds.empty()) {
        entry["filter"] = nlohmann::json::parse(report.seeds.front().filter_summary);
      }
      res.reports.push_back(std::move(report));
    } catch (const std::exception& e) {
      ++res.failures;
      entry["status"] = "failed";
      entry["error"] = e.what();
    }
    entry["aggregate_csv"] = "aggregate.csv";
    manifest[cell.hash()] = entry;
    // Rewritten after every cell so partial suites leave usable artifacts.
    write_atomic(res.aggregate_csv, csv);
    write_atomic(res.manifest, manifest.dump(2));
  }
  return res;
}

}  // namespace rfm
