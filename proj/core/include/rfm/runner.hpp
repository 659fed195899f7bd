#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rfm/analysis.hpp"
#include "rfm/config.hpp"
#include "rfm/features.hpp"
#include "rfm/solvers.hpp"

namespace rfm {

enum class SolverKind { rrqr_lsqr, lsqr, cg, as_cg };

SolverKind parse_solver(const std::string& name);
std::string to_string(SolverKind kind);

struct ExperimentConfig {
  std::string problem = "oscillator";  // oscillator | laplace | wave
  double omega0 = 60.0;
  std::size_t scales = 3;
  double source_width = 0.2;
  double initial_value_weight = 1.0;
  double initial_velocity_weight = 1.0;

  std::size_t per_dim = 20;
  double overlap = 2.9;
  std::size_t features = 8;
  std::size_t depth = 1;
  Activation activation = Activation::tanh;
  double sigma = 1e-8;
  std::size_t interior_points = 0;  // per dimension; 0 = S * ceil(K^(1/d))

  SolverKind solver = SolverKind::rrqr_lsqr;
  SolveConfig solve;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  bool compute_kappa = true;
  std::size_t kappa_cap = 5000;  // dense SVD up to this size, Lanczos beyond

  double fd_points_per_wavelength = 10.0;
  double fd_cfl = 0.5;
  std::filesystem::path reference_cache;  // empty: no caching

  /// Checks every module precondition; throws Error(configuration).
  void validate() const;
  /// Canonical text of everything that affects results except the seed list.
  std::string canonical() const;
  std::string hash() const;  // 16 hex digits of fnv1a(canonical())
};

/// Reads the keys documented in README.md; unknown keys are rejected.
ExperimentConfig experiment_from_config(const Config& cfg);
/// Same, without rejecting keys another reader consumes (suite files).
ExperimentConfig experiment_from_config(const Config& cfg, bool strict);

struct SeedReport {
  std::uint64_t seed = 0;
  double best_error = 0.0;
  double final_error = 0.0;
  std::size_t best_iteration = 0;
  double seconds = 0.0;  // assembly + filtering + solve, excluding condition numbers
  std::optional<ConditionEstimate> kappa_m, kappa_mhat, kappa_q, kappa_mtm, kappa_as;
  double drop_fraction = 0.0;
  std::string filter_summary;  // JSON, rrqr-lsqr only
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t as_truncated_blocks = 0;
  bool breakdown = false;
  std::vector<IterationRecord> history;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<SeedReport> seeds;

  double median_error() const;
  double error_range() const;  // max - min
  double mean_time() const;
  double std_time() const;     // population standard deviation
  double median_drop_fraction() const;
  /// Median over seeds of a condition-number column; nullopt when not computed.
  std::optional<ConditionEstimate> median_kappa(std::optional<ConditionEstimate> SeedReport::*column) const;
};

/// One seed end to end: assemble, filter/precondition as configured, solve, evaluate.
SeedReport run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// All seeds, `workers` at a time. Errors propagate with the config hash attached.
ExperimentReport run_experiment(const ExperimentConfig& cfg, std::size_t workers = 1);

/// The 15 aggregate columns, in order.
const std::vector<std::string>& aggregate_columns();
std::vector<std::string> aggregate_row(const ExperimentReport& report);
std::string csv_line(const std::vector<std::string>& cells);

void write_convergence_csv(const SeedReport& seed, const std::filesystem::path& path);

enum class SuiteKind { baseline, ablation_sigma, ablation_activation, ablation_depth, strong_k, strong_s_delta, weak };

SuiteKind parse_suite_kind(const std::string& name);

struct SuiteSpec {
  SuiteKind kind = SuiteKind::baseline;
  ExperimentConfig base;
  std::vector<SolverKind> solvers{SolverKind::rrqr_lsqr};
  std::vector<double> sigmas;
  std::vector<Activation> activations;
  std::vector<std::size_t> depths;
  std::vector<std::size_t> features;
  std::vector<std::size_t> per_dims;   // strong-s-delta and weak
  std::vector<double> overlaps;        // strong-s-delta
  std::vector<double> weak_values;     // omega0 | n | lambda, zipped with per_dims

  std::vector<ExperimentConfig> cells() const;
};

SuiteSpec suite_from_config(const Config& cfg);

struct SuiteResult {
  std::size_t cells = 0;
  std::size_t failures = 0;
  std::filesystem::path aggregate_csv;
  std::filesystem::path manifest;
  std::vector<ExperimentReport> reports;
};

/// Runs every cell, writing <out>/aggregate.csv, <out>/runs/<hash>_seed<s>.csv and
/// <out>/manifest.json. A failing cell is recorded in the manifest and skipped.
SuiteResult run_suite(const SuiteSpec& suite, const std::filesystem::path& out, std::size_t workers = 1);

/// Writes `text` to `path` through a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace rfm
