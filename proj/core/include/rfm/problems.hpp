#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rfm/features.hpp"
#include "rfm/jet.hpp"

namespace rfm {

/// Linear differential operator built from pure axis derivatives:
///   L[u] = value * u + sum_i (first[i] * d_i u + second[i] * d_ii u).
struct AxisOperator {
  double value = 0.0;
  std::vector<double> first;
  std::vector<double> second;

  /// Applies the operator to per-axis jets of one function (jets[axis]).
  double apply(std::span<const Jet2> jets) const;
  bool uses_derivatives() const;
};

using ScalarField = std::function<double(std::span<const double>)>;
/// Jet of a field along `axis` at a point.
using JetField = std::function<Jet2(std::span<const double>, std::size_t axis)>;

struct BoundaryCondition {
  std::string name;
  AxisOperator op;
  std::vector<std::vector<double>> points;
  double weight = 1.0;  // lambda_l
  ScalarField data;
};

/// Regular-grid field with multilinear interpolation.
struct ReferenceField {
  std::vector<std::vector<double>> axes;  // strictly increasing coordinates per dimension
  std::vector<double> values;             // row-major, last axis fastest

  std::size_t dims() const noexcept { return axes.size(); }
  std::size_t size() const;
  double at(std::span<const std::size_t> index) const;
  double interpolate(std::span<const double> x) const;
};

/// Flat little-endian float64 data file plus a JSON header (`<stem>.json`, `<stem>.bin`).
void save_reference(const ReferenceField& field, const std::filesystem::path& stem);
ReferenceField load_reference(const std::filesystem::path& stem);

/// A linear PDE instance with optional hard-constraint ansatz u~ = C u^ + G.
struct ProblemSpec {
  std::string name;
  Domain domain;
  AxisOperator interior;
  ScalarField forcing;
  std::vector<BoundaryCondition> boundaries;
  JetField constraint_multiplier;  // empty: C = 1
  JetField constraint_offset;      // empty: G = 0
  ScalarField exact;               // empty when a reference field is used
  std::shared_ptr<const ReferenceField> reference;
  /// Test lattice has this many points per subdomain along each dimension.
  std::size_t test_points_per_subdomain = 1;

  bool hard_constrained() const { return static_cast<bool>(constraint_multiplier); }
  bool has_truth() const { return static_cast<bool>(exact) || reference != nullptr; }
  double truth(std::span<const double> x) const;
};

struct OscillatorParams {
  double mass = 1.0;
  double friction = 4.0;
  double spring = 0.0;

  double natural_frequency() const;  // omega_0
  double damping() const;            // mu / (2 m)
  double frequency() const;          // sqrt(omega_0^2 - damping^2)
};

/// m u'' + mu u' + k u = 0 on [0, 1], u(0) = 1, u'(0) = 0, with m = 1, mu = 4, k = omega0^2.
/// Throws Error(invalid_problem) unless under-damped.
ProblemSpec oscillator_problem(double omega0, double initial_value_weight = 1.0,
                               double initial_velocity_weight = 1.0);

/// -Laplace(u) = f on [0, 1]^2 with n scales omega_i = 2^i, hard-constrained to u = 0 on the boundary.
ProblemSpec laplace_problem(std::size_t scales);

struct WaveParams {
  double speed = 1.0;         // c
  double source_width = 0.2;  // lambda
  double source_center_x = 0.0;
  double source_center_y = 0.0;

  double boundary_width() const { return source_width / 2.5; }           // d
  double time_scale() const { return source_width / (2.5 * speed); }    // tau
};

/// u_xx + u_yy - u_tt / c^2 = 0 on [-1, 1]^2 x [0, 1] with a Gaussian initial pulse,
/// hard-constrained through the travelling-source ansatz.
ProblemSpec wave_problem(double source_width, std::shared_ptr<const ReferenceField> reference = nullptr);
ProblemSpec wave_problem(const WaveParams& params, std::shared_ptr<const ReferenceField> reference = nullptr);

/// Multiplier and offset of the wave ansatz, exposed for testing.
Jet2 wave_boundary_factor(const WaveParams& params, std::span<const double> x, std::size_t axis);
Jet2 wave_source_term(const WaveParams& params, std::span<const double> x, std::size_t axis);

}  // namespace rfm
