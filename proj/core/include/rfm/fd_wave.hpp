#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "rfm/problems.hpp"

namespace rfm {

struct FdWaveOptions {
  /// Grid points per source width lambda; dx = lambda / points_per_wavelength.
  double points_per_wavelength = 10.0;
  /// c dt / dx. Stability of the 2D leapfrog needs cfl <= 1/sqrt(2).
  double cfl = 0.5;
  double duration = 1.0;
  /// Overrides the Gaussian initial pressure (used by tests).
  std::function<double(double, double)> initial;
};

struct FdWaveSimulation {
  /// Pressure on the node grid, axes (x1, x2, t).
  ReferenceField field;
  /// Discrete energy between consecutive time levels n and n+1.
  std::vector<double> energy;
  double dx = 0.0;
  double dt = 0.0;
  std::size_t steps = 0;
};

/// Staggered pressure-velocity leapfrog for p_t = -c^2 div v, v_t = -grad p on
/// [-1, 1]^2 with p = 0 on the walls, started from rest.
/// Throws Error(cfl_violation) for cfl > 1/sqrt(2), Error(invalid_input) for
/// fewer than 4 points per wavelength.
FdWaveSimulation simulate_wave(const WaveParams& params, const FdWaveOptions& options = {});

ReferenceField fd_wave_reference(const WaveParams& params, double points_per_wavelength = 10.0,
                                 double cfl = 0.5);

}  // namespace rfm
