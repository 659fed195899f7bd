#include "rfm/fd_wave.hpp"

#include <cmath>

#include "rfm/error.hpp"

namespace rfm {

FdWaveSimulation simulate_wave(const WaveParams& params, const FdWaveOptions& options) {
  if (!(options.points_per_wavelength >= 4.0)) {
    throw Error(ErrorCode::invalid_input, "finite-difference grid needs at least 4 points per wavelength");
  }
  if (!(options.cfl > 0.0) || options.cfl > 1.0 / std::sqrt(2.0) + 1e-15) {
    throw Error(ErrorCode::cfl_violation, "CFL number must lie in (0, 1/sqrt(2)]");
  }
  if (!(options.duration > 0.0) || !(params.speed > 0.0) || !(params.source_width > 0.0)) {
    throw Error(ErrorCode::invalid_input, "duration, speed and source width must be positive");
  }

  const double c = params.speed;
  const double c2 = c * c;
  const auto cells = static_cast<std::size_t>(std::ceil(2.0 / (params.source_width / options.points_per_wavelength)));
  const std::size_t n = cells + 1;
  const double dx = 2.0 / static_cast<double>(cells);
  const auto steps = static_cast<std::size_t>(std::ceil(options.duration * c / (options.cfl * dx)));
  const double dt = options.duration / static_cast<double>(steps);
  const std::size_t levels = steps + 1;

  FdWaveSimulation sim;
  sim.dx = dx;
  sim.dt = dt;
  sim.steps = steps;
  std::vector<double> axis(n);
  for (std::size_t i = 0; i < n; ++i) axis[i] = -1.0 + dx * static_cast<double>(i);
  std::vector<double> times(levels);
  for (std::size_t k = 0; k < levels; ++k) times[k] = dt * static_cast<double>(k);
  sim.field.axes = {axis, axis, times};
  sim.field.values.assign(n * n * levels, 0.0);

  auto P = [n](std::size_t i, std::size_t j) { return i * n + j; };
  std::vector<double> p(n * n, 0.0);
  std::vector<double> vx((n - 1) * n, 0.0);  // at (i + 1/2, j)
  std::vector<double> vy(n * (n - 1), 0.0);  // at (i, j + 1/2)

  for (std::size_t i = 1; i + 1 < n; ++i) {
    for (std::size_t j = 1; j + 1 < n; ++j) {
      const double x = axis[i], y = axis[j];
      if (options.initial) {
        p[P(i, j)] = options.initial(x, y);
      } else {
        const double r = std::hypot(x - params.source_center_x, y - params.source_center_y) / params.source_width;
        p[P(i, j)] = std::exp(-0.5 * r * r);
      }
    }
  }

  auto store = [&](std::size_t level) {
    for (std::size_t ij = 0; ij < n * n; ++ij) sim.field.values[ij * levels + level] = p[ij];
  };
  // Sum over staggered edges of grad a . grad b.
  auto grad_dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        s += (a[P(i + 1, j)] - a[P(i, j)]) * (b[P(i + 1, j)] - b[P(i, j)]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j + 1 < n; ++j)
        s += (a[P(i, j + 1)] - a[P(i, j)]) * (b[P(i, j + 1)] - b[P(i, j)]);
    return s / (dx * dx);
  };

  store(0);
  const double r = dt / dx;
  std::vector<double> previous;
  for (std::size_t k = 0; k < steps; ++k) {
    // Starting from rest (v^0 = 0) the first velocity update is a half step.
    const double h = k == 0 ? 0.5 * r : r;
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t j = 0; j < n; ++j) vx[i * n + j] -= h * (p[P(i + 1, j)] - p[P(i, j)]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j + 1 < n; ++j) vy[i * (n - 1) + j] -= h * (p[P(i, j + 1)] - p[P(i, j)]);

    previous = p;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      for (std::size_t j = 1; j + 1 < n; ++j) {
        const double div = vx[i * n + j] - vx[(i - 1) * n + j] + vy[i * (n - 1) + j] - vy[i * (n - 1) + j - 1];
        p[P(i, j)] -= c2 * r * div;
      }
    }
    store(k + 1);

    double kinetic = 0.0;
    for (std::size_t ij = 0; ij < n * n; ++ij) {
      const double pt = (p[ij] - previous[ij]) / dt;
      kinetic += pt * pt / c2;
    }
    sim.energy.push_back((kinetic + grad_dot(p, previous)) * dx * dx);
  }
  return sim;
}

ReferenceField fd_wave_reference(const WaveParams& params, double points_per_wavelength, double cfl) {
  FdWaveOptions options;
  options.points_per_wavelength = points_per_wavelength;
  options.cfl = cfl;
  return simulate_wave(params, options).field;
}

}  // namespace rfm
