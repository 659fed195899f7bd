#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "oracles.hpp"
#include "rfm/problems.hpp"

using namespace rfm;

namespace {

std::vector<double> random_point(const Domain& dom, RandomSource& rng) {
  std::vector<double> x(dom.dims());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(dom.lo[i], dom.hi[i]);
  return x;
}

// Compares a JetField against 4th-order differences of its own value along each axis.
double jet_field_vs_fd(const JetField& f, const Domain& dom, RandomSource& rng, double h, int samples,
                       double margin) {
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    auto x = random_point(dom, rng);
    for (std::size_t a = 0; a < x.size(); ++a) x[a] = std::clamp(x[a], dom.lo[a] + margin, dom.hi[a] - margin);
    for (std::size_t axis = 0; axis < x.size(); ++axis) {
      auto value = [&](std::span<const double> y) { return f(y, axis).value; };
      const Jet2 fd = oracle::finite_difference_jet(value, x, axis, h);
      worst = std::max(worst, oracle::jet_mismatch(f(x, axis), fd));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("oscillator exact solution satisfies the ODE and initial conditions") {
  const double w0 = 60.0;
  const ProblemSpec p = oscillator_problem(w0);
  const double delta = 2.0;  // mu / 2m with mu = 4, m = 1
  const double omega = std::sqrt(w0 * w0 - delta * delta);

  const std::vector<double> t0 = {0.0};
  CHECK(p.exact(t0) == doctest::Approx(1.0));

  // closed-form derivatives, independent of the library
  auto du = [&](double t) { return -(w0 * w0 / omega) * std::exp(-delta * t) * std::sin(omega * t); };
  auto ddu = [&](double t) {
    return -(w0 * w0 / omega) * std::exp(-delta * t) * (omega * std::cos(omega * t) - delta * std::sin(omega * t));
  };
  CHECK(du(0.0) == 0.0);

  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double t = i / 999.0;
    const std::vector<double> x = {t};
    const double res = ddu(t) + 4.0 * du(t) + w0 * w0 * p.exact(x);
    worst = std::max(worst, std::abs(res));
  }
  CHECK(worst <= 1e-8 * w0 * w0);

  // the operator encodes m u'' + mu u' + k u
  CHECK(p.interior.value == doctest::Approx(w0 * w0));
  CHECK(p.interior.first[0] == 4.0);
  CHECK(p.interior.second[0] == 1.0);
  REQUIRE(p.boundaries.size() == 2);
  CHECK(p.boundaries[0].data(t0) == 1.0);
  CHECK(p.boundaries[1].data(t0) == 0.0);
  CHECK(p.test_points_per_subdomain == 50);
}

TEST_CASE("over-damped oscillators are rejected") {
  CHECK(oracle::error_code_of([] { oscillator_problem(1.5); }) == ErrorCode::invalid_problem);
  CHECK(oracle::error_code_of([] { oscillator_problem(2.0); }) == ErrorCode::invalid_problem);
  CHECK(oracle::error_code_of([] { oscillator_problem(10.0, 0.0); }) == ErrorCode::invalid_problem);
  CHECK_FALSE(oracle::error_code_of([] { oscillator_problem(2.5); }).has_value());
}

TEST_CASE("Laplace exact solution matches the forcing and vanishes on the boundary") {
  for (const std::size_t n : {1u, 2u, 3u}) {
    const ProblemSpec p = laplace_problem(n);
    RandomSource rng(n);
    double worst_closed = 0.0, worst_fd = 0.0;
    double scale = 0.0;
    for (int i = 0; i < 300; ++i) {
      const auto x = random_point(p.domain, rng);
      double lap = 0.0;
      for (std::size_t m = 1; m <= n; ++m) {
        const double k = std::ldexp(1.0, static_cast<int>(m)) * std::numbers::pi;
        lap -= 2.0 * k * k * std::sin(k * x[0]) * std::sin(k * x[1]);
      }
      lap /= static_cast<double>(n);
      const double f = p.forcing(x);
      scale = std::max(scale, std::abs(f));
      worst_closed = std::max(worst_closed, std::abs(-lap - f));

      double fd = 0.0;
      for (std::size_t axis = 0; axis < 2; ++axis) {
        auto u = [&](std::span<const double> y) { return p.exact(y); };
        fd += oracle::finite_difference_jet(u, x, axis, 1e-3).second;
      }
      worst_fd = std::max(worst_fd, std::abs(-fd - f));
    }
    CHECK(worst_closed <= 1e-10 * scale);
    CHECK(worst_fd <= 1e-4 * scale);

    for (int i = 0; i < 100; ++i) {
      const double s = rng.uniform();
      for (const std::vector<double>& x : std::vector<std::vector<double>>{{0.0, s}, {1.0, s}, {s, 0.0}, {s, 1.0}}) {
        CHECK(std::abs(p.exact(x)) < 1e-12);
        CHECK(p.constraint_multiplier(x, 0).value == doctest::Approx(0.0));
      }
    }
  }
  CHECK(oracle::error_code_of([] { laplace_problem(0); }) == ErrorCode::invalid_problem);
}

TEST_CASE("Laplace constraint jets match finite differences") {
  const ProblemSpec p = laplace_problem(3);
  RandomSource rng(11);
  CHECK(jet_field_vs_fd(p.constraint_multiplier, p.domain, rng, 1e-4, 200, 0.0) <= 1e-5);
  CHECK_FALSE(static_cast<bool>(p.constraint_offset));
}

TEST_CASE("wave ansatz reproduces the initial pulse and walls") {
  WaveParams params;
  params.source_width = 0.2;
  const ProblemSpec p = wave_problem(params);
  RandomSource rng(3);
  for (int i = 0; i < 200; ++i) {
    const double x1 = rng.uniform(-1.0, 1.0), x2 = rng.uniform(-1.0, 1.0);
    const std::vector<double> x = {x1, x2, 0.0};
    const double r = std::hypot(x1, x2);
    const double d = params.boundary_width();
    const double walls =
        std::tanh((x1 + 1) / d) * std::tanh((1 - x1) / d) * std::tanh((x2 + 1) / d) * std::tanh((1 - x2) / d);
    const double want = walls * std::exp(-0.5 * (r / 0.2) * (r / 0.2));
    CHECK(p.constraint_offset(x, 0).value == doctest::Approx(want).epsilon(1e-12));
    // the multiplier and its time derivative vanish at t = 0, as does dG/dt
    const Jet2 c = p.constraint_multiplier(x, 2);
    CHECK(c.value == 0.0);
    CHECK(c.first == 0.0);
    CHECK(p.constraint_offset(x, 2).first == doctest::Approx(0.0));
  }
  for (int i = 0; i < 100; ++i) {
    const double s = rng.uniform(-1.0, 1.0), t = rng.uniform();
    for (const std::vector<double>& x :
         std::vector<std::vector<double>>{{-1.0, s, t}, {1.0, s, t}, {s, -1.0, t}, {s, 1.0, t}}) {
      CHECK(std::abs(p.constraint_multiplier(x, 0).value) < 1e-14);
      CHECK(std::abs(p.constraint_offset(x, 1).value) < 1e-14);
    }
  }
  CHECK(p.interior.second[2] == doctest::Approx(-1.0));
  CHECK(oracle::error_code_of([] { wave_problem(0.0); }) == ErrorCode::invalid_problem);
}

TEST_CASE("wave ansatz jets match finite differences") {
  const ProblemSpec p = wave_problem(0.2);
  RandomSource rng(5);
  // keep the sample away from the pulse centre, where |x| has a kink
  const Domain ring({0.3, 0.3, 0.0}, {1.0, 1.0, 1.0});
  CHECK(jet_field_vs_fd(p.constraint_multiplier, ring, rng, 1e-4, 200, 1e-3) <= 1e-5);
  CHECK(jet_field_vs_fd(p.constraint_offset, ring, rng, 1e-4, 200, 1e-3) <= 1e-5);
}

TEST_CASE("reference field interpolation is exact on multilinear data") {
  ReferenceField f;
  f.axes = {{-1.0, -0.2, 0.5, 1.0}, {0.0, 0.1, 0.7, 0.8, 1.0}, {0.0, 1.0, 2.0}};
  auto g = [](double a, double b, double c) { return 1.0 + 2.0 * a - b + 0.5 * a * b + 0.3 * a * b * c - c; };
  for (const double a : f.axes[0])
    for (const double b : f.axes[1])
      for (const double c : f.axes[2]) f.values.push_back(g(a, b, c));
  REQUIRE(f.values.size() == f.size());

  RandomSource rng(1);
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> x = {rng.uniform(-1.0, 1.0), rng.uniform(), rng.uniform(0.0, 2.0)};
    CHECK(f.interpolate(x) == doctest::Approx(g(x[0], x[1], x[2])).epsilon(1e-12));
  }
  const std::vector<std::size_t> idx = {2, 3, 1};
  CHECK(f.at(idx) == g(0.5, 0.8, 1.0));
}

TEST_CASE("reference field save and load round-trip; truncation is detected") {
  ReferenceField f;
  f.axes = {{0.0, 0.5, 1.0}, {0.0, 1.0}};
  f.values = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  const auto dir = std::filesystem::temp_directory_path() / "rfm_reference_test";
  std::filesystem::create_directories(dir);
  const auto stem = dir / "field";
  save_reference(f, stem);
  const ReferenceField g = load_reference(stem);
  CHECK(g.axes == f.axes);
  CHECK(g.values == f.values);

  std::filesystem::resize_file(dir / "field.bin", 3 * sizeof(double));
  CHECK(oracle::error_code_of([&] { load_reference(stem); }) == ErrorCode::io);
  CHECK(oracle::error_code_of([&] { load_reference(dir / "missing"); }) == ErrorCode::io);
  std::filesystem::remove_all(dir);
}

TEST_CASE("truth prefers the exact solution and otherwise interpolates the reference") {
  auto ref = std::make_shared<ReferenceField>();
  ref->axes = {{-1.0, 1.0}, {-1.0, 1.0}, {0.0, 1.0}};
  ref->values.assign(8, 2.5);
  const ProblemSpec p = wave_problem(0.2, ref);
  const std::vector<double> x = {0.1, 0.2, 0.3};
  CHECK(p.has_truth());
  CHECK(p.truth(x) == 2.5);
  const ProblemSpec bare = wave_problem(0.2);
  CHECK_FALSE(bare.has_truth());
  CHECK(oracle::error_code_of([&] { bare.truth(x); }) == ErrorCode::invalid_problem);
}
