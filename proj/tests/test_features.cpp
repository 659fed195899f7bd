#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "rfm/error.hpp"
#include "rfm/features.hpp"

using namespace rfm;

namespace {

std::vector<double> random_point(const Domain& dom, RandomSource& rng) {
  std::vector<double> x(dom.dims());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(dom.lo[i], dom.hi[i]);
  return x;
}

}  // namespace

TEST_CASE("decomposition geometry") {
  const Decomposition d1(Domain({0.0}, {1.0}), 20, 2.9);
  CHECK(d1.count() == 20);
  CHECK(d1.half_width(0) == doctest::Approx(2.9 / 38.0));
  CHECK(2.0 * d1.half_width(0) == doctest::Approx(0.1526).epsilon(1e-3));
  CHECK(d1.center(0, 0) == 0.0);
  CHECK(d1.center(0, 19) == doctest::Approx(1.0));

  const Decomposition d2(Domain({0.0}, {1.0}), 2, 1.0);
  CHECK(d2.center(0, 0) == 0.0);
  CHECK(d2.center(0, 1) == 1.0);
  CHECK(d2.half_width(0) == 0.5);

  const Decomposition sq(Domain({0.0, 0.0}, {1.0, 1.0}), 16, 2.9);
  CHECK(sq.count() == 256);
  const std::vector<std::size_t> mi = {3, 11};
  CHECK(sq.multi_index(sq.flat_index(mi)) == mi);

  try {
    Decomposition bad(Domain({0.0}, {1.0}), 1, 2.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unsupported_decomposition);
  }
}

TEST_CASE("overlapping subdomains cover the domain") {
  const Decomposition dec(Domain({0.0, -1.0}, {1.0, 1.0}), 5, 1.3);
  RandomSource rng(1);
  for (int i = 0; i < 2000; ++i) {
    const auto x = random_point(dec.domain(), rng);
    CHECK_FALSE(dec.covering(x).empty());
  }
}

TEST_CASE("normalised windows form a partition of unity") {
  struct Case {
    Domain dom;
    std::size_t s;
    double delta;
  };
  const std::vector<Case> cases = {{Domain({0.0}, {1.0}), 20, 2.9},
                                   {Domain({0.0, 0.0}, {1.0, 1.0}), 6, 2.9},
                                   {Domain({-1.0, -1.0, 0.0}, {1.0, 1.0, 1.0}), 4, 1.7}};
  RandomSource rng(2);
  for (const auto& c : cases) {
    const Decomposition dec(c.dom, c.s, c.delta);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const auto x = random_point(dec.domain(), rng);
      for (std::size_t axis = 0; axis < dec.dims(); ++axis) {
        Jet2 sum{};
        for (std::size_t j = 0; j < dec.count(); ++j) {
          const Jet2 w = window_jets(dec, j, x, axis);
          CHECK(w.value >= 0.0);
          sum += w;
        }
        worst = std::max({worst, std::abs(sum.value - 1.0), std::abs(sum.first) / 1e2, std::abs(sum.second) / 1e4});
      }
    }
    // value to 1e-12; derivative sums scaled by typical magnitudes (1/h, 1/h^2)
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("partition of unity values to 1e-12") {
  const Decomposition dec(Domain({0.0, 0.0}, {1.0, 1.0}), 16, 2.9);
  RandomSource rng(3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_point(dec.domain(), rng);
    double sum = 0.0;
    for (std::size_t j = 0; j < dec.count(); ++j) sum += window_jets(dec, j, x, 0).value;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("windows vanish outside their subdomain") {
  const Decomposition dec(Domain({0.0}, {1.0}), 10, 2.0);
  RandomSource rng(4);
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> x = {rng.uniform()};
    for (std::size_t j = 0; j < dec.count(); ++j) {
      if (!dec.covers(j, x)) {
        const Jet2 w = window_jets(dec, j, x, 0);
        CHECK(w.value == 0.0);
        CHECK(w.first == 0.0);
        CHECK(w.second == 0.0);
      }
    }
  }
  CHECK(raw_window_factor(0.3, 0.0, 0.3).value == 0.0);
  CHECK(raw_window_factor(0.0, 0.0, 0.3).value == doctest::Approx(4.0));
}

TEST_CASE("window is 1 with zero slope where a single subdomain covers") {
  const Decomposition dec(Domain({0.0}, {1.0}), 2, 1.0);
  const std::vector<double> x = {0.0};
  REQUIRE(dec.covering(x).size() == 1);
  const Jet2 w = window_jets(dec, 0, x, 0);
  CHECK(w.value == doctest::Approx(1.0));
  CHECK(w.first == doctest::Approx(0.0));
}

TEST_CASE("window jets match finite differences") {
  const Decomposition dec(Domain({0.0, 0.0}, {1.0, 1.0}), 5, 2.9);
  RandomSource rng(5);
  double worst = 0.0;
  int checked = 0;
  while (checked < 100) {
    const auto x = random_point(dec.domain(), rng);
    const auto cover = dec.covering(x);
    const std::size_t j = cover[static_cast<std::size_t>(rng.uniform() * static_cast<double>(cover.size()))];
    const std::size_t axis = checked % 2;
    const double h = 1e-3 * dec.half_width(axis);
    // stay away from support edges and the domain boundary for the stencil
    bool safe = true;
    for (const double shift : {-2.0 * h, 2.0 * h}) {
      auto y = x;
      y[axis] += shift;
      if (!dec.domain().contains(y) || dec.covering(y) != cover) safe = false;
    }
    if (!safe) continue;
    auto f = [&](std::span<const double> y) { return window_jets(dec, j, y, axis).value; };
    const Jet2 fd = oracle::finite_difference_jet(f, x, axis, h);
    const Jet2 got = window_jets(dec, j, x, axis);
    const double scale = 1.0 / (dec.half_width(axis) * dec.half_width(axis));
    worst = std::max(worst, oracle::jet_mismatch({got.value, got.first, got.second / scale},
                                                 {fd.value, fd.first, fd.second / scale}));
    ++checked;
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("basis initialisation is deterministic and within the LeCun bound") {
  const Decomposition dec(Domain({0.0, 0.0}, {1.0, 1.0}), 3, 2.0);
  const FeatureBasis a = init_basis(dec, 6, 3, Activation::tanh, RandomSource(42));
  const FeatureBasis b = init_basis(dec, 6, 3, Activation::tanh, RandomSource(42));
  const FeatureBasis c = init_basis(dec, 6, 3, Activation::tanh, RandomSource(43));
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.subdomains() == 9);

  for (std::size_t j = 0; j < a.subdomains(); ++j) {
    const auto& net = a.network(j);
    REQUIRE(net.hidden_weights.size() == 2);
    CHECK(net.hidden_weights[0].cols() == 2);
    CHECK(net.hidden_weights[0].cwiseAbs().maxCoeff() <= std::sqrt(3.0 / 2.0));
    CHECK(net.hidden_weights[1].cwiseAbs().maxCoeff() <= std::sqrt(3.0 / 6.0));
    CHECK(net.output_weights.cwiseAbs().maxCoeff() <= std::sqrt(3.0 / 6.0));
    CHECK(net.output_bias.isZero());
  }
  // subdomain 0 and 1 draw from different streams
  CHECK(a.network(0).hidden_weights[0] != a.network(1).hidden_weights[0]);

  const FeatureBasis shallow = init_basis(dec, 6, 1, Activation::tanh, RandomSource(1));
  CHECK(shallow.network(0).hidden_weights.empty());
  CHECK(shallow.network(0).output_weights.cwiseAbs().maxCoeff() <= std::sqrt(3.0 / 2.0));
  CHECK(shallow.network(0).output_bias.cwiseAbs().maxCoeff() <= std::sqrt(3.0 / 2.0));
}

TEST_CASE("inputs are normalised to [-1, 1] over each subdomain") {
  const Decomposition dec(Domain({0.0}, {2.0}), 5, 2.0);
  const FeatureBasis basis = init_basis(dec, 2, 1, Activation::tanh, RandomSource(0));
  const double c = dec.center(0, 2), hw = dec.half_width(0);
  CHECK(basis.normalise(2, 0, c) == doctest::Approx(0.0));
  CHECK(basis.normalise(2, 0, c + hw) == doctest::Approx(1.0));
  CHECK(basis.normalise(2, 0, c - hw) == doctest::Approx(-1.0));
  CHECK(basis.input_scale(2, 0) == doctest::Approx(1.0 / hw));
}

TEST_CASE("basis jets match finite differences for every activation and depth") {
  const Decomposition dec(Domain({0.0, -1.0, 0.0}, {1.0, 1.0, 1.0}), 3, 2.9);
  RandomSource rng(6);
  for (const Activation act : {Activation::tanh, Activation::sigmoid, Activation::sin}) {
    for (const std::size_t depth : {1u, 2u, 3u}) {
      const FeatureBasis basis = init_basis(dec, 5, depth, act, RandomSource(depth));
      double worst = 0.0;
      for (int i = 0; i < 30; ++i) {
        const auto x = random_point(dec.domain(), rng);
        const std::size_t j = static_cast<std::size_t>(rng.uniform() * 27.0);
        for (std::size_t axis = 0; axis < 3; ++axis) {
          const auto jets = basis_jets(basis, j, x, axis);
          for (std::size_t k = 0; k < 5; ++k) {
            auto f = [&](std::span<const double> y) {
              std::vector<double> v(5);
              basis.values(j, y, v);
              return v[k];
            };
            const Jet2 fd = oracle::finite_difference_jet(f, x, axis, 1e-3);
            worst = std::max(worst, oracle::jet_mismatch(jets[k], fd));
          }
        }
      }
      CHECK_MESSAGE(worst <= 1e-5, to_string(act), " depth ", depth);
    }
  }
}

TEST_CASE("jet arithmetic agrees with finite differences") {
  auto f = [](std::span<const double> x) {
    const double t = x[0];
    return std::exp(std::sin(t)) * std::tanh(2.0 * t) / (1.0 + t * t);
  };
  const double t0 = 0.37;
  const Jet2 t = Jet2::variable(t0);
  const Jet2 got = exp(sin(t)) * tanh(2.0 * t) / (1.0 + t * t);
  const Jet2 fd = oracle::finite_difference_jet(f, {t0}, 0, 1e-3);
  CHECK(oracle::jet_mismatch(got, fd) < 1e-8);
}

TEST_CASE("activation names round-trip and unknown names are rejected") {
  for (const Activation a : {Activation::tanh, Activation::sigmoid, Activation::sin}) {
    CHECK(parse_activation(to_string(a)) == a);
  }
  try {
    parse_activation("relu");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::configuration);
  }
}

TEST_CASE("basis save and load round-trip") {
  const Decomposition dec(Domain({0.0}, {1.0}), 4, 2.0);
  const FeatureBasis basis = init_basis(dec, 3, 2, Activation::sin, RandomSource(9));
  const auto path = std::filesystem::temp_directory_path() / "rfm_basis_roundtrip.json";
  save_basis(basis, path);
  CHECK(load_basis(path) == basis);
  std::filesystem::remove(path);
}
