#include "rfm/problems.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "rfm/error.hpp"

namespace rfm {

double AxisOperator::apply(std::span<const Jet2> jets) const {
  double out = value * jets[0].value;
  for (std::size_t i = 0; i < first.size(); ++i) out += first[i] * jets[i].first;
  for (std::size_t i = 0; i < second.size(); ++i) out += second[i] * jets[i].second;
  return out;
}

bool AxisOperator::uses_derivatives() const {
  auto nonzero = [](double c) { return c != 0.0; };
  return std::any_of(first.begin(), first.end(), nonzero) || std::any_of(second.begin(), second.end(), nonzero);
}

std::size_t ReferenceField::size() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.size();
  return n;
}

double ReferenceField::at(std::span<const std::size_t> index) const {
  std::size_t flat = 0;
  for (std::size_t i = 0; i < axes.size(); ++i) flat = flat * axes[i].size() + index[i];
  return values[flat];
}

double ReferenceField::interpolate(std::span<const double> x) const {
  const std::size_t d = dims();
  std::vector<std::size_t> base(d);
  std::vector<double> frac(d);
  for (std::size_t i = 0; i < d; ++i) {
    const auto& ax = axes[i];
    if (ax.size() == 1) {
      base[i] = 0;
      frac[i] = 0.0;
      continue;
    }
    const double xi = std::clamp(x[i], ax.front(), ax.back());
    auto it = std::upper_bound(ax.begin(), ax.end(), xi);
    std::size_t k = it == ax.begin() ? 0 : static_cast<std::size_t>(it - ax.begin()) - 1;
    k = std::min(k, ax.size() - 2);
    base[i] = k;
    frac[i] = (xi - ax[k]) / (ax[k + 1] - ax[k]);
  }
  double out = 0.0;
  std::vector<std::size_t> idx(d);
  for (std::size_t corner = 0; corner < (std::size_t{1} << d); ++corner) {
    double w = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      const bool upper = (corner >> i) & 1U;
      if (upper && axes[i].size() == 1) {
        w = 0.0;
        break;
      }
      idx[i] = base[i] + (upper ? 1 : 0);
      w *= upper ? frac[i] : 1.0 - frac[i];
    }
    if (w != 0.0) out += w * at(idx);
  }
  return out;
}

void save_reference(const ReferenceField& field, const std::filesystem::path& stem) {
  static_assert(std::endian::native == std::endian::little, "reference files are little-endian");
  std::filesystem::path header = stem;
  header += ".json";
  std::filesystem::path data = stem;
  data += ".bin";

  nlohmann::json doc;
  doc["format"] = "rfm-reference-field/1";
  doc["dtype"] = "float64";
  doc["byte_order"] = "little";
  doc["layout"] = "row-major, last axis fastest";
  doc["data_file"] = data.filename().string();
  doc["axes"] = field.axes;
  std::vector<std::size_t> shape;
  for (const auto& a : field.axes) shape.push_back(a.size());
  doc["shape"] = shape;

  std::ofstream h(header);
  if (!h) throw Error(ErrorCode::io, "cannot write " + header.string());
  h << doc.dump(2);
  std::ofstream b(data, std::ios::binary);
  if (!b) throw Error(ErrorCode::io, "cannot write " + data.string());
  b.write(reinterpret_cast<const char*>(field.values.data()),
          static_cast<std::streamsize>(field.values.size() * sizeof(double)));
}

ReferenceField load_reference(const std::filesystem::path& stem) {
  std::filesystem::path header = stem;
  header += ".json";
  std::ifstream h(header);
  if (!h) throw Error(ErrorCode::io, "cannot read " + header.string());
  const auto doc = nlohmann::json::parse(h);
  if (doc.value("format", "") != "rfm-reference-field/1") throw Error(ErrorCode::io, "unrecognised reference header");
  ReferenceField field;
  field.axes = doc.at("axes").get<std::vector<std::vector<double>>>();
  field.values.resize(field.size());
  const auto data = stem.parent_path() / doc.at("data_file").get<std::string>();
  std::ifstream b(data, std::ios::binary);
  if (!b) throw Error(ErrorCode::io, "cannot read " + data.string());
  b.read(reinterpret_cast<char*>(field.values.data()),
         static_cast<std::streamsize>(field.values.size() * sizeof(double)));
  if (b.gcount() != static_cast<std::streamsize>(field.values.size() * sizeof(double))) {
    throw Error(ErrorCode::io, "reference data file is truncated");
  }
  return field;
}

double ProblemSpec::truth(std::span<const double> x) const {
  if (exact) return exact(x);
  if (reference) return reference->interpolate(x);
  throw Error(ErrorCode::invalid_problem, name + " has no exact or reference solution");
}

double OscillatorParams::natural_frequency() const { return std::sqrt(spring / mass); }
double OscillatorParams::damping() const { return friction / (2.0 * mass); }
double OscillatorParams::frequency() const {
  const double w0 = natural_frequency();
  const double dmp = damping();
  return std::sqrt(w0 * w0 - dmp * dmp);
}

ProblemSpec oscillator_problem(double omega0, double initial_value_weight, double initial_velocity_weight) {
  OscillatorParams p;
  p.spring = omega0 * omega0 * p.mass;
  if (!(p.damping() < omega0)) {
    throw Error(ErrorCode::invalid_problem, "oscillator must be under-damped (delta < omega0)");
  }
  if (!(initial_value_weight > 0.0) || !(initial_velocity_weight > 0.0)) {
    throw Error(ErrorCode::invalid_problem, "boundary weights must be positive");
  }
  const double delta = p.damping();
  const double omega = p.frequency();

  ProblemSpec spec;
  spec.name = "oscillator";
  spec.domain = Domain({0.0}, {1.0});
  spec.interior = AxisOperator{p.spring, {p.friction}, {p.mass}};
  spec.forcing = [](std::span<const double>) { return 0.0; };
  spec.boundaries.push_back({"initial_value", AxisOperator{1.0, {0.0}, {0.0}}, {{0.0}}, initial_value_weight,
                             [](std::span<const double>) { return 1.0; }});
  spec.boundaries.push_back({"initial_velocity", AxisOperator{0.0, {1.0}, {0.0}}, {{0.0}}, initial_velocity_weight,
                             [](std::span<const double>) { return 0.0; }});
  spec.exact = [delta, omega](std::span<const double> x) {
    const double t = x[0];
    return std::exp(-delta * t) * (std::cos(omega * t) + (delta / omega) * std::sin(omega * t));
  };
  spec.test_points_per_subdomain = 50;
  return spec;
}

ProblemSpec laplace_problem(std::size_t scales) {
  if (scales < 1) throw Error(ErrorCode::invalid_problem, "laplace problem needs n >= 1");
  const auto n = static_cast<double>(scales);
  std::vector<double> omegas;
  for (std::size_t i = 1; i <= scales; ++i) omegas.push_back(std::ldexp(1.0, static_cast<int>(i)));
  const double wn = omegas.back();

  ProblemSpec spec;
  spec.name = "laplace";
  spec.domain = Domain({0.0, 0.0}, {1.0, 1.0});
  spec.interior = AxisOperator{0.0, {0.0, 0.0}, {-1.0, -1.0}};
  spec.forcing = [omegas, n](std::span<const double> x) {
    double f = 0.0;
    for (const double w : omegas) {
      const double k = w * std::numbers::pi;
      f += k * k * std::sin(k * x[0]) * std::sin(k * x[1]);
    }
    return 2.0 * f / n;
  };
  spec.exact = [omegas, n](std::span<const double> x) {
    double u = 0.0;
    for (const double w : omegas) {
      const double k = w * std::numbers::pi;
      u += std::sin(k * x[0]) * std::sin(k * x[1]);
    }
    return u / n;
  };
  spec.constraint_multiplier = [wn](std::span<const double> x, std::size_t axis) {
    Jet2 c = Jet2::constant(1.0);
    for (std::size_t i = 0; i < 2; ++i) {
      const double s = i == axis ? 1.0 : 0.0;
      c = c * tanh(Jet2{wn * x[i], wn * s, 0.0}) * tanh(Jet2{wn * (1.0 - x[i]), -wn * s, 0.0});
    }
    return c;
  };
  spec.test_points_per_subdomain = 6;
  return spec;
}

Jet2 wave_boundary_factor(const WaveParams& params, std::span<const double> x, std::size_t axis) {
  const double d = params.boundary_width();
  Jet2 out = Jet2::constant(1.0);
  for (std::size_t i = 0; i < 2; ++i) {
    const double s = i == axis ? 1.0 / d : 0.0;
    out = out * tanh(Jet2{(x[i] + 1.0) / d, s, 0.0}) * tanh(Jet2{(1.0 - x[i]) / d, -s, 0.0});
  }
  return out;
}

Jet2 wave_source_term(const WaveParams& params, std::span<const double> x, std::size_t axis) {
  const double lambda = params.source_width;
  const double tau = params.time_scale();
  const double dx = x[0] - params.source_center_x;
  const double dy = x[1] - params.source_center_y;
  const double r = std::hypot(dx, dy);

  // q = (0.6 t / tau)^2 + r / lambda, E = exp(-q^2 / 2)
  Jet2 q;
  const double st = 0.6 * x[2] / tau;
  q.value = st * st + r / lambda;
  if (axis == 2) {
    q.first = 2.0 * 0.36 * x[2] / (tau * tau);
    q.second = 2.0 * 0.36 / (tau * tau);
  } else if (r > 0.0) {
    const double xi = axis == 0 ? dx : dy;
    q.first = xi / (r * lambda);
    q.second = (r * r - xi * xi) / (r * r * r * lambda);
  }
  return exp(-0.5 * (q * q));
}

ProblemSpec wave_problem(const WaveParams& params, std::shared_ptr<const ReferenceField> reference) {
  if (!(params.source_width > 0.0) || !(params.speed > 0.0)) {
    throw Error(ErrorCode::invalid_problem, "wave problem needs c > 0 and lambda > 0");
  }
  const double c2 = params.speed * params.speed;
  const double tau = params.time_scale();

  ProblemSpec spec;
  spec.name = "wave";
  spec.domain = Domain({-1.0, -1.0, 0.0}, {1.0, 1.0, 1.0});
  spec.interior = AxisOperator{0.0, {0.0, 0.0, 0.0}, {1.0, 1.0, -1.0 / c2}};
  spec.forcing = [](std::span<const double>) { return 0.0; };
  spec.constraint_multiplier = [params, tau](std::span<const double> x, std::size_t axis) {
    const Jet2 th = tanh(Jet2{x[2] / tau, axis == 2 ? 1.0 / tau : 0.0, 0.0});
    return wave_boundary_factor(params, x, axis) * (th * th);
  };
  spec.constraint_offset = [params](std::span<const double> x, std::size_t axis) {
    return wave_boundary_factor(params, x, axis) * wave_source_term(params, x, axis);
  };
  spec.reference = std::move(reference);
  spec.test_points_per_subdomain = 4;
  return spec;
}

ProblemSpec wave_problem(double source_width, std::shared_ptr<const ReferenceField> reference) {
  WaveParams p;
  p.source_width = source_width;
  return wave_problem(p, std::move(reference));
}

}  // namespace rfm
