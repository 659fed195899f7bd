#include "rfm/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "rfm/error.hpp"

namespace rfm {

Domain::Domain(std::vector<double> lo_, std::vector<double> hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.empty() || lo.size() != hi.size()) {
    throw Error(ErrorCode::invalid_input, "domain bounds must be non-empty and of equal length");
  }
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(lo[i] < hi[i])) throw Error(ErrorCode::invalid_input, "domain needs lo < hi in every dimension");
  }
}

bool Domain::contains(std::span<const double> x, double slack) const {
  for (std::size_t i = 0; i < dims(); ++i) {
    if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
  }
  return true;
}

Decomposition::Decomposition(Domain domain, std::size_t per_dim, double overlap)
    : domain_(std::move(domain)), per_dim_(per_dim), overlap_(overlap), count_(1) {
  if (per_dim_ < 2) {
    throw Error(ErrorCode::unsupported_decomposition, "need at least 2 subdomains per dimension");
  }
  if (!(overlap_ > 0.0) || !std::isfinite(overlap_)) {
    throw Error(ErrorCode::unsupported_decomposition, "overlap ratio must be positive");
  }
  half_widths_.resize(dims());
  for (std::size_t i = 0; i < dims(); ++i) {
    half_widths_[i] = 0.5 * overlap_ * (domain_.hi[i] - domain_.lo[i]) / static_cast<double>(per_dim_ - 1);
    count_ *= per_dim_;
  }
}

double Decomposition::center(std::size_t dim, std::size_t index) const {
  return domain_.lo[dim] +
         (domain_.hi[dim] - domain_.lo[dim]) * static_cast<double>(index) / static_cast<double>(per_dim_ - 1);
}

std::vector<std::size_t> Decomposition::multi_index(std::size_t j) const {
  std::vector<std::size_t> idx(dims());
  for (std::size_t i = 0; i < dims(); ++i) {
    idx[i] = j % per_dim_;
    j /= per_dim_;
  }
  return idx;
}

std::size_t Decomposition::flat_index(std::span<const std::size_t> multi) const {
  std::size_t j = 0;
  for (std::size_t i = dims(); i-- > 0;) j = j * per_dim_ + multi[i];
  return j;
}

bool Decomposition::covers(std::size_t j, std::span<const double> x) const {
  for (std::size_t i = 0; i < dims(); ++i) {
    const std::size_t ji = j % per_dim_;
    j /= per_dim_;
    if (std::abs(x[i] - center(i, ji)) >= half_widths_[i]) return false;
  }
  return true;
}

std::vector<std::size_t> Decomposition::covering(std::span<const double> x) const {
  // Per-dimension candidate ranges, then their cartesian product.
  std::vector<std::vector<std::size_t>> ranges(dims());
  for (std::size_t i = 0; i < dims(); ++i) {
    const double spacing = (domain_.hi[i] - domain_.lo[i]) / static_cast<double>(per_dim_ - 1);
    const double pos = (x[i] - domain_.lo[i]) / spacing;
    const double reach = half_widths_[i] / spacing;
    const auto first = static_cast<long>(std::floor(pos - reach)) - 1;
    const auto last = static_cast<long>(std::ceil(pos + reach)) + 1;
    for (long k = std::max(first, 0L); k <= std::min(last, static_cast<long>(per_dim_) - 1); ++k) {
      if (std::abs(x[i] - center(i, static_cast<std::size_t>(k))) < half_widths_[i]) {
        ranges[i].push_back(static_cast<std::size_t>(k));
      }
    }
    if (ranges[i].empty()) return {};
  }
  std::vector<std::size_t> out;
  std::vector<std::size_t> cursor(dims(), 0);
  std::vector<std::size_t> multi(dims());
  while (true) {
    for (std::size_t i = 0; i < dims(); ++i) multi[i] = ranges[i][cursor[i]];
    out.push_back(flat_index(multi));
    std::size_t i = 0;
    for (; i < dims(); ++i) {
      if (++cursor[i] < ranges[i].size()) break;
      cursor[i] = 0;
    }
    if (i == dims()) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

Decomposition decompose(const Domain& domain, std::size_t per_dim, double overlap) {
  return Decomposition(domain, per_dim, overlap);
}

Jet2 raw_window_factor(double s, double mu, double sigma) {
  const double offset = s - mu;
  if (std::abs(offset) >= sigma) return {};
  const double k = std::numbers::pi / sigma;
  const double theta = k * offset;
  const double c = std::cos(theta);
  const double sn = std::sin(theta);
  const double base = 1.0 + c;
  return {base * base, -2.0 * base * sn * k, 2.0 * k * k * (sn * sn - base * c)};
}

Jet2 raw_window_jet(const Decomposition& dec, std::size_t j, std::span<const double> x, std::size_t axis) {
  const auto multi = dec.multi_index(j);
  Jet2 out = Jet2::constant(1.0);
  for (std::size_t i = 0; i < dec.dims(); ++i) {
    const Jet2 factor = raw_window_factor(x[i], dec.center(i, multi[i]), dec.half_width(i));
    out = out * (i == axis ? factor : Jet2::constant(factor.value));
  }
  return out;
}

PointWindows point_windows(const Decomposition& dec, std::span<const double> x) {
  PointWindows pw;
  pw.subdomains = dec.covering(x);
  if (pw.subdomains.empty()) {
    throw Error(ErrorCode::coverage, "point is not covered by any subdomain");
  }
  const std::size_t d = dec.dims();
  const std::size_t n = pw.subdomains.size();

  // Per-subdomain, per-dimension factor jets along their own coordinate.
  std::vector<Jet2> factors(n * d);
  for (std::size_t c = 0; c < n; ++c) {
    const auto multi = dec.multi_index(pw.subdomains[c]);
    for (std::size_t i = 0; i < d; ++i) {
      factors[c * d + i] = raw_window_factor(x[i], dec.center(i, multi[i]), dec.half_width(i));
    }
  }

  pw.jets.assign(n * d, Jet2{});
  std::vector<Jet2> raw(n);
  for (std::size_t axis = 0; axis < d; ++axis) {
    Jet2 total{};
    for (std::size_t c = 0; c < n; ++c) {
      Jet2 r = Jet2::constant(1.0);
      for (std::size_t i = 0; i < d; ++i) {
        const Jet2& f = factors[c * d + i];
        r = r * (i == axis ? f : Jet2::constant(f.value));
      }
      raw[c] = r;
      total += r;
    }
    const Jet2 inv_total = reciprocal(total);
    for (std::size_t c = 0; c < n; ++c) pw.jets[c * d + axis] = raw[c] * inv_total;
  }
  return pw;
}

Jet2 window_jets(const Decomposition& dec, std::size_t j, std::span<const double> x, std::size_t axis) {
  const PointWindows pw = point_windows(dec, x);
  const auto it = std::find(pw.subdomains.begin(), pw.subdomains.end(), j);
  if (it == pw.subdomains.end()) return {};
  const auto c = static_cast<std::size_t>(it - pw.subdomains.begin());
  return pw.jets[c * dec.dims() + axis];
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "sin") return Activation::sin;
  throw Error(ErrorCode::configuration, "unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation activation) noexcept {
  switch (activation) {
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::sin: return "sin";
  }
  return "unknown";
}

namespace {

Jet2 activate(Activation act, const Jet2& a) {
  switch (act) {
    case Activation::tanh: return tanh(a);
    case Activation::sigmoid: return sigmoid(a);
    case Activation::sin: return sin(a);
  }
  throw Error(ErrorCode::configuration, "unknown activation tag");
}

double activate(Activation act, double a) {
  switch (act) {
    case Activation::tanh: return std::tanh(a);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-a));
    case Activation::sin: return std::sin(a);
  }
  throw Error(ErrorCode::configuration, "unknown activation tag");
}

DenseMatrix lecun_matrix(Eigen::Index rows, Eigen::Index fan_in, RandomSource& rng) {
  const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
  DenseMatrix w(rows, fan_in);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < fan_in; ++k) w(i, k) = rng.uniform(-bound, bound);
  return w;
}

Vector lecun_vector(Eigen::Index size, Eigen::Index fan_in, RandomSource& rng) {
  const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
  Vector b(size);
  for (Eigen::Index i = 0; i < size; ++i) b(i) = rng.uniform(-bound, bound);
  return b;
}

}  // namespace

FeatureBasis::FeatureBasis(std::size_t features, std::size_t depth, Activation activation,
                           std::vector<double> centers, std::vector<double> half_widths, std::size_t dims,
                           std::vector<SubdomainNetwork> networks)
    : features_(features),
      depth_(depth),
      dims_(dims),
      activation_(activation),
      centers_(std::move(centers)),
      half_widths_(std::move(half_widths)),
      networks_(std::move(networks)) {
  if (features_ < 1 || depth_ < 1) throw Error(ErrorCode::invalid_input, "basis needs K >= 1 and depth >= 1");
  if (centers_.size() != networks_.size() * dims_ || half_widths_.size() != centers_.size()) {
    throw Error(ErrorCode::invalid_input, "basis normalisation maps do not match subdomain count");
  }
}

double FeatureBasis::normalise(std::size_t j, std::size_t dim, double x) const {
  return (x - center(j, dim)) / half_width(j, dim);
}

double FeatureBasis::input_scale(std::size_t j, std::size_t dim) const { return 1.0 / half_width(j, dim); }

void FeatureBasis::jets(std::size_t j, std::span<const double> x, std::size_t axis, std::span<Jet2> out) const {
  const SubdomainNetwork& net = networks_[j];
  std::vector<Jet2> z(dims_);
  for (std::size_t i = 0; i < dims_; ++i) {
    z[i] = {normalise(j, i, x[i]), i == axis ? input_scale(j, i) : 0.0, 0.0};
  }
  std::vector<Jet2> next;
  for (std::size_t l = 0; l < net.hidden_weights.size(); ++l) {
    const DenseMatrix& w = net.hidden_weights[l];
    const Vector& b = net.hidden_biases[l];
    next.assign(static_cast<std::size_t>(w.rows()), Jet2{});
    for (Eigen::Index u = 0; u < w.rows(); ++u) {
      Jet2 pre = Jet2::constant(b(u));
      for (Eigen::Index i = 0; i < w.cols(); ++i) pre += w(u, i) * z[static_cast<std::size_t>(i)];
      next[static_cast<std::size_t>(u)] = activate(activation_, pre);
    }
    z.swap(next);
  }
  const DenseMatrix& w = net.output_weights;
  for (Eigen::Index k = 0; k < w.rows(); ++k) {
    Jet2 pre = Jet2::constant(net.output_bias(k));
    for (Eigen::Index i = 0; i < w.cols(); ++i) pre += w(k, i) * z[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(k)] = activate(activation_, pre);
  }
}

void FeatureBasis::values(std::size_t j, std::span<const double> x, std::span<double> out) const {
  const SubdomainNetwork& net = networks_[j];
  Vector z(static_cast<Eigen::Index>(dims_));
  for (std::size_t i = 0; i < dims_; ++i) z(static_cast<Eigen::Index>(i)) = normalise(j, i, x[i]);
  for (std::size_t l = 0; l < net.hidden_weights.size(); ++l) {
    Vector pre = net.hidden_weights[l] * z + net.hidden_biases[l];
    for (Eigen::Index u = 0; u < pre.size(); ++u) pre(u) = activate(activation_, pre(u));
    z = std::move(pre);
  }
  const Vector pre = net.output_weights * z + net.output_bias;
  for (Eigen::Index k = 0; k < pre.size(); ++k) out[static_cast<std::size_t>(k)] = activate(activation_, pre(k));
}

bool FeatureBasis::operator==(const FeatureBasis& other) const {
  if (features_ != other.features_ || depth_ != other.depth_ || dims_ != other.dims_ ||
      activation_ != other.activation_ || centers_ != other.centers_ || half_widths_ != other.half_widths_ ||
      networks_.size() != other.networks_.size()) {
    return false;
  }
  for (std::size_t j = 0; j < networks_.size(); ++j) {
    const auto& a = networks_[j];
    const auto& b = other.networks_[j];
    if (a.hidden_weights.size() != b.hidden_weights.size()) return false;
    for (std::size_t l = 0; l < a.hidden_weights.size(); ++l) {
      if (a.hidden_weights[l] != b.hidden_weights[l] || a.hidden_biases[l] != b.hidden_biases[l]) return false;
    }
    if (a.output_weights != b.output_weights || a.output_bias != b.output_bias) return false;
  }
  return true;
}

FeatureBasis init_basis(const Decomposition& dec, std::size_t features, std::size_t depth, Activation activation,
                        const RandomSource& rng) {
  if (features < 1 || depth < 1) throw Error(ErrorCode::invalid_input, "basis needs K >= 1 and depth >= 1");
  const std::size_t d = dec.dims();
  const auto width = static_cast<Eigen::Index>(features);
  std::vector<double> centers(dec.count() * d);
  std::vector<double> half_widths(dec.count() * d);
  std::vector<SubdomainNetwork> networks(dec.count());
  for (std::size_t j = 0; j < dec.count(); ++j) {
    const auto multi = dec.multi_index(j);
    for (std::size_t i = 0; i < d; ++i) {
      centers[j * d + i] = dec.center(i, multi[i]);
      half_widths[j * d + i] = dec.half_width(i);
    }
    RandomSource local = rng.derive(j);
    SubdomainNetwork& net = networks[j];
    Eigen::Index fan_in = static_cast<Eigen::Index>(d);
    for (std::size_t l = 1; l < depth; ++l) {
      net.hidden_weights.push_back(lecun_matrix(width, fan_in, local));
      net.hidden_biases.push_back(lecun_vector(width, fan_in, local));
      fan_in = width;
    }
    net.output_weights = lecun_matrix(width, fan_in, local);
    net.output_bias = depth == 1 ? lecun_vector(width, fan_in, local) : Vector::Zero(width);
  }
  return FeatureBasis(features, depth, activation, std::move(centers), std::move(half_widths), d,
                      std::move(networks));
}

std::vector<Jet2> basis_jets(const FeatureBasis& basis, std::size_t j, std::span<const double> x, std::size_t axis) {
  std::vector<Jet2> out(basis.features());
  basis.jets(j, x, axis, out);
  return out;
}

namespace {

nlohmann::json matrix_to_json(const DenseMatrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) flat.push_back(m(i, k));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

DenseMatrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (flat.size() != static_cast<std::size_t>(rows * cols)) throw Error(ErrorCode::io, "matrix size mismatch");
  DenseMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = flat[static_cast<std::size_t>(i * cols + k)];
  return m;
}

Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void save_basis(const FeatureBasis& basis, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["format"] = "rfm-feature-basis/1";
  doc["features"] = basis.features();
  doc["depth"] = basis.depth();
  doc["dims"] = basis.dims();
  doc["activation"] = std::string(to_string(basis.activation()));
  auto& subs = doc["subdomains"] = nlohmann::json::array();
  for (std::size_t j = 0; j < basis.subdomains(); ++j) {
    const auto& net = basis.network(j);
    nlohmann::json s;
    std::vector<double> c(basis.dims()), h(basis.dims());
    for (std::size_t i = 0; i < basis.dims(); ++i) {
      c[i] = basis.center(j, i);
      h[i] = basis.half_width(j, i);
    }
    s["center"] = c;
    s["half_width"] = h;
    s["hidden"] = nlohmann::json::array();
    for (std::size_t l = 0; l < net.hidden_weights.size(); ++l) {
      s["hidden"].push_back({{"weights", matrix_to_json(net.hidden_weights[l])},
                             {"bias", to_std(net.hidden_biases[l])}});
    }
    s["output"] = {{"weights", matrix_to_json(net.output_weights)}, {"bias", to_std(net.output_bias)}};
    subs.push_back(std::move(s));
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << doc.dump();
}

FeatureBasis load_basis(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  const nlohmann::json doc = nlohmann::json::parse(in);
  if (doc.value("format", "") != "rfm-feature-basis/1") throw Error(ErrorCode::io, "unrecognised basis file");
  const auto dims = doc.at("dims").get<std::size_t>();
  std::vector<double> centers, half_widths;
  std::vector<SubdomainNetwork> nets;
  for (const auto& s : doc.at("subdomains")) {
    const auto c = s.at("center").get<std::vector<double>>();
    const auto h = s.at("half_width").get<std::vector<double>>();
    centers.insert(centers.end(), c.begin(), c.end());
    half_widths.insert(half_widths.end(), h.begin(), h.end());
    SubdomainNetwork net;
    for (const auto& layer : s.at("hidden")) {
      net.hidden_weights.push_back(matrix_from_json(layer.at("weights")));
      net.hidden_biases.push_back(vector_from_json(layer.at("bias")));
    }
    net.output_weights = matrix_from_json(s.at("output").at("weights"));
    net.output_bias = vector_from_json(s.at("output").at("bias"));
    nets.push_back(std::move(net));
  }
  return FeatureBasis(doc.at("features").get<std::size_t>(), doc.at("depth").get<std::size_t>(),
                      parse_activation(doc.at("activation").get<std::string>()), std::move(centers),
                      std::move(half_widths), dims, std::move(nets));
}

}  // namespace rfm
