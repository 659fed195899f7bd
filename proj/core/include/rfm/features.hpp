#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rfm/jet.hpp"
#include "rfm/linalg.hpp"
#include "rfm/random.hpp"

namespace rfm {

/// Axis-aligned box prod_i [lo_i, hi_i].
struct Domain {
  std::vector<double> lo;
  std::vector<double> hi;

  Domain() = default;
  Domain(std::vector<double> lo_, std::vector<double> hi_);

  std::size_t dims() const noexcept { return lo.size(); }
  bool contains(std::span<const double> x, double slack = 0.0) const;
};

/// Regular overlapping decomposition with S subdomains per dimension.
///
/// Along dimension i, subdomain j_i (0-based) is centred at
/// lo_i + (hi_i - lo_i) j_i / (S - 1) with half-width (delta / 2)(hi_i - lo_i)/(S - 1).
/// Flat subdomain indices run with dimension 0 fastest.
class Decomposition {
 public:
  Decomposition(Domain domain, std::size_t per_dim, double overlap);

  const Domain& domain() const noexcept { return domain_; }
  std::size_t dims() const noexcept { return domain_.dims(); }
  std::size_t per_dim() const noexcept { return per_dim_; }
  double overlap() const noexcept { return overlap_; }
  std::size_t count() const noexcept { return count_; }

  double center(std::size_t dim, std::size_t index) const;
  double half_width(std::size_t dim) const noexcept { return half_widths_[dim]; }

  /// Multi-index of flat subdomain j.
  std::vector<std::size_t> multi_index(std::size_t j) const;
  std::size_t flat_index(std::span<const std::size_t> multi) const;

  /// Whether x lies strictly inside the support of subdomain j.
  bool covers(std::size_t j, std::span<const double> x) const;

  /// All subdomains whose open support contains x, in increasing flat order.
  std::vector<std::size_t> covering(std::span<const double> x) const;

 private:
  Domain domain_;
  std::size_t per_dim_;
  double overlap_;
  std::size_t count_;
  std::vector<double> half_widths_;
};

Decomposition decompose(const Domain& domain, std::size_t per_dim, double overlap);

/// One-dimensional raw window factor [1 + cos(pi (s - mu) / sigma)]^2 along its
/// own coordinate; exactly zero for |s - mu| >= sigma.
Jet2 raw_window_factor(double s, double mu, double sigma);

/// Unnormalised window of subdomain j along `axis`.
Jet2 raw_window_jet(const Decomposition& dec, std::size_t j, std::span<const double> x,
                    std::size_t axis);

/// Normalised (partition-of-unity) window of subdomain j along `axis`.
/// Zero jet outside the support of j; Error(coverage) if no subdomain covers x.
Jet2 window_jets(const Decomposition& dec, std::size_t j, std::span<const double> x,
                 std::size_t axis);

/// Normalised windows of all subdomains covering x, for every axis at once.
struct PointWindows {
  std::vector<std::size_t> subdomains;
  /// jets[c * dims + axis] for covering subdomain c.
  std::vector<Jet2> jets;
};

PointWindows point_windows(const Decomposition& dec, std::span<const double> x);

enum class Activation { tanh, sigmoid, sin };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation activation) noexcept;

/// Per-subdomain fixed random network. Hidden layers are shared across the K
/// features; each feature has its own output row.
struct SubdomainNetwork {
  std::vector<DenseMatrix> hidden_weights;  // layer l: K x fan_in
  std::vector<Vector> hidden_biases;        // layer l: K
  DenseMatrix output_weights;               // K x fan_in
  Vector output_bias;                       // K; nonzero only for depth 1
};

/// Randomised shallow feature networks, one per subdomain.
///
/// Depth 1 means no hidden layer: phi_k = act(w_k . x~ + b_k) with x~ the
/// subdomain-normalised input in [-1, 1]^d. For depth h >= 2, h - 1 hidden
/// layers of width K precede the K output heads, which carry no bias.
class FeatureBasis {
 public:
  FeatureBasis() = default;
  FeatureBasis(std::size_t features, std::size_t depth, Activation activation,
               std::vector<double> centers, std::vector<double> half_widths, std::size_t dims,
               std::vector<SubdomainNetwork> networks);

  std::size_t subdomains() const noexcept { return networks_.size(); }
  std::size_t features() const noexcept { return features_; }
  std::size_t depth() const noexcept { return depth_; }
  std::size_t dims() const noexcept { return dims_; }
  Activation activation() const noexcept { return activation_; }
  const SubdomainNetwork& network(std::size_t j) const { return networks_.at(j); }

  /// Subdomain-normalised coordinate and its derivative scale.
  double normalise(std::size_t j, std::size_t dim, double x) const;
  double input_scale(std::size_t j, std::size_t dim) const;
  double center(std::size_t j, std::size_t dim) const { return centers_[j * dims_ + dim]; }
  double half_width(std::size_t j, std::size_t dim) const { return half_widths_[j * dims_ + dim]; }

  /// Jets of all K features of subdomain j along `axis`, written to `out`.
  void jets(std::size_t j, std::span<const double> x, std::size_t axis, std::span<Jet2> out) const;
  /// Values of all K features of subdomain j.
  void values(std::size_t j, std::span<const double> x, std::span<double> out) const;

  bool operator==(const FeatureBasis& other) const;

 private:
  std::size_t features_ = 0;
  std::size_t depth_ = 1;
  std::size_t dims_ = 0;
  Activation activation_ = Activation::tanh;
  std::vector<double> centers_;      // subdomains x dims
  std::vector<double> half_widths_;  // subdomains x dims
  std::vector<SubdomainNetwork> networks_;
};

/// Uniform LeCun initialisation: every parameter ~ U[-sqrt(3/fan_in), sqrt(3/fan_in)].
/// Subdomain j draws from rng.derive(j), so results do not depend on evaluation order.
FeatureBasis init_basis(const Decomposition& dec, std::size_t features, std::size_t depth,
                        Activation activation, const RandomSource& rng);

/// Jets of the K features of subdomain j (allocating convenience wrapper).
std::vector<Jet2> basis_jets(const FeatureBasis& basis, std::size_t j, std::span<const double> x,
                             std::size_t axis);

void save_basis(const FeatureBasis& basis, const std::filesystem::path& path);
FeatureBasis load_basis(const std::filesystem::path& path);

}  // namespace rfm
