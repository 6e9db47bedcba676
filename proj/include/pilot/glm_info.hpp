#pragma once

#include <vector>

#include "pilot/core_model.hpp"

namespace pilot {

/// GLM weight w(eta) = 1 / (Var(Y) h'(mu)^2) as a function of the linear predictor.
double glm_weight(Link link, double eta);
double glm_weight(const ModelSpec& spec, PointView x);

/// Weight plus whether it hit the probit clamp [0, 1e6 * w(0)].
struct WeightValue {
  double value = 0.0;
  bool clamped = false;
};
WeightValue glm_weight_checked(Link link, double eta);

/// Derivative of the inverse link, d mu / d eta.
double mean_derivative(Link link, double eta);

/// I(xi; M) = sum_i (n_i/n) w(x_i) g(x_i) g(x_i)^T.
InfoMatrix info_exact(const Design& design, const ModelSpec& spec);

/// Same sum for arbitrary non-negative weights on a point set (continuous designs).
Matrix info_weighted(const PointMatrix& points, const Vector& weights, const ModelSpec& spec);

/// Tensor-product quadrature for a product target on [-1,1]^d.  Uniform uses
/// Gauss-Legendre, arcsine uses Gauss-Chebyshev of the first kind; weights
/// are normalised to sum to one.  Nodes are enumerated lazily, with the last
/// coordinate varying fastest.
class QuadratureRule {
 public:
  QuadratureRule(TargetDistribution target, int level);

  const TargetDistribution& target() const { return target_; }
  int level() const { return level_; }
  int dim() const { return target_.dim; }
  long size() const { return size_; }

  const std::vector<double>& nodes_1d() const { return nodes_; }
  const std::vector<double>& weights_1d() const { return weights_; }

  void node(long k, std::vector<double>& out) const;
  double weight(long k) const;

  /// Materialised nodes (size() x dim()); only sensible for small rules.
  PointMatrix node_matrix() const;
  Vector weight_vector() const;

 private:
  TargetDistribution target_;
  int level_;
  long size_;
  std::vector<double> nodes_, weights_;
};

QuadratureRule quadrature(const TargetDistribution& target, int level);

/// Level used when none is given: 24 per coordinate for d <= 4, 12 for
/// d = 5, 6 and 8 beyond.
int default_quadrature_level(int d);

/// I(tar; M) = integral of w(x) g(x) g(x)^T against the target, by quadrature.
InfoMatrix info_target(const TargetDistribution& target, const ModelSpec& spec, const QuadratureRule& rule);

/// EI matrix: integral of g g^T (d mu / d eta)^2 against the IMSE measure.
Matrix ei_matrix(const ModelSpec& spec, const TargetDistribution& imse_target, const QuadratureRule& rule);

}  // namespace pilot
