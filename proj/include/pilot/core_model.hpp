#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace pilot {

/// Row-major so that a single design point is a contiguous span.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using PointView = std::span<const double>;

/// Thrown for inputs that violate an operation's preconditions.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline PointView row_view(const PointMatrix& pts, Eigen::Index i) {
  return {pts.data() + i * pts.cols(), static_cast<std::size_t>(pts.cols())};
}

/// Points closer than this in max-norm are treated as the same support point.
inline constexpr double kMergeTolerance = 1e-12;

/// An exact design: m distinct support points in [-1,1]^d with replication counts.
///
/// Construction validates the region, merges duplicate points into counts and
/// leaves the object immutable.  The empirical distribution puts mass
/// counts[i] / total on point i.
class Design {
 public:
  Design(PointMatrix points, std::vector<int> counts);
  explicit Design(PointMatrix points);

  int dim() const { return static_cast<int>(points_.cols()); }
  int support_size() const { return static_cast<int>(points_.rows()); }
  long total() const { return total_; }

  const PointMatrix& points() const { return points_; }
  const std::vector<int>& counts() const { return counts_; }
  PointView point(int i) const { return row_view(points_, i); }

  /// Mass n_i / n of support point i.
  double mass(int i) const { return static_cast<double>(counts_[i]) / static_cast<double>(total_); }
  Vector masses() const;

 private:
  PointMatrix points_;
  std::vector<int> counts_;
  long total_ = 0;
};

enum class Link { Logit, Probit, Identity };

std::string_view to_string(Link link);
Link parse_link(std::string_view name);

/// A monomial basis term x_1^{e_1} ... x_d^{e_d}.
struct Monomial {
  std::vector<int> exponents;

  double eval(PointView x) const;
  int dim() const { return static_cast<int>(exponents.size()); }
  bool operator==(const Monomial&) const = default;
};

/// Model specification M = (link, basis, beta).  Identity link means a
/// Gaussian response with unit noise variance.
class ModelSpec {
 public:
  ModelSpec(Link link, std::vector<Monomial> basis, Vector beta);

  Link link() const { return link_; }
  const std::vector<Monomial>& basis() const { return basis_; }
  const Vector& beta() const { return beta_; }
  int num_terms() const { return static_cast<int>(basis_.size()); }
  int dim() const { return dim_; }

  /// Same link and basis with a different coefficient vector.
  ModelSpec with_beta(Vector beta) const;

 private:
  Link link_;
  std::vector<Monomial> basis_;
  Vector beta_;
  int dim_;
};

/// g(x): the basis evaluated at x.
Vector basis_eval(const ModelSpec& spec, PointView x);
void basis_eval_into(const ModelSpec& spec, PointView x, Eigen::Ref<Vector> out);

/// eta(x) = beta^T g(x).
double linear_predictor(const ModelSpec& spec, PointView x);

/// Basis builders used throughout the examples.
std::vector<Monomial> intercept_and_main_effects(int d);
Monomial interaction(int d, int i, int j);

enum class TargetKind { Uniform, Arcsine };

std::string_view to_string(TargetKind kind);
TargetKind parse_target(std::string_view name);

/// Product target measure on [-1,1]^d.
struct TargetDistribution {
  TargetKind kind = TargetKind::Uniform;
  int dim = 1;

  /// Marginal CDF of one coordinate.
  double cdf(double x) const;
  /// Marginal inverse CDF mapping u in [0,1] to [-1,1].
  double inverse_cdf(double u) const;
};

enum class InfoSource { ExactDesign, TargetQuadrature };

struct InfoMatrix {
  Matrix entries;
  InfoSource source = InfoSource::ExactDesign;

  int size() const { return static_cast<int>(entries.rows()); }
};

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& m);

/// Maps points from the unit cube onto [-1,1]^d: affine for the uniform
/// target, the marginal inverse CDF for the arcsine target.  Duplicate
/// outputs are merged into replication counts.
Design unit_cube_to_design(const PointMatrix& points01, const TargetDistribution& target);

}  // namespace pilot
