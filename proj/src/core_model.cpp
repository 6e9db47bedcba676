#include "pilot/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace pilot {

namespace {

void check_region(const PointMatrix& points) {
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      const double v = points(i, j);
      if (!(v >= -1.0 && v <= 1.0)) {
        std::ostringstream os;
        os << "design point " << i << " coordinate " << j << " = " << v << " lies outside [-1,1]";
        throw InvalidInput(os.str());
      }
    }
  }
}

bool same_point(const PointMatrix& pts, Eigen::Index a, Eigen::Index b) {
  return (pts.row(a) - pts.row(b)).cwiseAbs().maxCoeff() <= kMergeTolerance;
}

}  // namespace

Design::Design(PointMatrix points, std::vector<int> counts) {
  if (points.rows() == 0 || points.cols() == 0) throw InvalidInput("design must contain at least one point");
  if (static_cast<Eigen::Index>(counts.size()) != points.rows()) {
    throw InvalidInput("design counts do not match the number of points");
  }
  for (int c : counts) {
    if (c < 1) throw InvalidInput("design counts must be positive");
  }
  check_region(points);

  // Sort by first coordinate; two points within tolerance in max-norm are
  // within tolerance in the first coordinate, so a backward scan over that
  // window finds every duplicate.
  const Eigen::Index m = points.rows();
  std::vector<Eigen::Index> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return points(a, 0) < points(b, 0); });

  std::vector<Eigen::Index> owner(m, -1);  // index into `order` of the merged representative
  std::vector<Eigen::Index> reps;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Eigen::Index i = order[k];
    Eigen::Index found = -1;
    for (std::size_t q = k; q-- > 0;) {
      const Eigen::Index j = order[q];
      if (points(i, 0) - points(j, 0) > kMergeTolerance) break;
      if (owner[j] == j && same_point(points, i, j)) {
        found = j;
        break;
      }
    }
    owner[i] = found < 0 ? i : found;
    if (found < 0) reps.push_back(i);
  }

  // Keep representatives in their original input order.
  std::sort(reps.begin(), reps.end());
  std::vector<Eigen::Index> slot(m, -1);
  points_.resize(static_cast<Eigen::Index>(reps.size()), points.cols());
  counts_.assign(reps.size(), 0);
  for (std::size_t r = 0; r < reps.size(); ++r) {
    points_.row(static_cast<Eigen::Index>(r)) = points.row(reps[r]);
    slot[reps[r]] = static_cast<Eigen::Index>(r);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    counts_[slot[owner[i]]] += counts[i];
    total_ += counts[i];
  }
}

Design::Design(PointMatrix points) : Design(points, std::vector<int>(points.rows(), 1)) {}

Vector Design::masses() const {
  Vector w(support_size());
  for (int i = 0; i < support_size(); ++i) w[i] = mass(i);
  return w;
}

std::string_view to_string(Link link) {
  switch (link) {
    case Link::Logit: return "logit";
    case Link::Probit: return "probit";
    case Link::Identity: return "identity";
  }
  return "?";
}

Link parse_link(std::string_view name) {
  if (name == "logit") return Link::Logit;
  if (name == "probit") return Link::Probit;
  if (name == "identity") return Link::Identity;
  throw InvalidInput("unknown link function '" + std::string(name) + "'");
}

double Monomial::eval(PointView x) const {
  double v = 1.0;
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    for (int e = 0; e < exponents[k]; ++e) v *= x[k];
  }
  return v;
}

ModelSpec::ModelSpec(Link link, std::vector<Monomial> basis, Vector beta)
    : link_(link), basis_(std::move(basis)), beta_(std::move(beta)), dim_(0) {
  if (basis_.empty()) throw InvalidInput("model basis must contain at least one term");
  dim_ = basis_.front().dim();
  if (dim_ < 1) throw InvalidInput("basis terms must have dimension >= 1");
  for (std::size_t j = 0; j < basis_.size(); ++j) {
    if (basis_[j].dim() != dim_) throw InvalidInput("basis terms have inconsistent dimensions");
    for (int e : basis_[j].exponents) {
      if (e < 0) throw InvalidInput("basis exponents must be non-negative");
    }
    for (std::size_t k = 0; k < j; ++k) {
      if (basis_[k] == basis_[j]) throw InvalidInput("basis terms must be pairwise distinct");
    }
  }
  if (beta_.size() != static_cast<Eigen::Index>(basis_.size())) {
    throw InvalidInput("beta length does not match the number of basis terms");
  }
  if (!beta_.allFinite()) throw InvalidInput("beta must be finite");
}

ModelSpec ModelSpec::with_beta(Vector beta) const { return ModelSpec(link_, basis_, std::move(beta)); }

void basis_eval_into(const ModelSpec& spec, PointView x, Eigen::Ref<Vector> out) {
  if (static_cast<int>(x.size()) != spec.dim()) {
    throw InvalidInput("point dimension " + std::to_string(x.size()) + " does not match model dimension " +
                       std::to_string(spec.dim()));
  }
  const auto& basis = spec.basis();
  for (std::size_t j = 0; j < basis.size(); ++j) out[static_cast<Eigen::Index>(j)] = basis[j].eval(x);
}

Vector basis_eval(const ModelSpec& spec, PointView x) {
  Vector g(spec.num_terms());
  basis_eval_into(spec, x, g);
  return g;
}

double linear_predictor(const ModelSpec& spec, PointView x) { return spec.beta().dot(basis_eval(spec, x)); }

std::vector<Monomial> intercept_and_main_effects(int d) {
  std::vector<Monomial> basis;
  basis.push_back({std::vector<int>(d, 0)});
  for (int i = 0; i < d; ++i) {
    Monomial m{std::vector<int>(d, 0)};
    m.exponents[i] = 1;
    basis.push_back(std::move(m));
  }
  return basis;
}

Monomial interaction(int d, int i, int j) {
  Monomial m{std::vector<int>(d, 0)};
  m.exponents[i] += 1;
  m.exponents[j] += 1;
  return m;
}

std::string_view to_string(TargetKind kind) {
  return kind == TargetKind::Uniform ? "uniform" : "arcsine";
}

TargetKind parse_target(std::string_view name) {
  if (name == "uniform") return TargetKind::Uniform;
  if (name == "arcsine") return TargetKind::Arcsine;
  throw InvalidInput("unknown target distribution '" + std::string(name) + "'");
}

double TargetDistribution::cdf(double x) const {
  x = std::clamp(x, -1.0, 1.0);
  if (kind == TargetKind::Uniform) return 0.5 * (x + 1.0);
  return 0.5 + std::asin(x) / std::numbers::pi;
}

double TargetDistribution::inverse_cdf(double u) const {
  if (kind == TargetKind::Uniform) return 2.0 * u - 1.0;
  // -cos(pi u), written as a sine so the centre maps exactly to zero.
  return std::sin(std::numbers::pi * (u - 0.5));
}

double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Design unit_cube_to_design(const PointMatrix& points01, const TargetDistribution& target) {
  if (points01.cols() != target.dim) throw InvalidInput("unit-cube points do not match the target dimension");
  PointMatrix out(points01.rows(), points01.cols());
  for (Eigen::Index i = 0; i < points01.rows(); ++i) {
    for (Eigen::Index j = 0; j < points01.cols(); ++j) {
      const double u = points01(i, j);
      if (!(u >= 0.0 && u <= 1.0)) throw InvalidInput("unit-cube coordinate outside [0,1]");
      out(i, j) = std::clamp(target.inverse_cdf(u), -1.0, 1.0);
    }
  }
  return Design(std::move(out));
}

}  // namespace pilot
