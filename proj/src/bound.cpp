#include "pilot/bound.hpp"

#include <algorithm>
#include <cmath>

namespace pilot {

namespace {

bool is_singular(const Vector& ascending_eigenvalues) {
  const double lmax = ascending_eigenvalues.cwiseAbs().maxCoeff();
  return !(lmax > 0.0) || ascending_eigenvalues(0) <= kSingularityFloor * lmax;
}

}  // namespace

BoundCheck bound_check(const Matrix& info_design, const Matrix& info_target, const Matrix& L, double optimal_value) {
  if (info_design.rows() != info_target.rows() || info_design.rows() != L.rows()) {
    throw InvalidInput("bound check matrices differ in size");
  }
  BoundCheck out;
  const Matrix X = 0.5 * (info_design + info_design.transpose());
  const Matrix T = 0.5 * (info_target + info_target.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> et(T);
  Eigen::SelfAdjointEigenSolver<Matrix> ex(X, Eigen::EigenvaluesOnly);
  if (is_singular(et.eigenvalues()) || is_singular(ex.eigenvalues())) {
    out.singular = true;
    return out;
  }

  const Matrix T_inv_sqrt =
      et.eigenvectors() * et.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * et.eigenvectors().transpose();
  Matrix W = T_inv_sqrt * X * T_inv_sqrt;
  W = 0.5 * (W + W.transpose());
  const Vector lambda = Eigen::SelfAdjointEigenSolver<Matrix>(W, Eigen::EigenvaluesOnly).eigenvalues();
  const double lmin = lambda(0);
  const double lmax = lambda(lambda.size() - 1);

  out.whitened_min_eigenvalue = lmin;
  out.whitened_max_eigenvalue = lmax;
  out.inverse_max_eigenvalue = 1.0 / lmin;
  // eigenvalues of identity - W are 1 - lambda_k
  out.spectral_radius_term = std::max(std::abs(1.0 - lmin), std::abs(1.0 - lmax));

  out.eff_design = optimal_value / l_value(X, L);
  out.eff_target = optimal_value / l_value(T, L);
  out.margin = out.eff_design - out.eff_target / out.inverse_max_eigenvalue;
  out.chain_holds = out.margin >= -kChainTolerance;

  out.identity_applies = out.spectral_radius_term < 1.0;
  if (out.identity_applies) out.identity_gap = std::abs((1.0 - out.spectral_radius_term) - lmin);
  return out;
}

BoundCheck bound_check(const Design& design, const ModelSpec& spec, const TargetDistribution& target,
                       const CriterionMatrix& L, const SolveResult& opt, const QuadratureRule& rule) {
  if (design.dim() != spec.dim()) throw InvalidInput("design and model dimensions differ");
  return bound_check(info_exact(design, spec).entries, info_target(target, spec, rule).entries, L.entries,
                     opt.criterion_value);
}

}  // namespace pilot
