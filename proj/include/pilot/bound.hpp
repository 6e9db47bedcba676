#pragma once

#include "pilot/core_model.hpp"
#include "pilot/glm_info.hpp"
#include "pilot/opt_solver.hpp"

namespace pilot {

/// Absolute slack allowed in the efficiency chain.
inline constexpr double kChainTolerance = 1e-9;

/// Spectral-radius chain eff(xi) >= eff(tar) / rho[W^{-1}] with
/// W = I(tar)^{-1/2} I(xi) I(tar)^{-1/2} and I~ = identity - W.
struct BoundCheck {
  double eff_design = 0.0;
  double eff_target = 0.0;
  /// rho(I~)
  double spectral_radius_term = 0.0;
  /// Largest eigenvalue of W^{-1}, i.e. 1 / lambda_min(W).
  double inverse_max_eigenvalue = 0.0;
  double whitened_min_eigenvalue = 0.0;
  double whitened_max_eigenvalue = 0.0;
  bool chain_holds = false;
  /// eff_design - eff_target / inverse_max_eigenvalue
  double margin = 0.0;
  /// |(1 - rho(I~)) - lambda_min(W)|, meaningful only when identity_applies.
  double identity_gap = 0.0;
  bool identity_applies = false;
  /// One of the information matrices is singular; nothing else is set.
  bool singular = false;
};

/// Chain on precomputed matrices; `optimal_value` is tr(I(xi_opt)^{-1} L).
BoundCheck bound_check(const Matrix& info_design, const Matrix& info_target, const Matrix& L, double optimal_value);

BoundCheck bound_check(const Design& design, const ModelSpec& spec, const TargetDistribution& target,
                       const CriterionMatrix& L, const SolveResult& opt, const QuadratureRule& rule);

}  // namespace pilot
