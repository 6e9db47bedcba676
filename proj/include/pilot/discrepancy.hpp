#pragma once

#include <cstdint>
#include <optional>

#include "pilot/core_model.hpp"

namespace pilot {

enum class DiscrepancyMethod { ClosedForm, MonteCarlo };

struct DiscrepancyReport {
  double d_squared = 0.0;  ///< clamped at zero
  double d = 0.0;
  TargetDistribution target;
  DiscrepancyMethod method = DiscrepancyMethod::ClosedForm;
  std::optional<double> mc_std_error;
  double raw_d_squared = 0.0;  ///< before clamping
  bool clamped = false;
};

/// K(x,z) = prod_j [1 + (|x_j| + |z_j| - |x_j - z_j|) / 2].
double kernel_eval(PointView x, PointView z);

/// Integral of K(x, .) against the uniform target.
double kernel_mean_uniform(PointView x);
/// Integral of K(x, .) against the arcsine target.
double kernel_mean_arcsine(PointView x);
double kernel_mean(PointView x, TargetKind kind);

/// Double integral of K against the target product measure.
double kernel_double_mean(const TargetDistribution& target);

/// (1/n^2) sum_{i,k} n_i n_k K(x_i, x_k).
double design_kernel_sum(const Design& design);

DiscrepancyReport discrepancy_closed(const Design& design, const TargetDistribution& target);

/// Monte-Carlo estimate of the target integrals; the design double sum is
/// exact.  Samples are drawn in fixed-size chunks with counter-derived
/// seeds, so the result depends only on (design, target, n_samples, seed).
DiscrepancyReport discrepancy_mc(const Design& design, const TargetDistribution& target, std::int64_t n_samples,
                                 std::uint64_t seed, int threads = 1);

}  // namespace pilot
