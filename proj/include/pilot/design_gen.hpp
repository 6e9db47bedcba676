#pragma once

#include <cstdint>
#include <string_view>

#include "pilot/core_model.hpp"

namespace pilot {

enum class Family { ScrambledSobol, RandomLhd, MaximinLhd, MinCorrLhd, MaxProLhd, Random };

std::string_view to_string(Family family);
Family parse_family(std::string_view name);
bool is_optimized(Family family);

struct GeneratorSpec {
  Family family = Family::ScrambledSobol;
  int n = 2;
  int d = 1;
  std::uint64_t seed = 0;
  long optimizer_budget = 0;  ///< proposed moves; <= 0 selects the default 10^4 * d

  long effective_budget() const { return optimizer_budget > 0 ? optimizer_budget : 10000L * d; }
  void validate() const;
};

PointMatrix random_lhd(int n, int d, std::uint64_t seed);
PointMatrix maximin_lhd(int n, int d, std::uint64_t seed, long budget);
PointMatrix mincorr_lhd(int n, int d, std::uint64_t seed, long budget);
PointMatrix maxpro_lhd(int n, int d, std::uint64_t seed, long budget);
PointMatrix random_design(int n, int d, std::uint64_t seed);

/// Midpoint-level LHD from a random permutation per column; the starting
/// point of every optimized family for the same seed.
PointMatrix initial_midpoint_lhd(int n, int d, std::uint64_t seed);

/// Points of the family on [0,1]^d.
PointMatrix generate_unit(const GeneratorSpec& spec);

/// Family points mapped onto [-1,1]^d for the target.
Design generate(const GeneratorSpec& spec, const TargetDistribution& target);

// Criteria optimized by the LHD families, on points in [0,1]^d.
double min_pairwise_distance(const PointMatrix& pts);
/// Sum over column pairs of squared Pearson correlations.
double correlation_objective(const PointMatrix& pts);
/// MaxPro criterion [ (2/(n(n-1))) sum_{i<k} prod_j (x_ij - x_kj)^{-2} ]^{1/d}; +inf on coincident coordinates.
double maxpro_criterion(const PointMatrix& pts);

}  // namespace pilot
