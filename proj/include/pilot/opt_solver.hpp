#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pilot/core_model.hpp"

namespace pilot {

/// The information matrix has an eigenvalue below 1e-12 * lambda_max.
class SingularInformation : public std::runtime_error {
 public:
  SingularInformation(const std::string& what, Vector null_direction)
      : std::runtime_error(what), null_direction_(std::move(null_direction)) {}
  const Vector& null_direction() const { return null_direction_; }

 private:
  Vector null_direction_;
};

/// Uniform weights over the candidate set already give a singular information matrix.
class InfeasibleCandidates : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CriterionKind { AIdentity, CVector, StandardizedA, EI, Custom };

std::string_view to_string(CriterionKind kind);

/// The l x l PSD matrix L of the criterion tr(I^{-1} L).
struct CriterionMatrix {
  Matrix entries;
  CriterionKind kind = CriterionKind::Custom;

  static CriterionMatrix a_optimal(int l);
  /// c c^T for the unit vector of coefficient j.
  static CriterionMatrix c_optimal(int l, int j);
  static CriterionMatrix from_vector(const Vector& c);
  static CriterionMatrix custom(Matrix m, CriterionKind kind = CriterionKind::Custom);
};

/// Eigenvalue floor relative to lambda_max below which a matrix counts as singular.
inline constexpr double kSingularityFloor = 1e-12;

/// tr(I^{-1} L) through a symmetric eigendecomposition.
double l_value(const InfoMatrix& info, const CriterionMatrix& L);
double l_value(const Matrix& info, const Matrix& L);

/// A continuous design on a candidate set.
struct DesignWeights {
  PointMatrix candidates;
  Vector weights;

  /// Support points with weight above `threshold`.
  std::vector<int> support(double threshold = 1e-6) const;
};

struct SolveOptions {
  double tol = 1e-7;
  long max_iter = 100000;
  bool record_history = false;
};

struct SolveResult {
  DesignWeights weights;
  double criterion_value = 0.0;
  /// (max_i d_i - tr(I^{-1} L)) / tr(I^{-1} L) at the returned weights.
  double equivalence_gap = 0.0;
  long iterations = 0;
  bool converged = false;
  /// Directional derivatives d_i at the returned weights.
  Vector derivatives;
  /// Criterion value per iteration, when requested.
  std::vector<double> history;
};

/// Tensor grid of `per_axis` points per coordinate on [-1,1]^d.
PointMatrix candidate_grid(int d, int per_axis, long cap = 1L << 16);
/// Scrambled-Sobol cloud of n points on [-1,1]^d plus the 2^d cube vertices.
PointMatrix candidate_cloud(int d, long n, std::uint64_t seed);
/// 201 points for d = 1, 7^d tensor grid for d <= 4, 2^14-point cloud beyond.
PointMatrix default_candidates(int d, std::uint64_t seed = 0);

/// Locally L-optimal continuous design on the candidate set by the
/// multiplicative weight iteration p_i <- p_i d_i(p) / tr(I(p)^{-1} L).
SolveResult solve_l_optimal(const PointMatrix& candidates, const ModelSpec& spec, const CriterionMatrix& L,
                            const SolveOptions& options = {});

struct Efficiency {
  double value = 0.0;
  bool singular = false;
  /// tr(I(xi)^{-1} L), +inf when singular.
  double criterion = 0.0;
};

/// L_opt(xi_opt) / L_opt(xi); 0 with the singular flag when I(xi) is singular.
Efficiency l_efficiency(const Design& design, const ModelSpec& spec, const CriterionMatrix& L, const SolveResult& opt);
Efficiency efficiency_from_info(const Matrix& info, const CriterionMatrix& L, double optimal_value);

/// Diagonal standardising matrix diag(1 / (I^{-1}(xi*_j))_jj) from l c-optimal solves.
CriterionMatrix standardized_a_matrix(const PointMatrix& candidates, const ModelSpec& spec,
                                      const SolveOptions& options = {});

/// EI efficiency: l_efficiency with L = A, the EI matrix of the model.
Efficiency ei_efficiency(const Design& design, const ModelSpec& spec, const Matrix& ei, const SolveResult& opt);

}  // namespace pilot
