#include "pilot/opt_solver.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "pilot/glm_info.hpp"
#include "pilot/sobol.hpp"

namespace pilot {

namespace {

constexpr double kPruneThreshold = 1e-12;
constexpr double kDropWeight = 1e-10;
constexpr double kReinstateWeight = 1e-6;
constexpr long kCheckInterval = 20;

struct SymmetricInverse {
  Matrix inverse;
  bool singular = false;
  Vector null_direction;
  double min_ratio = 0.0;
};

SymmetricInverse symmetric_inverse(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const Vector& lambda = es.eigenvalues();
  const double lmax = lambda.cwiseAbs().maxCoeff();
  SymmetricInverse out;
  out.min_ratio = lmax > 0.0 ? lambda(0) / lmax : 0.0;
  if (!(lmax > 0.0) || lambda(0) <= kSingularityFloor * lmax) {
    out.singular = true;
    out.null_direction = es.eigenvectors().col(0);
    return out;
  }
  out.inverse = es.eigenvectors() * lambda.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return out;
}

[[noreturn]] void throw_singular(const SymmetricInverse& inv) {
  std::ostringstream os;
  os << "information matrix is singular (lambda_min/lambda_max = " << inv.min_ratio << "); null direction [";
  for (Eigen::Index i = 0; i < inv.null_direction.size(); ++i) os << (i ? ", " : "") << inv.null_direction[i];
  os << "]";
  throw SingularInformation(os.str(), inv.null_direction);
}

void check_criterion(const Matrix& info, const Matrix& L) {
  if (L.rows() != info.rows() || L.cols() != info.cols()) {
    throw InvalidInput("criterion matrix size does not match the information matrix");
  }
}

// Rows sqrt(w(x_i)) g(x_i): I(p) = G^T diag(p) G.
Matrix scaled_basis(const PointMatrix& candidates, const ModelSpec& spec) {
  Matrix G(candidates.rows(), spec.num_terms());
  Vector g(spec.num_terms());
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    basis_eval_into(spec, row_view(candidates, i), g);
    G.row(i) = std::sqrt(glm_weight(spec.link(), spec.beta().dot(g))) * g.transpose();
  }
  return G;
}

struct Evaluation {
  double criterion = 0.0;
  double gap = 0.0;
  Vector derivatives;
};

Evaluation evaluate(const Matrix& G, const Vector& p, const Matrix& L, bool first) {
  const Matrix info = G.transpose() * (G.array().colwise() * p.array()).matrix();
  const auto inv = symmetric_inverse(0.5 * (info + info.transpose()));
  if (inv.singular) {
    if (first) throw InfeasibleCandidates("uniform weights over the candidate set give a singular information matrix");
    throw_singular(inv);
  }
  Evaluation e;
  e.criterion = (inv.inverse * L).trace();
  const Matrix M = inv.inverse * L * inv.inverse;
  e.derivatives = ((G * M).array() * G.array()).rowwise().sum();
  e.gap = (e.derivatives.maxCoeff() - e.criterion) / e.criterion;
  return e;
}

// Moves mass from the support point with the smallest directional derivative
// to the candidate with the largest, by an exact line search on the criterion.
bool vertex_exchange(const Matrix& G, Vector& p, const Matrix& L, const Evaluation& e) {
  Eigen::Index i = 0, j = -1;
  e.derivatives.maxCoeff(&i);
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0 && (j < 0 || e.derivatives[k] < e.derivatives[j])) j = k;
  }
  if (j < 0 || i == j || e.derivatives[i] <= e.derivatives[j]) return false;

  const Matrix info = G.transpose() * (G.array().colwise() * p.array()).matrix();
  const Vector u = G.row(i).transpose(), v = G.row(j).transpose();
  // Sign of d_i - d_j after moving alpha from j to i; negative once the
  // criterion starts to rise or the information becomes singular.
  auto slope = [&](double alpha) {
    const Matrix A = info + alpha * (u * u.transpose() - v * v.transpose());
    Eigen::LLT<Matrix> llt(0.5 * (A + A.transpose()));
    if (llt.info() != Eigen::Success) return -1.0;
    const Vector au = llt.solve(u), av = llt.solve(v);
    return au.dot(L * au) - av.dot(L * av);
  };
  double lo = 0.0, hi = p[j];
  if (slope(hi) > 0.0) {
    lo = hi;
  } else {
    for (int it = 0; it < 60 && hi - lo > 1e-16 * p[j]; ++it) {
      const double mid = 0.5 * (lo + hi);
      (slope(mid) > 0.0 ? lo : hi) = mid;
    }
  }
  if (!(lo > 0.0)) return false;
  p[i] += lo;
  p[j] = lo == p[j] ? 0.0 : p[j] - lo;
  return true;
}

}  // namespace

std::string_view to_string(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::AIdentity: return "A";
    case CriterionKind::CVector: return "c";
    case CriterionKind::StandardizedA: return "SA";
    case CriterionKind::EI: return "EI";
    case CriterionKind::Custom: return "custom";
  }
  return "?";
}

CriterionMatrix CriterionMatrix::a_optimal(int l) { return {Matrix::Identity(l, l), CriterionKind::AIdentity}; }

CriterionMatrix CriterionMatrix::c_optimal(int l, int j) {
  if (j < 0 || j >= l) throw InvalidInput("c-optimal coefficient index out of range");
  Matrix m = Matrix::Zero(l, l);
  m(j, j) = 1.0;
  return {m, CriterionKind::CVector};
}

CriterionMatrix CriterionMatrix::from_vector(const Vector& c) { return {c * c.transpose(), CriterionKind::CVector}; }

CriterionMatrix CriterionMatrix::custom(Matrix m, CriterionKind kind) {
  if (m.rows() != m.cols()) throw InvalidInput("criterion matrix must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw InvalidInput("criterion matrix must be symmetric");
  }
  const Matrix sym = 0.5 * (m + m.transpose());
  if (min_eigenvalue(sym) < -1e-10 * std::max(1.0, sym.cwiseAbs().maxCoeff())) {
    throw InvalidInput("criterion matrix must be positive semidefinite");
  }
  return {sym, kind};
}

double l_value(const Matrix& info, const Matrix& L) {
  check_criterion(info, L);
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (info + info.transpose()));
  const Vector& lambda = es.eigenvalues();
  const double lmax = lambda.cwiseAbs().maxCoeff();
  if (!(lmax > 0.0) || lambda(0) <= kSingularityFloor * lmax) {
    SymmetricInverse inv;
    inv.singular = true;
    inv.null_direction = es.eigenvectors().col(0);
    inv.min_ratio = lmax > 0.0 ? lambda(0) / lmax : 0.0;
    throw_singular(inv);
  }
  // tr(V diag(1/lambda) V^T L) = sum_k (v_k^T L v_k) / lambda_k
  const Matrix& V = es.eigenvectors();
  double t = 0.0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) t += V.col(k).dot(L * V.col(k)) / lambda(k);
  return t;
}

double l_value(const InfoMatrix& info, const CriterionMatrix& L) { return l_value(info.entries, L.entries); }

std::vector<int> DesignWeights::support(double threshold) const {
  std::vector<int> s;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] > threshold) s.push_back(static_cast<int>(i));
  }
  return s;
}

PointMatrix candidate_grid(int d, int per_axis, long cap) {
  if (d < 1) throw InvalidInput("grid dimension must be at least 1");
  if (per_axis < 2) throw InvalidInput("grid needs at least 2 points per axis");
  long total = 1;
  for (int c = 0; c < d; ++c) {
    total *= per_axis;
    if (total > cap) {
      throw InvalidInput("tensor grid of " + std::to_string(per_axis) + "^" + std::to_string(d) +
                         " points exceeds the cap of " + std::to_string(cap) + "; use a Sobol candidate cloud");
    }
  }
  PointMatrix pts(total, d);
  for (long k = 0; k < total; ++k) {
    long r = k;
    for (int c = d - 1; c >= 0; --c) {
      pts(k, c) = -1.0 + 2.0 * static_cast<double>(r % per_axis) / (per_axis - 1);
      r /= per_axis;
    }
  }
  return pts;
}

PointMatrix candidate_cloud(int d, long n, std::uint64_t seed) {
  if (d > 20) throw InvalidInput("candidate cloud vertices limited to d <= 20");
  const long vertices = 1L << d;
  const PointMatrix u = scrambled_sobol(n, d, seed);
  PointMatrix pts(n + vertices, d);
  pts.topRows(n) = (2.0 * u.array() - 1.0).matrix();
  for (long v = 0; v < vertices; ++v) {
    for (int c = 0; c < d; ++c) pts(n + v, c) = ((v >> (d - 1 - c)) & 1L) ? 1.0 : -1.0;
  }
  return pts;
}

PointMatrix default_candidates(int d, std::uint64_t seed) {
  if (d == 1) return candidate_grid(1, 201);
  if (d <= 4) return candidate_grid(d, 7);
  return candidate_cloud(d, 1L << 14, seed);
}

SolveResult solve_l_optimal(const PointMatrix& candidates, const ModelSpec& spec, const CriterionMatrix& L,
                            const SolveOptions& options) {
  if (candidates.rows() == 0) throw InfeasibleCandidates("empty candidate set");
  if (L.entries.rows() != spec.num_terms()) throw InvalidInput("criterion matrix size does not match the model");
  const Matrix G = scaled_basis(candidates, spec);
  const Eigen::Index N = G.rows();

  Vector p = Vector::Constant(N, 1.0 / static_cast<double>(N));
  SolveResult result;
  Evaluation e = evaluate(G, p, L.entries, true);

  // Each iteration is a multiplicative step followed by one vertex exchange,
  // both on the active candidates only.  Candidates whose weight
  // collapses are dropped; every kCheckInterval iterations the certificate is
  // evaluated on the full set and violating candidates are brought back.
  std::vector<Eigen::Index> active(N);
  for (Eigen::Index i = 0; i < N; ++i) active[i] = i;
  Matrix Ga = G;
  Vector pa = p;
  Evaluation ea = e;
  bool full_fresh = true;
  long iter = 0;

  auto scatter = [&] {
    p.setZero();
    for (std::size_t k = 0; k < active.size(); ++k) p[active[k]] = pa[k];
  };
  auto gather = [&] {
    active.clear();
    for (Eigen::Index i = 0; i < N; ++i) {
      if (p[i] > 0.0) active.push_back(i);
    }
    Ga.resize(static_cast<Eigen::Index>(active.size()), G.cols());
    pa.resize(static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
      Ga.row(k) = G.row(active[k]);
      pa[k] = p[active[k]];
    }
  };

  for (;;) {
    if (options.record_history) result.history.push_back(ea.criterion);
    if (!full_fresh && (ea.gap <= options.tol || iter % kCheckInterval == 0 || iter >= options.max_iter)) {
      scatter();
      e = evaluate(G, p, L.entries, false);
      full_fresh = true;
      if (e.gap > options.tol) {
        bool changed = false;
        for (Eigen::Index i = 0; i < N; ++i) {
          if (p[i] == 0.0 && e.derivatives[i] > e.criterion) {
            p[i] = kReinstateWeight;
            changed = true;
          }
        }
        if (changed) {
          p /= p.sum();
          gather();
          ea = evaluate(Ga, pa, L.entries, false);
          e = evaluate(G, p, L.entries, false);
        }
      }
    }
    if (full_fresh && e.gap <= options.tol) {
      result.converged = true;
      break;
    }
    if (iter >= options.max_iter) break;

    pa = pa.cwiseProduct(ea.derivatives) / ea.criterion;
    pa /= pa.sum();
    ++iter;
    bool dropped = false;
    for (Eigen::Index k = 0; k < pa.size(); ++k) {
      if (pa[k] < kDropWeight && ea.derivatives[k] < ea.criterion) {
        pa[k] = 0.0;
        dropped = true;
      }
    }
    if (dropped) {
      pa /= pa.sum();
      scatter();
      gather();
    }
    ea = evaluate(Ga, pa, L.entries, false);
    if (vertex_exchange(Ga, pa, L.entries, ea)) ea = evaluate(Ga, pa, L.entries, false);
    full_fresh = false;
  }
  scatter();

  // Drop negligible weights; the criterion and certificate are reported for
  // the pruned design.
  for (Eigen::Index i = 0; i < N; ++i) {
    if (p[i] < kPruneThreshold) p[i] = 0.0;
  }
  p /= p.sum();
  e = evaluate(G, p, L.entries, false);
  result.converged = result.converged && e.gap <= options.tol;

  result.weights = {candidates, p};
  result.criterion_value = e.criterion;
  result.equivalence_gap = e.gap;
  result.iterations = iter;
  result.derivatives = std::move(e.derivatives);
  return result;
}

Efficiency efficiency_from_info(const Matrix& info, const CriterionMatrix& L, double optimal_value) {
  try {
    const double v = l_value(info, L.entries);
    return {optimal_value / v, false, v};
  } catch (const SingularInformation&) {
    return {0.0, true, std::numeric_limits<double>::infinity()};
  }
}

Efficiency l_efficiency(const Design& design, const ModelSpec& spec, const CriterionMatrix& L, const SolveResult& opt) {
  return efficiency_from_info(info_exact(design, spec).entries, L, opt.criterion_value);
}

CriterionMatrix standardized_a_matrix(const PointMatrix& candidates, const ModelSpec& spec, const SolveOptions& options) {
  const int l = spec.num_terms();
  Vector diag(l);
  for (int j = 0; j < l; ++j) {
    const auto r = solve_l_optimal(candidates, spec, CriterionMatrix::c_optimal(l, j), options);
    diag[j] = 1.0 / r.criterion_value;
  }
  return {diag.asDiagonal().toDenseMatrix(), CriterionKind::StandardizedA};
}

Efficiency ei_efficiency(const Design& design, const ModelSpec& spec, const Matrix& ei, const SolveResult& opt) {
  return l_efficiency(design, spec, CriterionMatrix{ei, CriterionKind::EI}, opt);
}

}  // namespace pilot
