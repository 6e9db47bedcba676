#include "pilot/design_gen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "pilot/rng.hpp"
#include "pilot/sobol.hpp"

namespace pilot {

namespace {

constexpr double kCoolingRatio = 0.95;
constexpr int kCoolingSteps = 150;
constexpr int kTemperatureProbes = 100;
constexpr double kMaximinPower = 15.0;

struct Move {
  int col = 0, a = 0, b = 0;
};

Move random_move(Engine& eng, int n, int d) {
  Move m;
  m.col = static_cast<int>(uniform_index(eng, static_cast<std::uint64_t>(d)));
  m.a = static_cast<int>(uniform_index(eng, static_cast<std::uint64_t>(n)));
  m.b = static_cast<int>(uniform_index(eng, static_cast<std::uint64_t>(n - 1)));
  if (m.b >= m.a) ++m.b;
  return m;
}

// Maximin: the annealing energy is the Morris-Mitchell phi_p surrogate; the
// best-so-far ranking is (largest min distance, then smallest phi_p).
class MaximinObjective {
 public:
  explicit MaximinObjective(PointMatrix& x) : x_(x), n_(static_cast<int>(x.rows())), d2_(n_, n_), e_(n_, n_) {
    for (int i = 0; i < n_; ++i) {
      for (int k = 0; k < n_; ++k) {
        d2_(i, k) = i == k ? 0.0 : (x_.row(i) - x_.row(k)).squaredNorm();
        e_(i, k) = i == k ? 0.0 : std::pow(d2_(i, k), -0.5 * kMaximinPower);
      }
    }
    resum();
    ra_.resize(n_);
    rb_.resize(n_);
  }

  double energy() const { return std::log(sum_) / kMaximinPower; }
  std::pair<double, double> rank() const { return {-std::sqrt(min_d2_), energy()}; }

  double trial(const Move& m) {
    double delta = 0.0;
    for (int k = 0; k < n_; ++k) {
      if (k == m.a || k == m.b) continue;
      ra_[k] = swapped_d2(m.a, m.b, k, m.col);
      rb_[k] = swapped_d2(m.b, m.a, k, m.col);
      delta += std::pow(ra_[k], -0.5 * kMaximinPower) - e_(m.a, k) + std::pow(rb_[k], -0.5 * kMaximinPower) - e_(m.b, k);
    }
    return std::log(std::max(sum_ + delta, std::numeric_limits<double>::min())) / kMaximinPower;
  }

  void commit(const Move& m) {
    std::swap(x_(m.a, m.col), x_(m.b, m.col));
    for (int k = 0; k < n_; ++k) {
      if (k == m.a || k == m.b) continue;
      d2_(m.a, k) = d2_(k, m.a) = ra_[k];
      d2_(m.b, k) = d2_(k, m.b) = rb_[k];
      e_(m.a, k) = e_(k, m.a) = std::pow(ra_[k], -0.5 * kMaximinPower);
      e_(m.b, k) = e_(k, m.b) = std::pow(rb_[k], -0.5 * kMaximinPower);
    }
    resum();
  }

 private:
  // Squared distance between point `row` (with column `col` taken from `other`) and point k.
  double swapped_d2(int row, int other, int k, int col) const {
    double s = 0.0;
    for (Eigen::Index j = 0; j < x_.cols(); ++j) {
      const double v = j == col ? x_(other, j) : x_(row, j);
      const double diff = v - x_(k, j);
      s += diff * diff;
    }
    return s;
  }

  void resum() {
    sum_ = 0.0;
    min_d2_ = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_; ++i) {
      for (int k = i + 1; k < n_; ++k) {
        sum_ += e_(i, k);
        min_d2_ = std::min(min_d2_, d2_(i, k));
      }
    }
  }

  PointMatrix& x_;
  int n_;
  Matrix d2_, e_;
  std::vector<double> ra_, rb_;
  double sum_ = 0.0, min_d2_ = 0.0;
};

class CorrelationObjective {
 public:
  explicit CorrelationObjective(PointMatrix& x) : x_(x) { rebuild(); }

  double energy() const { return energy_; }
  std::pair<double, double> rank() const { return {energy_, 0.0}; }

  double trial(const Move& m) {
    trial_cross_ = cross_;
    const Eigen::Index j = m.col;
    const double dj = c_(m.b, j) - c_(m.a, j);
    for (Eigen::Index k = 0; k < c_.cols(); ++k) {
      if (k == j) continue;
      const double v = cross_(j, k) + dj * (c_(m.a, k) - c_(m.b, k));
      trial_cross_(j, k) = trial_cross_(k, j) = v;
    }
    return energy_of(trial_cross_);
  }

  void commit(const Move& m) {
    std::swap(x_(m.a, m.col), x_(m.b, m.col));
    rebuild();
  }

 private:
  void rebuild() {
    c_ = x_.rowwise() - x_.colwise().mean();
    cross_ = c_.transpose() * c_;
    energy_ = energy_of(cross_);
  }

  double energy_of(const Matrix& cross) const {
    double s = 0.0;
    for (Eigen::Index j = 0; j < cross.rows(); ++j) {
      for (Eigen::Index k = j + 1; k < cross.cols(); ++k) {
        const double denom = cross(j, j) * cross(k, k);
        if (denom > 0.0) s += cross(j, k) * cross(j, k) / denom;
      }
    }
    return s;
  }

  PointMatrix& x_;
  Matrix c_, cross_, trial_cross_;
  double energy_ = 0.0;
};

// MaxPro: energy is log of the pairwise inverse-product sum, a monotone
// transform of the criterion.
class MaxProObjective {
 public:
  explicit MaxProObjective(PointMatrix& x) : x_(x), n_(static_cast<int>(x.rows())), p_(n_, n_) {
    for (int i = 0; i < n_; ++i) {
      for (int k = 0; k < n_; ++k) p_(i, k) = i == k ? 0.0 : pair_term(i, -1, k, -1);
    }
    resum();
    ra_.resize(n_);
    rb_.resize(n_);
  }

  double energy() const { return std::log(sum_); }
  std::pair<double, double> rank() const { return {energy(), 0.0}; }

  double trial(const Move& m) {
    double delta = 0.0;
    for (int k = 0; k < n_; ++k) {
      if (k == m.a || k == m.b) continue;
      ra_[k] = pair_term(m.a, m.b, k, m.col);
      rb_[k] = pair_term(m.b, m.a, k, m.col);
      delta += ra_[k] - p_(m.a, k) + rb_[k] - p_(m.b, k);
    }
    const double s = sum_ + delta;
    if (!std::isfinite(s)) return std::numeric_limits<double>::infinity();
    return std::log(s);
  }

  void commit(const Move& m) {
    std::swap(x_(m.a, m.col), x_(m.b, m.col));
    for (int k = 0; k < n_; ++k) {
      if (k == m.a || k == m.b) continue;
      p_(m.a, k) = p_(k, m.a) = ra_[k];
      p_(m.b, k) = p_(k, m.b) = rb_[k];
    }
    resum();
  }

 private:
  // prod_j (x_rowj - x_kj)^{-2}, with column `col` of `row` taken from `other` when col >= 0.
  double pair_term(int row, int other, int k, int col) const {
    double prod = 1.0;
    for (Eigen::Index j = 0; j < x_.cols(); ++j) {
      const double v = j == col ? x_(other, j) : x_(row, j);
      const double diff = v - x_(k, j);
      prod *= diff * diff;
    }
    return prod > 0.0 ? 1.0 / prod : std::numeric_limits<double>::infinity();
  }

  void resum() {
    sum_ = 0.0;
    for (int i = 0; i < n_; ++i) {
      for (int k = i + 1; k < n_; ++k) sum_ += p_(i, k);
    }
  }

  PointMatrix& x_;
  int n_;
  Matrix p_;
  std::vector<double> ra_, rb_;
  double sum_ = 0.0;
};

// Simulated annealing over within-column swaps, geometric cooling, returns
// the best design seen (never worse than the start under Objective::rank).
template <class Objective>
PointMatrix anneal(PointMatrix x, long budget, Engine& eng) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  Objective obj(x);
  PointMatrix best = x;
  auto best_rank = obj.rank();

  double uphill = 0.0;
  int uphill_count = 0;
  for (int t = 0; t < kTemperatureProbes; ++t) {
    const double delta = obj.trial(random_move(eng, n, d)) - obj.energy();
    if (std::isfinite(delta) && delta > 0.0) {
      uphill += delta;
      ++uphill_count;
    }
  }
  // An average uphill move starts out accepted with probability 1/2.
  double temperature = uphill_count > 0 ? (uphill / uphill_count) / std::log(2.0) : 1e-12;
  const long epoch = std::max(1L, (budget + kCoolingSteps - 1) / kCoolingSteps);

  for (long it = 0; it < budget; ++it) {
    const Move m = random_move(eng, n, d);
    const double delta = obj.trial(m) - obj.energy();
    if (std::isfinite(delta) && (delta <= 0.0 || uniform01(eng) < std::exp(-delta / temperature))) {
      obj.commit(m);
      const auto r = obj.rank();
      if (r < best_rank) {
        best_rank = r;
        best = x;
      }
    }
    if ((it + 1) % epoch == 0) temperature *= kCoolingRatio;
  }
  return best;
}

std::vector<int> random_permutation(int n, Engine& eng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  shuffle(p.begin(), p.end(), eng);
  return p;
}

void check_shape(int n, int d) {
  if (n < 2) throw InvalidInput("designs need at least 2 points");
  if (d < 1) throw InvalidInput("design dimension must be at least 1");
}

void check_budget(long budget) {
  if (budget < 1) throw InvalidInput("optimizer budget must be at least 1");
}

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::ScrambledSobol: return "scrambled-sobol";
    case Family::RandomLhd: return "random-lhd";
    case Family::MaximinLhd: return "maximin-lhd";
    case Family::MinCorrLhd: return "mincorr-lhd";
    case Family::MaxProLhd: return "maxpro-lhd";
    case Family::Random: return "random";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::ScrambledSobol, Family::RandomLhd, Family::MaximinLhd, Family::MinCorrLhd,
                   Family::MaxProLhd, Family::Random}) {
    if (to_string(f) == name) return f;
  }
  throw InvalidInput("unknown design family '" + std::string(name) + "'");
}

bool is_optimized(Family family) {
  return family == Family::MaximinLhd || family == Family::MinCorrLhd || family == Family::MaxProLhd;
}

void GeneratorSpec::validate() const {
  check_shape(n, d);
  if (optimizer_budget < 0) throw InvalidInput("optimizer budget must be non-negative (0 selects the default)");
  if (family == Family::MinCorrLhd && d < 2) throw InvalidInput("mincorr-lhd needs d >= 2");
  if (family == Family::ScrambledSobol && d > SobolSequence::max_dimension()) {
    throw InvalidInput("scrambled-sobol supports d <= " + std::to_string(SobolSequence::max_dimension()));
  }
}

PointMatrix random_lhd(int n, int d, std::uint64_t seed) {
  check_shape(n, d);
  Engine eng(derive_seed(seed, {1}));
  PointMatrix x(n, d);
  for (int j = 0; j < d; ++j) {
    const auto perm = random_permutation(n, eng);
    for (int i = 0; i < n; ++i) x(i, j) = (perm[i] + uniform01(eng)) / n;
  }
  return x;
}

PointMatrix initial_midpoint_lhd(int n, int d, std::uint64_t seed) {
  check_shape(n, d);
  Engine eng(derive_seed(seed, {2}));
  PointMatrix x(n, d);
  for (int j = 0; j < d; ++j) {
    const auto perm = random_permutation(n, eng);
    for (int i = 0; i < n; ++i) x(i, j) = (perm[i] + 0.5) / n;
  }
  return x;
}

PointMatrix maximin_lhd(int n, int d, std::uint64_t seed, long budget) {
  check_budget(budget);
  Engine eng(derive_seed(seed, {3}));
  return anneal<MaximinObjective>(initial_midpoint_lhd(n, d, seed), budget, eng);
}

PointMatrix mincorr_lhd(int n, int d, std::uint64_t seed, long budget) {
  if (d < 2) throw InvalidInput("mincorr-lhd needs d >= 2");
  check_budget(budget);
  Engine eng(derive_seed(seed, {4}));
  return anneal<CorrelationObjective>(initial_midpoint_lhd(n, d, seed), budget, eng);
}

PointMatrix maxpro_lhd(int n, int d, std::uint64_t seed, long budget) {
  check_budget(budget);
  Engine eng(derive_seed(seed, {5}));
  return anneal<MaxProObjective>(initial_midpoint_lhd(n, d, seed), budget, eng);
}

PointMatrix random_design(int n, int d, std::uint64_t seed) {
  check_shape(n, d);
  Engine eng(derive_seed(seed, {6}));
  PointMatrix x(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = uniform01(eng);
  }
  return x;
}

PointMatrix generate_unit(const GeneratorSpec& spec) {
  spec.validate();
  switch (spec.family) {
    case Family::ScrambledSobol: return scrambled_sobol(spec.n, spec.d, spec.seed);
    case Family::RandomLhd: return random_lhd(spec.n, spec.d, spec.seed);
    case Family::MaximinLhd: return maximin_lhd(spec.n, spec.d, spec.seed, spec.effective_budget());
    case Family::MinCorrLhd: return mincorr_lhd(spec.n, spec.d, spec.seed, spec.effective_budget());
    case Family::MaxProLhd: return maxpro_lhd(spec.n, spec.d, spec.seed, spec.effective_budget());
    case Family::Random: return random_design(spec.n, spec.d, spec.seed);
  }
  throw InvalidInput("unknown design family");
}

Design generate(const GeneratorSpec& spec, const TargetDistribution& target) {
  if (target.dim != spec.d) throw InvalidInput("target dimension does not match the generator spec");
  return unit_cube_to_design(generate_unit(spec), target);
}

double min_pairwise_distance(const PointMatrix& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index k = i + 1; k < pts.rows(); ++k) best = std::min(best, (pts.row(i) - pts.row(k)).squaredNorm());
  }
  return std::sqrt(best);
}

double correlation_objective(const PointMatrix& pts) {
  const Matrix c = pts.rowwise() - pts.colwise().mean();
  const Matrix cross = c.transpose() * c;
  double s = 0.0;
  for (Eigen::Index j = 0; j < cross.rows(); ++j) {
    for (Eigen::Index k = j + 1; k < cross.cols(); ++k) {
      const double denom = cross(j, j) * cross(k, k);
      if (denom > 0.0) s += cross(j, k) * cross(j, k) / denom;
    }
  }
  return s;
}

double maxpro_criterion(const PointMatrix& pts) {
  const Eigen::Index n = pts.rows();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = i + 1; k < n; ++k) {
      double prod = 1.0;
      for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        const double diff = pts(i, j) - pts(k, j);
        prod *= diff * diff;
      }
      if (prod == 0.0) return std::numeric_limits<double>::infinity();
      sum += 1.0 / prod;
    }
  }
  const double avg = 2.0 * sum / (static_cast<double>(n) * static_cast<double>(n - 1));
  return std::pow(avg, 1.0 / static_cast<double>(pts.cols()));
}

}  // namespace pilot
