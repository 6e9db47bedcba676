#include "pilot/discrepancy.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "pilot/parallel.hpp"
#include "pilot/rng.hpp"

namespace pilot {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::int64_t kMinSamples = 1000;
constexpr std::int64_t kChunk = 1 << 16;

void check_point(PointView x) {
  for (double v : x) {
    if (!(v >= -1.0 && v <= 1.0)) throw InvalidInput("kernel argument outside [-1,1]");
  }
}

double uniform_factor(double x) {
  const double a = std::abs(x);
  return 0.5 * (2.0 + a - 0.5 * x * x);
}

double arcsine_factor(double x) {
  const double a = std::abs(x);
  if (a >= 1.0) return 1.0 + 1.0 / kPi;
  return 1.0 + 1.0 / kPi + 0.5 * a - (x * std::asin(x) + std::sqrt(1.0 - x * x)) / kPi;
}

DiscrepancyReport finish(double raw, const TargetDistribution& target, DiscrepancyMethod method) {
  DiscrepancyReport r;
  r.raw_d_squared = raw;
  r.target = target;
  r.method = method;
  r.clamped = raw < 0.0;
  r.d_squared = std::max(raw, 0.0);
  r.d = std::sqrt(r.d_squared);
  return r;
}

double kernel_unchecked(const double* x, const double* z, int d) {
  double k = 1.0;
  for (int j = 0; j < d; ++j) k *= 1.0 + 0.5 * (std::abs(x[j]) + std::abs(z[j]) - std::abs(x[j] - z[j]));
  return k;
}

}  // namespace

double kernel_eval(PointView x, PointView z) {
  if (x.size() != z.size()) throw InvalidInput("kernel arguments have different dimensions");
  check_point(x);
  check_point(z);
  return kernel_unchecked(x.data(), z.data(), static_cast<int>(x.size()));
}

double kernel_mean_uniform(PointView x) {
  check_point(x);
  double v = 1.0;
  for (double c : x) v *= uniform_factor(c);
  return v;
}

double kernel_mean_arcsine(PointView x) {
  check_point(x);
  double v = 1.0;
  for (double c : x) v *= arcsine_factor(c);
  return v;
}

double kernel_mean(PointView x, TargetKind kind) {
  return kind == TargetKind::Uniform ? kernel_mean_uniform(x) : kernel_mean_arcsine(x);
}

double kernel_double_mean(const TargetDistribution& target) {
  const double base = target.kind == TargetKind::Uniform ? 7.0 / 6.0 : 1.0 + 2.0 / kPi - 4.0 / (kPi * kPi);
  return std::pow(base, target.dim);
}

double design_kernel_sum(const Design& design) {
  const int m = design.support_size();
  const int d = design.dim();
  const double* pts = design.points().data();
  const auto& counts = design.counts();
  double off = 0.0;
  double diag = 0.0;
  for (int i = 0; i < m; ++i) {
    const double* xi = pts + static_cast<std::ptrdiff_t>(i) * d;
    diag += static_cast<double>(counts[i]) * counts[i] * kernel_unchecked(xi, xi, d);
    double row = 0.0;
    for (int k = i + 1; k < m; ++k) {
      row += static_cast<double>(counts[k]) * kernel_unchecked(xi, pts + static_cast<std::ptrdiff_t>(k) * d, d);
    }
    off += counts[i] * row;
  }
  const double n = static_cast<double>(design.total());
  return (diag + 2.0 * off) / (n * n);
}

DiscrepancyReport discrepancy_closed(const Design& design, const TargetDistribution& target) {
  if (design.dim() != target.dim) throw InvalidInput("design and target dimensions differ");
  double cross = 0.0;
  for (int i = 0; i < design.support_size(); ++i) cross += design.mass(i) * kernel_mean(design.point(i), target.kind);
  const double raw = kernel_double_mean(target) - 2.0 * cross + design_kernel_sum(design);
  return finish(raw, target, DiscrepancyMethod::ClosedForm);
}

DiscrepancyReport discrepancy_mc(const Design& design, const TargetDistribution& target, std::int64_t n_samples,
                                 std::uint64_t seed, int threads) {
  if (design.dim() != target.dim) throw InvalidInput("design and target dimensions differ");
  if (n_samples < kMinSamples) throw InvalidInput("Monte-Carlo discrepancy needs at least 1000 samples");

  const int d = design.dim();
  const int m = design.support_size();
  const Vector mass = design.masses();
  const double* pts = design.points().data();
  const double exact_term = design_kernel_sum(design);

  // Per-sample statistic Z = K(t, t') - 2 sum_i p_i K(x_i, t) with t, t'
  // independent target draws; E[Z] + exact_term = D^2.
  struct Chunk {
    double count = 0, mean = 0, m2 = 0;
  };
  const std::int64_t n_chunks = (n_samples + kChunk - 1) / kChunk;
  std::vector<Chunk> chunks(static_cast<std::size_t>(n_chunks));

  parallel_for(chunks.size(), threads, [&](std::size_t c) {
    Engine eng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
    const std::int64_t begin = static_cast<std::int64_t>(c) * kChunk;
    const std::int64_t len = std::min(kChunk, n_samples - begin);
    std::vector<double> t(d), t2(d);
    Chunk acc;
    for (std::int64_t s = 0; s < len; ++s) {
      for (int j = 0; j < d; ++j) t[j] = target.inverse_cdf(uniform01(eng));
      for (int j = 0; j < d; ++j) t2[j] = target.inverse_cdf(uniform01(eng));
      double z = kernel_unchecked(t.data(), t2.data(), d);
      double cross = 0.0;
      for (int i = 0; i < m; ++i) cross += mass[i] * kernel_unchecked(pts + static_cast<std::ptrdiff_t>(i) * d, t.data(), d);
      z -= 2.0 * cross;
      acc.count += 1.0;
      const double delta = z - acc.mean;
      acc.mean += delta / acc.count;
      acc.m2 += delta * (z - acc.mean);
    }
    chunks[c] = acc;
  });

  // Chan et al. pairwise combination, in chunk order.
  Chunk total;
  for (const auto& c : chunks) {
    if (c.count == 0) continue;
    const double n = total.count + c.count;
    const double delta = c.mean - total.mean;
    total.mean += delta * c.count / n;
    total.m2 += c.m2 + delta * delta * total.count * c.count / n;
    total.count = n;
  }
  const double variance = total.m2 / (total.count - 1.0);
  auto r = finish(total.mean + exact_term, target, DiscrepancyMethod::MonteCarlo);
  r.mc_std_error = std::sqrt(variance / total.count);
  return r;
}

}  // namespace pilot
