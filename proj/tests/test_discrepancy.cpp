#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "pilot/design_gen.hpp"
#include "pilot/discrepancy.hpp"

using namespace pilot;

namespace {

constexpr double kPi = std::numbers::pi;

// One-dimensional kernel factor written out directly.
double factor(double x, double z) { return 1.0 + 0.5 * (std::abs(x) + std::abs(z) - std::abs(x - z)); }

// Integral of the factor in z against the uniform density 1/2, split at the kinks.
double oracle_mean_uniform_1d(double x) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [x](double z) { return 0.5 * factor(x, z); };
  double s = 0.0;
  double a = -1.0;
  for (double b : {std::min(0.0, x), std::max(0.0, x), 1.0}) {
    if (b > a) s += gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-14);
    a = std::max(a, b);
  }
  return s;
}

// Arcsine mean through z = -cos(theta), theta uniform on [0, pi].
double oracle_mean_arcsine_1d(double x) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [x](double t) { return factor(x, -std::cos(t)) / kPi; };
  const double tx = std::acos(-x);
  const double t0 = kPi / 2;
  double s = 0.0;
  double a = 0.0;
  for (double b : {std::min(tx, t0), std::max(tx, t0), kPi}) {
    if (b > a) s += gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-14);
    a = std::max(a, b);
  }
  return s;
}

double oracle_double_mean_1d(TargetKind kind) {
  using boost::math::quadrature::gauss_kronrod;
  auto inner = [kind](double x) {
    return kind == TargetKind::Uniform ? oracle_mean_uniform_1d(x) : oracle_mean_arcsine_1d(x);
  };
  if (kind == TargetKind::Uniform) {
    auto f = [&](double x) { return 0.5 * inner(x); };
    return gauss_kronrod<double, 31>::integrate(f, -1.0, 0.0, 15, 1e-13) +
           gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 15, 1e-13);
  }
  auto f = [&](double t) { return inner(-std::cos(t)) / kPi; };
  return gauss_kronrod<double, 31>::integrate(f, 0.0, kPi / 2, 15, 1e-13) +
         gauss_kronrod<double, 31>::integrate(f, kPi / 2, kPi, 15, 1e-13);
}

// Squared discrepancy assembled from the oracle integrals and a direct double sum.
double oracle_d2(const Design& design, TargetKind kind) {
  const int d = design.dim();
  double cst = std::pow(oracle_double_mean_1d(kind), d);
  double cross = 0.0, gram = 0.0;
  for (int i = 0; i < design.support_size(); ++i) {
    double m = 1.0;
    for (int c = 0; c < d; ++c) {
      const double x = design.point(i)[c];
      m *= kind == TargetKind::Uniform ? oracle_mean_uniform_1d(x) : oracle_mean_arcsine_1d(x);
    }
    cross += design.mass(i) * m;
    for (int k = 0; k < design.support_size(); ++k) {
      double kv = 1.0;
      for (int c = 0; c < d; ++c) kv *= factor(design.point(i)[c], design.point(k)[c]);
      gram += design.mass(i) * design.mass(k) * kv;
    }
  }
  return cst - 2.0 * cross + gram;
}

Design random_design_pm1(int n, int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointMatrix p(n, d);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) p(i, c) = u(rng);
  }
  return Design(p);
}

Design single(std::initializer_list<double> x) {
  PointMatrix p(1, x.size());
  int c = 0;
  for (double v : x) p(0, c++) = v;
  return Design(p);
}

}  // namespace

TEST_CASE("kernel values") {
  const double z0[] = {0.0, 0.0, 0.0};
  CHECK(kernel_eval(z0, z0) == 1.0);
  const double one[] = {1.0};
  CHECK(kernel_eval(one, one) == 2.0);
  const double a[] = {1.0, 0.0}, b[] = {-1.0, 0.0};
  CHECK(kernel_eval(a, b) == 1.0);
  const double c3[] = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(kernel_eval(a, c3), InvalidInput);
  const double out[] = {1.5};
  CHECK_THROWS_AS(kernel_eval(out, one), InvalidInput);
}

TEST_CASE("kernel Gram matrices are positive semidefinite") {
  std::mt19937_64 rng(7);
  for (int d : {1, 3}) {
    const Design des = random_design_pm1(30, d, rng);
    Matrix gram(30, 30);
    for (int i = 0; i < 30; ++i) {
      for (int k = 0; k < 30; ++k) gram(i, k) = kernel_eval(des.point(i), des.point(k));
    }
    CHECK(min_eigenvalue(gram) > -1e-12);
  }
}

TEST_CASE("kernel means: hand values") {
  const double zero[] = {0.0}, one[] = {1.0}, m1[] = {-1.0}, pair[] = {0.0, 1.0};
  CHECK(kernel_mean_uniform(zero) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(kernel_mean_uniform(one) == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(kernel_mean_uniform(pair) == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(kernel_mean_arcsine(zero) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(kernel_mean_arcsine(one) == doctest::Approx(1.0 + 1.0 / kPi).epsilon(1e-15));
  CHECK(kernel_mean_arcsine(m1) == kernel_mean_arcsine(one));
}

TEST_CASE("kernel means agree with numerical integration") {
  for (double x : {-1.0, -0.83, -0.4, 0.0, 0.05, 0.5, 0.999, 1.0}) {
    const double p[] = {x};
    CHECK(std::abs(kernel_mean_uniform(p) - oracle_mean_uniform_1d(x)) < 1e-12);
    CHECK(std::abs(kernel_mean_arcsine(p) - oracle_mean_arcsine_1d(x)) < 1e-12);
  }
  CHECK(std::abs(kernel_double_mean({TargetKind::Uniform, 1}) - oracle_double_mean_1d(TargetKind::Uniform)) < 1e-12);
  CHECK(std::abs(kernel_double_mean({TargetKind::Arcsine, 1}) - oracle_double_mean_1d(TargetKind::Arcsine)) < 1e-12);
  CHECK(kernel_double_mean({TargetKind::Uniform, 3}) == doctest::Approx(std::pow(7.0 / 6.0, 3)).epsilon(1e-14));
}

TEST_CASE("closed-form discrepancy: single point at the origin") {
  const Design o = single({0.0});
  const auto u = discrepancy_closed(o, {TargetKind::Uniform, 1});
  CHECK(std::abs(u.d_squared - 1.0 / 6.0) < 1e-12);
  CHECK(u.d == doctest::Approx(std::sqrt(1.0 / 6.0)));
  const auto a = discrepancy_closed(o, {TargetKind::Arcsine, 1});
  CHECK(std::abs(a.d_squared - (2.0 / kPi - 4.0 / (kPi * kPi))) < 1e-12);
  CHECK(a.d_squared == doctest::Approx(0.231335).epsilon(1e-6));
}

TEST_CASE("closed-form discrepancy agrees with the integration oracle") {
  std::mt19937_64 rng(11);
  for (int d : {1, 2, 3}) {
    for (TargetKind kind : {TargetKind::Uniform, TargetKind::Arcsine}) {
      const Design des = random_design_pm1(6, d, rng);
      const auto r = discrepancy_closed(des, {kind, d});
      CHECK(std::abs(r.raw_d_squared - oracle_d2(des, kind)) < 1e-11);
      CHECK(r.d_squared >= 0.0);
    }
  }
}

TEST_CASE("reflection invariance") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const Design des = random_design_pm1(8, 3, rng);
    for (TargetKind kind : {TargetKind::Uniform, TargetKind::Arcsine}) {
      const double base = discrepancy_closed(des, {kind, 3}).d;
      for (int c = 0; c < 3; ++c) {
        PointMatrix p = des.points();
        p.col(c) *= -1.0;
        CHECK(std::abs(discrepancy_closed(Design(p, des.counts()), {kind, 3}).d - base) < 1e-12);
      }
    }
  }
}

TEST_CASE("replication only changes the empirical weights") {
  PointMatrix p(2, 2);
  p << 0.2, -0.4, -0.9, 0.6;
  const Design a(p, {1, 1});
  const Design b(p, {3, 3});
  PointMatrix dup(4, 2);
  dup << 0.2, -0.4, -0.9, 0.6, 0.2, -0.4, -0.9, 0.6;
  const Design c(dup);
  for (TargetKind kind : {TargetKind::Uniform, TargetKind::Arcsine}) {
    const double da = discrepancy_closed(a, {kind, 2}).d_squared;
    CHECK(discrepancy_closed(b, {kind, 2}).d_squared == doctest::Approx(da).epsilon(1e-14));
    CHECK(discrepancy_closed(c, {kind, 2}).d_squared == doctest::Approx(da).epsilon(1e-14));
  }
}

TEST_CASE("Monte-Carlo estimate") {
  const Design o = single({0.0});
  const auto mc = discrepancy_mc(o, {TargetKind::Uniform, 1}, 1000000, 5);
  REQUIRE(mc.mc_std_error.has_value());
  CHECK(std::abs(mc.raw_d_squared - 1.0 / 6.0) <= 3.0 * *mc.mc_std_error);
  CHECK_THROWS_AS(discrepancy_mc(o, {TargetKind::Uniform, 1}, 999, 5), InvalidInput);

  const Design ssd = generate({Family::ScrambledSobol, 16, 4, 9, 0}, {TargetKind::Uniform, 4});
  const auto closed = discrepancy_closed(ssd, {TargetKind::Uniform, 4});
  const auto est = discrepancy_mc(ssd, {TargetKind::Uniform, 4}, 1000000, 6);
  CHECK(std::abs(est.raw_d_squared - closed.raw_d_squared) <= 3.0 * *est.mc_std_error);

  // Chunked seeding makes the estimate independent of the worker count.
  const auto t1 = discrepancy_mc(ssd, {TargetKind::Arcsine, 4}, 300000, 8, 1);
  const auto t4 = discrepancy_mc(ssd, {TargetKind::Arcsine, 4}, 300000, 8, 4);
  CHECK(t1.raw_d_squared == t4.raw_d_squared);
  CHECK(*t1.mc_std_error == *t4.mc_std_error);
}
