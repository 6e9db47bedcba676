#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "pilot/glm_info.hpp"

using namespace pilot;

namespace {

constexpr double kPi = std::numbers::pi;

ModelSpec line(Link link, double b0 = 0.0, double b1 = 0.0) {
  return ModelSpec(link, intercept_and_main_effects(1), (Vector(2) << b0, b1).finished());
}

Design two_point() {
  PointMatrix p(2, 1);
  p << -1.0, 1.0;
  return Design(p);
}

ModelSpec example1_spec() {
  return ModelSpec(Link::Logit, intercept_and_main_effects(4), (Vector(5) << -3, 4, 5, -6, 1.5).finished());
}

Matrix diag2(double a, double b) { return (Vector(2) << a, b).finished().asDiagonal(); }

double rel_fro(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("GLM weights: hand values") {
  CHECK(glm_weight(Link::Logit, 0.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(glm_weight(Link::Probit, 0.0) == doctest::Approx(2.0 / kPi).epsilon(1e-14));
  for (double eta : {-50.0, -1.0, 0.0, 3.0, 1e6}) CHECK(glm_weight(Link::Identity, eta) == 1.0);
}

TEST_CASE("GLM weights against independent formulas") {
  boost::math::normal_distribution<double> nd;
  for (double eta : {-30.0, -12.5, -6.0, -2.0, -0.3, 0.7, 1.9, 5.0, 9.0, 25.0}) {
    const double logit = std::exp(eta) / ((1.0 + std::exp(eta)) * (1.0 + std::exp(eta)));
    CHECK(glm_weight(Link::Logit, eta) == doctest::Approx(logit).epsilon(1e-12));

    const double log_phi = std::log(boost::math::pdf(nd, eta));
    const double log_cdf = std::log(boost::math::cdf(nd, eta));
    const double log_ccdf = std::log(boost::math::cdf(boost::math::complement(nd, eta)));
    const double probit = std::exp(2.0 * log_phi - log_cdf - log_ccdf);
    CHECK(glm_weight(Link::Probit, eta) == doctest::Approx(probit).epsilon(1e-9));

    CHECK(glm_weight(Link::Logit, eta) == glm_weight(Link::Logit, -eta));
    CHECK(glm_weight(Link::Probit, eta) == doctest::Approx(glm_weight(Link::Probit, -eta)).epsilon(1e-12));

    CHECK(mean_derivative(Link::Probit, eta) == doctest::Approx(boost::math::pdf(nd, eta)).epsilon(1e-12));
    CHECK(mean_derivative(Link::Logit, eta) == doctest::Approx(logit).epsilon(1e-12));
  }
  for (double eta : {-1e4, -40.0, 40.0, 1e4}) {
    const auto w = glm_weight_checked(Link::Probit, eta);
    CHECK(std::isfinite(w.value));
    CHECK(w.value >= 0.0);
    CHECK_FALSE(w.clamped);
  }
}

TEST_CASE("information of exact designs") {
  const Matrix I = info_exact(two_point(), line(Link::Logit)).entries;
  CHECK((I - 0.25 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);

  PointMatrix one(1, 2);
  one << 0.3, -0.6;
  const ModelSpec quad(Link::Probit, intercept_and_main_effects(2), (Vector(3) << 0.2, 1, -1).finished());
  Eigen::SelfAdjointEigenSolver<Matrix> es(info_exact(Design(one), quad).entries);
  CHECK(es.eigenvalues()(1) < 1e-14 * es.eigenvalues()(2));

  PointMatrix p(3, 1);
  p << -0.5, 0.1, 0.9;
  const Design d(p, {1, 2, 3});
  CHECK(info_exact(d, line(Link::Identity, 1, 2)).entries == info_exact(d, line(Link::Identity, -7, 0.5)).entries);

  // Affine in the empirical measure.
  const Vector w1 = (Vector(3) << 0.2, 0.5, 0.3).finished();
  const Vector w2 = (Vector(3) << 0.6, 0.1, 0.3).finished();
  const ModelSpec s = line(Link::Logit, 0.5, -2);
  const Matrix mix = info_weighted(p, 0.3 * w1 + 0.7 * w2, s);
  CHECK((mix - (0.3 * info_weighted(p, w1, s) + 0.7 * info_weighted(p, w2, s))).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("quadrature rules") {
  const auto gl = quadrature({TargetKind::Uniform, 1}, 2);
  CHECK(gl.nodes_1d()[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(gl.nodes_1d()[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(gl.weights_1d()[0] == doctest::Approx(0.5).epsilon(1e-15));

  const auto gc = quadrature({TargetKind::Arcsine, 1}, 2);
  CHECK(gc.nodes_1d()[0] == doctest::Approx(-std::cos(kPi / 4)).epsilon(1e-15));
  CHECK(gc.nodes_1d()[1] == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(gc.weights_1d()[1] == 0.5);

  for (TargetKind kind : {TargetKind::Uniform, TargetKind::Arcsine}) {
    for (int level : {2, 5, 12}) {
      const auto r = quadrature({kind, 3}, level);
      CHECK(r.size() == level * level * level);
      CHECK(std::abs(r.weight_vector().sum() - 1.0) < 1e-12);
      std::vector<double> x;
      r.node(1, x);
      CHECK(x[2] == r.nodes_1d()[1]);
      CHECK(x[0] == r.nodes_1d()[0]);
    }
  }
  CHECK_THROWS_AS(quadrature({TargetKind::Uniform, 1}, 1), InvalidInput);

  // Level-24 Gauss-Legendre against an independent tabulation.
  const auto r24 = quadrature({TargetKind::Uniform, 1}, 24);
  const auto& ref_x = boost::math::quadrature::gauss<double, 24>::abscissa();
  const auto& ref_w = boost::math::quadrature::gauss<double, 24>::weights();
  for (std::size_t k = 0; k < ref_x.size(); ++k) {
    const std::size_t hi = 12 + k;
    CHECK(std::abs(r24.nodes_1d()[hi] - ref_x[k]) < 1e-14);
    CHECK(std::abs(r24.weights_1d()[hi] - 0.5 * ref_w[k]) < 1e-14);
    CHECK(std::abs(r24.nodes_1d()[11 - k] + ref_x[k]) < 1e-14);
  }

  CHECK(default_quadrature_level(4) == 24);
  CHECK(default_quadrature_level(6) == 12);
  CHECK(default_quadrature_level(7) == 8);
}

TEST_CASE("information against target distributions") {
  for (int level : {2, 3, 24}) {
    const auto ru = quadrature({TargetKind::Uniform, 1}, level);
    const auto ra = quadrature({TargetKind::Arcsine, 1}, level);
    const Matrix iu = info_target({TargetKind::Uniform, 1}, line(Link::Identity, 2, 3), ru).entries;
    const Matrix ia = info_target({TargetKind::Arcsine, 1}, line(Link::Identity), ra).entries;
    const Matrix lu = info_target({TargetKind::Uniform, 1}, line(Link::Logit), ru).entries;
    CHECK((iu - diag2(1.0, 1.0 / 3.0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ia - diag2(1.0, 0.5)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((lu - 0.25 * diag2(1.0, 1.0 / 3.0)).cwiseAbs().maxCoeff() < 1e-12);

    const Matrix eu = ei_matrix(line(Link::Logit), {TargetKind::Uniform, 1}, ru);
    CHECK((eu - diag2(1.0, 1.0 / 3.0) / 16.0).cwiseAbs().maxCoeff() < 1e-12);
    const Matrix ei = ei_matrix(line(Link::Identity, 4, 1), {TargetKind::Arcsine, 1}, ra);
    CHECK((ei - ia).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK_THROWS_AS(info_target({TargetKind::Uniform, 1}, line(Link::Logit), quadrature({TargetKind::Arcsine, 1}, 4)),
                  InvalidInput);
}

TEST_CASE("quadrature convergence for the example models") {
  const ModelSpec ex1 = example1_spec();
  for (TargetKind kind : {TargetKind::Uniform, TargetKind::Arcsine}) {
    const TargetDistribution t{kind, 4};
    const Matrix a = info_target(t, ex1, quadrature(t, 24)).entries;
    const Matrix b = info_target(t, ex1, quadrature(t, 28)).entries;
    CHECK(rel_fro(a, b) <= 1e-8);
    CHECK(min_eigenvalue(a) >= -1e-10);
    const Matrix e = ei_matrix(ex1, t, quadrature(t, 24));
    CHECK(min_eigenvalue(e) >= -1e-10);
    CHECK((e - e.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("quadrature agrees with Monte Carlo") {
  const ModelSpec s(Link::Probit, {Monomial{{0, 0}}, Monomial{{1, 0}}, Monomial{{0, 1}}, Monomial{{1, 1}}},
                    (Vector(4) << 0.3, 1.0, -0.8, 0.5).finished());
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (TargetKind kind : {TargetKind::Uniform, TargetKind::Arcsine}) {
    const TargetDistribution t{kind, 2};
    const Matrix q = info_target(t, s, quadrature(t, 24)).entries;
    const long n = 1000000;
    Matrix sum = Matrix::Zero(4, 4), sum2 = Matrix::Zero(4, 4);
    double x[2];
    for (long k = 0; k < n; ++k) {
      for (double& c : x) c = kind == TargetKind::Uniform ? 2.0 * u01(rng) - 1.0 : -std::cos(kPi * u01(rng));
      const Vector g = basis_eval(s, x);
      const Matrix term = glm_weight(s, x) * g * g.transpose();
      sum += term;
      sum2 += term.cwiseProduct(term);
    }
    const Matrix mean = sum / n;
    const Matrix se = ((sum2 / n - mean.cwiseProduct(mean)) / (n - 1)).cwiseSqrt();
    CHECK(((q - mean).cwiseAbs().array() <= 3.0 * se.array() + 1e-15).all());
  }
}
