#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "pilot/glm_info.hpp"
#include "pilot/opt_solver.hpp"

using namespace pilot;

namespace {

ModelSpec line(Link link, double b0 = 0.0, double b1 = 0.0) {
  return ModelSpec(link, intercept_and_main_effects(1), (Vector(2) << b0, b1).finished());
}

Design points1d(std::initializer_list<double> xs) {
  PointMatrix p(xs.size(), 1);
  Eigen::Index i = 0;
  for (double x : xs) p(i++, 0) = x;
  return Design(p);
}

// Best A-criterion over two-point designs on a 21-point grid with weights in steps of 0.01.
double brute_force_two_point(const ModelSpec& spec) {
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a <= 20; ++a) {
    for (int b = a + 1; b <= 20; ++b) {
      const double xa[] = {-1.0 + 0.1 * a}, xb[] = {-1.0 + 0.1 * b};
      const Vector ga = basis_eval(spec, xa), gb = basis_eval(spec, xb);
      const double wa = glm_weight(spec, xa), wb = glm_weight(spec, xb);
      for (int k = 1; k < 100; ++k) {
        const double p = 0.01 * k;
        const Matrix I = p * wa * ga * ga.transpose() + (1.0 - p) * wb * gb * gb.transpose();
        const double det = I(0, 0) * I(1, 1) - I(0, 1) * I(1, 0);
        if (det <= 0.0) continue;
        best = std::min(best, (I(0, 0) + I(1, 1)) / det);
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("criterion values") {
  CHECK(l_value(Matrix(0.25 * Matrix::Identity(2, 2)), Matrix(Matrix::Identity(2, 2))) == doctest::Approx(8.0));
  for (int l : {1, 3, 6}) {
    CHECK(l_value(Matrix(Matrix::Identity(l, l)), Matrix(Matrix::Identity(l, l))) == doctest::Approx(l));
  }
  const Matrix single = info_exact(points1d({0.4}), line(Link::Logit)).entries;
  try {
    l_value(single, Matrix(Matrix::Identity(2, 2)));
    FAIL("expected a singular information error");
  } catch (const SingularInformation& e) {
    const Vector v = e.null_direction();
    CHECK((single * v).norm() < 1e-12);
    CHECK(std::string(e.what()).find("singular") != std::string::npos);
  }
  CHECK_THROWS_AS(l_value(Matrix(Matrix::Identity(2, 2)), Matrix(Matrix::Identity(3, 3))), InvalidInput);
}

TEST_CASE("criterion matrices") {
  CHECK(CriterionMatrix::a_optimal(3).entries == Matrix::Identity(3, 3));
  const auto c = CriterionMatrix::c_optimal(3, 1);
  CHECK(c.entries(1, 1) == 1.0);
  CHECK(c.entries.sum() == 1.0);
  CHECK_THROWS_AS(CriterionMatrix::c_optimal(3, 3), InvalidInput);
  Matrix ns(2, 2);
  ns << 1, 2, 0, 1;
  CHECK_THROWS_AS(CriterionMatrix::custom(ns), InvalidInput);
  Matrix neg(2, 2);
  neg << 1, 0, 0, -1;
  CHECK_THROWS_AS(CriterionMatrix::custom(neg), InvalidInput);
}

TEST_CASE("candidate sets") {
  const PointMatrix g = candidate_grid(1, 5);
  REQUIRE(g.rows() == 5);
  const double expect[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  for (int i = 0; i < 5; ++i) CHECK(g(i, 0) == doctest::Approx(expect[i]).epsilon(1e-15));
  CHECK(candidate_grid(4, 7).rows() == 2401);
  try {
    candidate_grid(7, 7);
    FAIL("expected the tensor cap to reject 7^7");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("Sobol") != std::string::npos);
  }
  const PointMatrix cloud = candidate_cloud(5, 1024, 3);
  CHECK(cloud.rows() == 1024 + 32);
  CHECK((cloud.array().abs() <= 1.0).all());
  CHECK(default_candidates(1).rows() == 201);
  CHECK(default_candidates(3).rows() == 343);
}

TEST_CASE("solver: analytic optima on the line") {
  const PointMatrix grid = candidate_grid(1, 201);
  const auto logit = solve_l_optimal(grid, line(Link::Logit), CriterionMatrix::a_optimal(2));
  CHECK(logit.converged);
  CHECK(logit.equivalence_gap <= 1e-7);
  CHECK(std::abs(logit.criterion_value - 8.0) <= 1e-6);
  CHECK(logit.weights.weights[0] == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(logit.weights.weights[200] == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(std::abs(logit.weights.weights.sum() - 1.0) < 1e-12);
  CHECK((logit.weights.weights.array() >= 0.0).all());

  const auto ident = solve_l_optimal(grid, line(Link::Identity, 3, -1), CriterionMatrix::a_optimal(2));
  CHECK(std::abs(ident.criterion_value - 2.0) <= 1e-6);
  CHECK(ident.weights.weights[0] + ident.weights.weights[200] > 1.0 - 1e-4);

  const auto slope = solve_l_optimal(grid, line(Link::Identity), CriterionMatrix::c_optimal(2, 1));
  CHECK(std::abs(slope.criterion_value - 1.0) <= 1e-6);
  CHECK(slope.weights.weights[0] + slope.weights.weights[200] > 1.0 - 1e-4);
}

TEST_CASE("solver: certificate and limits") {
  const PointMatrix grid = candidate_grid(2, 9);
  const ModelSpec s(Link::Probit, intercept_and_main_effects(2), (Vector(3) << 0.4, -1.0, 0.7).finished());
  SolveOptions o;
  o.tol = 1e-6;
  o.record_history = true;
  const auto r = solve_l_optimal(grid, s, CriterionMatrix::a_optimal(3), o);
  CHECK(r.converged);
  CHECK(r.equivalence_gap <= 1e-6);
  // Equivalence theorem: derivatives never exceed the criterion by more than the gap.
  CHECK(r.derivatives.maxCoeff() <= r.criterion_value * (1.0 + 1e-6) + 1e-12);
  CHECK(r.history.size() == static_cast<std::size_t>(r.iterations) + 1);

  SolveOptions capped;
  capped.max_iter = 3;
  capped.tol = 1e-12;
  const auto c = solve_l_optimal(grid, s, CriterionMatrix::a_optimal(3), capped);
  CHECK_FALSE(c.converged);
  CHECK(c.iterations == 3);

  PointMatrix one(1, 1);
  one << 0.3;
  CHECK_THROWS_AS(solve_l_optimal(one, line(Link::Logit), CriterionMatrix::a_optimal(2)), InfeasibleCandidates);
}

TEST_CASE("solver matches a brute-force two-point search") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  const PointMatrix grid = candidate_grid(1, 201);
  for (int rep = 0; rep < 5; ++rep) {
    const Link link = rep % 2 ? Link::Probit : Link::Logit;
    const ModelSpec s = line(link, coef(rng), coef(rng));
    const double brute = brute_force_two_point(s);
    const auto r = solve_l_optimal(grid, s, CriterionMatrix::a_optimal(2));
    CHECK(r.converged);
    CHECK(std::abs(r.criterion_value - brute) / brute <= 0.005);
  }
}

TEST_CASE("efficiencies") {
  const PointMatrix grid = candidate_grid(1, 201);
  const ModelSpec s = line(Link::Logit);
  const auto opt = solve_l_optimal(grid, s, CriterionMatrix::a_optimal(2));

  const Matrix self = info_weighted(grid, opt.weights.weights, s);
  CHECK(efficiency_from_info(self, CriterionMatrix::a_optimal(2), opt.criterion_value).value ==
        doctest::Approx(1.0).epsilon(1e-12));

  const auto two = l_efficiency(points1d({-1.0, 1.0}), s, CriterionMatrix::a_optimal(2), opt);
  CHECK(std::abs(two.value - 1.0) <= 1e-6);
  CHECK_FALSE(two.singular);

  const auto one = l_efficiency(points1d({0.5}), s, CriterionMatrix::a_optimal(2), opt);
  CHECK(one.value == 0.0);
  CHECK(one.singular);
  CHECK(std::isinf(one.criterion));

  const auto inner = l_efficiency(points1d({-0.5, 0.5}), s, CriterionMatrix::a_optimal(2), opt);
  CHECK(inner.value > 0.0);
  CHECK(inner.value < 1.0);

  // Scaling L scales both criterion values and leaves the efficiency unchanged.
  const CriterionMatrix L3 = CriterionMatrix::custom(3.0 * Matrix::Identity(2, 2));
  const auto opt3 = solve_l_optimal(grid, s, L3);
  CHECK(opt3.criterion_value == doctest::Approx(3.0 * opt.criterion_value).epsilon(1e-6));
  CHECK(l_efficiency(points1d({-0.5, 0.5}), s, L3, opt3).value == doctest::Approx(inner.value).epsilon(1e-6));
}

TEST_CASE("standardized A-optimality") {
  const PointMatrix grid = candidate_grid(1, 201);
  const ModelSpec ident = line(Link::Identity);
  const auto sa = standardized_a_matrix(grid, ident);
  CHECK(sa.kind == CriterionKind::StandardizedA);
  CHECK(sa.entries(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sa.entries(1, 1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sa.entries(0, 1) == 0.0);
  const auto r = solve_l_optimal(grid, ident, sa);
  CHECK(r.criterion_value == doctest::Approx(2.0).epsilon(1e-6));

  // Each summand is at least one at any design, so the optimum is at least l.
  const ModelSpec logit = line(Link::Logit, 0.5, 2.0);
  const auto sl = standardized_a_matrix(grid, logit);
  CHECK((sl.entries.diagonal().array() > 0.0).all());
  const auto rl = solve_l_optimal(grid, logit, sl);
  CHECK(rl.criterion_value >= 2.0 - 1e-6);
}

TEST_CASE("EI efficiency") {
  const PointMatrix grid = candidate_grid(1, 201);
  const TargetDistribution unif{TargetKind::Uniform, 1};
  const auto rule = quadrature(unif, 24);

  const ModelSpec logit = line(Link::Logit, 0.3, 1.5);
  const Matrix A = ei_matrix(logit, unif, rule);
  const auto opt = solve_l_optimal(grid, logit, CriterionMatrix::custom(A, CriterionKind::EI));
  const Matrix self = info_weighted(grid, opt.weights.weights, logit);
  CHECK(efficiency_from_info(self, {A, CriterionKind::EI}, opt.criterion_value).value ==
        doctest::Approx(1.0).epsilon(1e-12));
  const auto single = ei_efficiency(points1d({0.1}), logit, A, opt);
  CHECK(single.singular);
  CHECK(single.value == 0.0);

  // Identity link: the EI matrix is the moment matrix of I-optimality.
  const ModelSpec ident = line(Link::Identity, 2.0, -1.0);
  const Matrix Ai = ei_matrix(ident, unif, rule);
  Matrix moments(2, 2);
  moments << 1.0, 0.0, 0.0, 1.0 / 3.0;
  CHECK((Ai - moments).cwiseAbs().maxCoeff() < 1e-14);
  const auto opt_i = solve_l_optimal(grid, ident, CriterionMatrix::custom(moments));
  const auto opt_ei = solve_l_optimal(grid, ident, {Ai, CriterionKind::EI});
  const Design d = points1d({-0.8, 0.0, 0.6});
  CHECK(ei_efficiency(d, ident, Ai, opt_ei).value ==
        doctest::Approx(l_efficiency(d, ident, CriterionMatrix::custom(moments), opt_i).value).epsilon(1e-9));
}
