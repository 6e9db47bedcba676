#include "pilot/glm_info.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace pilot {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kProbitWeightAtZero = 2.0 / kPi;
constexpr double kProbitClamp = 1e6 * kProbitWeightAtZero;
constexpr long kBlockRows = 4096;

// log(erfc(z)); switches to the asymptotic series once erfc underflows.
double log_erfc(double z) {
  const double e = std::erfc(z);
  if (e > 0.0 && std::isfinite(std::log(e)) && e > 1e-300) return std::log(e);
  const double z2 = z * z;
  return -z2 - std::log(z * std::sqrt(kPi)) + std::log1p(-0.5 / z2 + 0.75 / (z2 * z2));
}

// log Phi(eta) via the complementary error function.
double log_normal_cdf(double eta) { return std::log(0.5) + log_erfc(-eta / std::numbers::sqrt2); }

double log_normal_pdf(double eta) { return -0.5 * eta * eta - 0.5 * std::log(2.0 * kPi); }

void check_rule(const TargetDistribution& target, const QuadratureRule& rule, const ModelSpec& spec) {
  if (rule.target().kind != target.kind || rule.dim() != target.dim) {
    throw InvalidInput("quadrature rule does not match the target distribution");
  }
  if (spec.dim() != target.dim) throw InvalidInput("model and target dimensions differ");
}

int max_exponent(const ModelSpec& spec) {
  int e = 0;
  for (const auto& m : spec.basis()) {
    for (int x : m.exponents) e = std::max(e, x);
  }
  return e;
}

// Tensor quadrature of f(eta) g g^T where the integrand factor is supplied
// by `factor`.  Processes nodes in blocks: B holds sqrt(q_k f_k) g_k rows and
// the sum accumulates B^T B in node order.
template <class Factor>
Matrix tensor_integral(const ModelSpec& spec, const QuadratureRule& rule, Factor&& factor) {
  const int d = rule.dim();
  const int l = spec.num_terms();
  const int level = rule.level();
  const int emax = 2 * max_exponent(spec);
  const auto& nodes = rule.nodes_1d();
  const auto& w1 = rule.weights_1d();

  // powers[i][e] = node_i^e
  std::vector<std::vector<double>> powers(level, std::vector<double>(emax + 1, 1.0));
  for (int i = 0; i < level; ++i) {
    for (int e = 1; e <= emax; ++e) powers[i][e] = powers[i][e - 1] * nodes[i];
  }

  Matrix sum = Matrix::Zero(l, l);
  Matrix block(std::min(kBlockRows, rule.size()), l);
  std::vector<int> idx(d, 0);
  Vector g(l);
  long filled = 0;
  const auto& basis = spec.basis();
  const Vector& beta = spec.beta();

  for (long k = 0; k < rule.size(); ++k) {
    double q = 1.0;
    for (int c = 0; c < d; ++c) q *= w1[idx[c]];
    for (int j = 0; j < l; ++j) {
      double v = 1.0;
      const auto& ex = basis[j].exponents;
      for (int c = 0; c < d; ++c) v *= powers[idx[c]][ex[c]];
      g[j] = v;
    }
    const double f = q * factor(beta.dot(g));
    block.row(filled++) = std::sqrt(std::max(f, 0.0)) * g.transpose();
    if (filled == block.rows()) {
      sum.noalias() += block.transpose() * block;
      filled = 0;
    }
    for (int c = d - 1; c >= 0; --c) {
      if (++idx[c] < level) break;
      idx[c] = 0;
    }
  }
  if (filled > 0) sum.noalias() += block.topRows(filled).transpose() * block.topRows(filled);
  return 0.5 * (sum + sum.transpose());
}

// For a constant integrand factor the tensor sum factorises per coordinate.
Matrix factorised_moment_matrix(const ModelSpec& spec, const QuadratureRule& rule) {
  const int l = spec.num_terms();
  const int emax = 2 * max_exponent(spec);
  const auto& nodes = rule.nodes_1d();
  const auto& w1 = rule.weights_1d();
  std::vector<double> moments(emax + 1, 0.0);
  for (int e = 0; e <= emax; ++e) {
    for (std::size_t i = 0; i < nodes.size(); ++i) moments[e] += w1[i] * std::pow(nodes[i], e);
  }
  Matrix m(l, l);
  for (int a = 0; a < l; ++a) {
    for (int b = a; b < l; ++b) {
      double v = 1.0;
      for (int c = 0; c < spec.dim(); ++c) v *= moments[spec.basis()[a].exponents[c] + spec.basis()[b].exponents[c]];
      m(a, b) = m(b, a) = v;
    }
  }
  return m;
}

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 1 ? z : p1;
      const double pn1 = n == 1 ? 1.0 : p0;
      dp = n * (z * pn - pn1) / (z * z - 1.0);
      const double step = pn / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace

WeightValue glm_weight_checked(Link link, double eta) {
  switch (link) {
    case Link::Identity: return {1.0, false};
    case Link::Logit: {
      const double a = std::abs(eta);
      const double e = std::exp(-a);
      return {e / ((1.0 + e) * (1.0 + e)), false};
    }
    case Link::Probit: {
      const double log_w = 2.0 * log_normal_pdf(eta) - log_normal_cdf(eta) - log_normal_cdf(-eta);
      const double w = std::exp(log_w);
      if (!std::isfinite(w) || w > kProbitClamp) return {kProbitClamp, true};
      return {w, false};
    }
  }
  return {0.0, false};
}

double glm_weight(Link link, double eta) { return glm_weight_checked(link, eta).value; }

double glm_weight(const ModelSpec& spec, PointView x) { return glm_weight(spec.link(), linear_predictor(spec, x)); }

double mean_derivative(Link link, double eta) {
  switch (link) {
    case Link::Identity: return 1.0;
    case Link::Logit: return glm_weight(Link::Logit, eta);
    case Link::Probit: return std::exp(log_normal_pdf(eta));
  }
  return 0.0;
}

Matrix info_weighted(const PointMatrix& points, const Vector& weights, const ModelSpec& spec) {
  if (points.cols() != spec.dim()) throw InvalidInput("point dimension does not match the model");
  const int l = spec.num_terms();
  Matrix info = Matrix::Zero(l, l);
  Vector g(l);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (weights[i] == 0.0) continue;
    basis_eval_into(spec, row_view(points, i), g);
    const double w = weights[i] * glm_weight(spec.link(), spec.beta().dot(g));
    info.selfadjointView<Eigen::Lower>().rankUpdate(g, w);
  }
  return info.selfadjointView<Eigen::Lower>();
}

InfoMatrix info_exact(const Design& design, const ModelSpec& spec) {
  return {info_weighted(design.points(), design.masses(), spec), InfoSource::ExactDesign};
}

QuadratureRule::QuadratureRule(TargetDistribution target, int level) : target_(target), level_(level), size_(1) {
  if (level < 2) throw InvalidInput("quadrature level must be at least 2");
  if (target.dim < 1) throw InvalidInput("quadrature dimension must be at least 1");
  for (int c = 0; c < target.dim; ++c) {
    if (size_ > (1L << 40) / level) throw InvalidInput("quadrature rule too large");
    size_ *= level;
  }
  if (target.kind == TargetKind::Uniform) {
    gauss_legendre(level, nodes_, weights_);
    for (double& w : weights_) w *= 0.5;
  } else {
    nodes_.resize(level);
    weights_.assign(level, 1.0 / level);
    // cos((2k-1) pi / (2 level)), k = level..1 so that nodes ascend
    for (int i = 0; i < level; ++i) nodes_[i] = -std::cos((2.0 * (i + 1) - 1.0) * kPi / (2.0 * level));
  }
}

void QuadratureRule::node(long k, std::vector<double>& out) const {
  out.resize(dim());
  for (int c = dim() - 1; c >= 0; --c) {
    out[c] = nodes_[k % level_];
    k /= level_;
  }
}

double QuadratureRule::weight(long k) const {
  double w = 1.0;
  for (int c = 0; c < dim(); ++c) {
    w *= weights_[k % level_];
    k /= level_;
  }
  return w;
}

PointMatrix QuadratureRule::node_matrix() const {
  PointMatrix pts(size_, dim());
  std::vector<double> x;
  for (long k = 0; k < size_; ++k) {
    node(k, x);
    for (int c = 0; c < dim(); ++c) pts(k, c) = x[c];
  }
  return pts;
}

Vector QuadratureRule::weight_vector() const {
  Vector w(size_);
  for (long k = 0; k < size_; ++k) w[k] = weight(k);
  return w;
}

QuadratureRule quadrature(const TargetDistribution& target, int level) { return QuadratureRule(target, level); }

int default_quadrature_level(int d) {
  if (d <= 4) return 24;
  if (d <= 6) return 12;
  return 8;
}

InfoMatrix info_target(const TargetDistribution& target, const ModelSpec& spec, const QuadratureRule& rule) {
  check_rule(target, rule, spec);
  if (spec.link() == Link::Identity) return {factorised_moment_matrix(spec, rule), InfoSource::TargetQuadrature};
  const Link link = spec.link();
  return {tensor_integral(spec, rule, [link](double eta) { return glm_weight(link, eta); }),
          InfoSource::TargetQuadrature};
}

Matrix ei_matrix(const ModelSpec& spec, const TargetDistribution& imse_target, const QuadratureRule& rule) {
  check_rule(imse_target, rule, spec);
  if (spec.link() == Link::Identity) return factorised_moment_matrix(spec, rule);
  const Link link = spec.link();
  return tensor_integral(spec, rule, [link](double eta) {
    const double dm = mean_derivative(link, eta);
    return dm * dm;
  });
}

}  // namespace pilot
