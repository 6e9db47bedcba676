#include "pilot/study.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include "pilot/discrepancy.hpp"
#include "pilot/glm_info.hpp"
#include "pilot/opt_solver.hpp"
#include "pilot/parallel.hpp"
#include "pilot/rng.hpp"
#include "pilot/sobol.hpp"

namespace pilot {

namespace {

// Seed streams derived from the master seed.
constexpr std::uint64_t kDesignStream = 1;
constexpr std::uint64_t kCoefficientStream = 2;
constexpr std::uint64_t kBoundStream = 3;
constexpr std::uint64_t kCandidateStream = 4;

constexpr const char* kFlagSolverFailed = "solver_failed";
constexpr const char* kFlagNotConverged = "solver_not_converged";
constexpr const char* kFlagSingular = "singular_design";

std::string beta_label(const std::string& space_id, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return space_id + "-" + buf;
}

std::string join_flags(const std::vector<const char*>& flags) {
  std::string s;
  for (const char* f : flags) {
    if (!s.empty()) s += ';';
    s += f;
  }
  return s;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Key of a (basis, coefficient vector) pair for the optimum cache.
std::string optimum_key(const std::string& basis_id, const Vector& beta) {
  std::string key = basis_id;
  key += '|';
  for (double b : beta) {
    char raw[sizeof(double)];
    std::memcpy(raw, &b, sizeof b);
    key.append(raw, sizeof raw);
  }
  return key;
}

struct Optimum {
  double value = 0.0;
  bool failed = false;
  bool converged = false;
};

// Per-task record of an efficiency evaluation.
struct Cell {
  double efficiency = 0.0;
  bool singular = false;
};

PointMatrix study_candidates(const StudyConfig& c) {
  if (c.d <= 4 && c.grid_per_axis > 0) return candidate_grid(c.d, c.grid_per_axis);
  if (c.d > 4 && c.cloud_size > 0) return candidate_cloud(c.d, c.cloud_size, derive_seed(c.master_seed, {kCandidateStream}));
  return default_candidates(c.d, derive_seed(c.master_seed, {kCandidateStream}));
}

const std::map<std::string, Family>& base_family_labels() {
  static const std::map<std::string, Family> labels = {{"SSD", Family::ScrambledSobol},
                                                       {"MmLHD", Family::MaximinLhd},
                                                       {"mcLHD", Family::MinCorrLhd},
                                                       {"MPLHD", Family::MaxProLhd},
                                                       {"Random", Family::Random},
                                                       {"LHD", Family::RandomLhd}};
  return labels;
}

StudyFamily parse_study_family(const std::string& label) {
  std::string base = label;
  TargetKind target = TargetKind::Uniform;
  if (base.rfind("Asin", 0) == 0) {
    base = base.substr(4);
    target = TargetKind::Arcsine;
  }
  const auto& labels = base_family_labels();
  const auto it = labels.find(base);
  if (it == labels.end()) throw InvalidInput("unknown study family '" + label + "'");
  return {it->second, target};
}

SamplingMode parse_mode(const std::string& s) {
  if (s == "grid") return SamplingMode::Grid;
  if (s == "sobol") return SamplingMode::Sobol;
  if (s == "fixed") return SamplingMode::Fixed;
  throw InvalidInput("unknown sampling mode '" + s + "'");
}

std::string_view to_string(SamplingMode m) {
  switch (m) {
    case SamplingMode::Grid: return "grid";
    case SamplingMode::Sobol: return "sobol";
    case SamplingMode::Fixed: return "fixed";
  }
  return "?";
}

nlohmann::json space_to_json(const CoefficientSpace& s) {
  nlohmann::json j{{"id", s.id}, {"lo", s.lo}, {"hi", s.hi}, {"mode", to_string(s.mode)}};
  if (s.mode == SamplingMode::Grid) j["k"] = s.grid_per_axis;
  if (s.mode == SamplingMode::Sobol) j["count"] = s.sobol_count;
  if (s.mode == SamplingMode::Fixed) {
    nlohmann::json f = nlohmann::json::array();
    for (const Vector& b : s.fixed) f.push_back(std::vector<double>(b.begin(), b.end()));
    j["fixed"] = f;
  }
  return j;
}

CoefficientSpace space_from_json(const nlohmann::json& j) {
  CoefficientSpace s;
  s.id = j.value("id", std::string("C"));
  s.lo = j.at("lo").get<std::vector<double>>();
  s.hi = j.at("hi").get<std::vector<double>>();
  s.mode = parse_mode(j.value("mode", std::string("grid")));
  s.grid_per_axis = j.value("k", 3);
  s.sobol_count = j.value("count", 256L);
  if (j.contains("fixed")) {
    for (const auto& row : j.at("fixed")) {
      const auto v = row.get<std::vector<double>>();
      s.fixed.emplace_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
  }
  return s;
}

std::string exponent_label(const Monomial& m) {
  std::string s;
  for (int c = 0; c < m.dim(); ++c) {
    if (m.exponents[c] == 0) continue;
    s += "x" + std::to_string(c + 1);
    if (m.exponents[c] > 1) s += "^" + std::to_string(m.exponents[c]);
  }
  return s.empty() ? "1" : s;
}

}  // namespace

void CoefficientSpace::validate() const {
  if (lo.size() != hi.size()) throw InvalidInput("coefficient space bounds differ in length");
  if (lo.empty()) throw InvalidInput("coefficient space needs at least one coefficient");
  for (std::size_t j = 0; j < lo.size(); ++j) {
    if (!(lo[j] <= hi[j]) || !std::isfinite(lo[j]) || !std::isfinite(hi[j])) {
      throw InvalidInput("coefficient interval " + std::to_string(j) + " has lo > hi or is not finite");
    }
  }
  if (mode == SamplingMode::Grid && grid_per_axis < 1) throw InvalidInput("grid needs at least 1 point per axis");
  if (mode == SamplingMode::Sobol && sobol_count < 1) throw InvalidInput("Sobol sample needs at least 1 point");
  if (mode == SamplingMode::Fixed) {
    if (fixed.empty()) throw InvalidInput("fixed coefficient list is empty");
    for (const Vector& b : fixed) {
      if (b.size() != dim()) throw InvalidInput("fixed coefficient vector has the wrong length");
    }
  }
}

std::vector<Vector> sample_coefficients(const CoefficientSpace& space, std::uint64_t seed, long cap) {
  space.validate();
  const int l = space.dim();
  std::vector<Vector> out;
  switch (space.mode) {
    case SamplingMode::Grid: {
      const int k = space.grid_per_axis;
      long total = 1;
      for (int j = 0; j < l; ++j) {
        total *= k;
        if (total > cap) {
          throw InvalidInput("coefficient grid " + std::to_string(k) + "^" + std::to_string(l) + " exceeds the cap of " +
                             std::to_string(cap));
        }
      }
      out.reserve(total);
      for (long t = 0; t < total; ++t) {
        Vector b(l);
        long r = t;
        for (int j = l - 1; j >= 0; --j) {
          const long level = r % k;
          r /= k;
          b[j] = k == 1 ? 0.5 * (space.lo[j] + space.hi[j])
                        : space.lo[j] + (space.hi[j] - space.lo[j]) * static_cast<double>(level) / (k - 1);
        }
        out.push_back(std::move(b));
      }
      break;
    }
    case SamplingMode::Sobol: {
      if (space.sobol_count > cap) throw InvalidInput("Sobol coefficient sample exceeds the cap");
      const PointMatrix u = scrambled_sobol(space.sobol_count, l, seed);
      out.reserve(space.sobol_count);
      for (Eigen::Index t = 0; t < u.rows(); ++t) {
        Vector b(l);
        for (int j = 0; j < l; ++j) b[j] = space.lo[j] + (space.hi[j] - space.lo[j]) * u(t, j);
        out.push_back(std::move(b));
      }
      break;
    }
    case SamplingMode::Fixed:
      if (static_cast<long>(space.fixed.size()) > cap) throw InvalidInput("fixed coefficient list exceeds the cap");
      out = space.fixed;
      break;
  }
  return out;
}

std::vector<CoefficientSpace> example1_spaces(int grid_per_axis) {
  auto make = [&](std::string id, std::vector<double> lo, std::vector<double> hi) {
    CoefficientSpace s;
    s.id = std::move(id);
    s.lo = std::move(lo);
    s.hi = std::move(hi);
    s.mode = SamplingMode::Grid;
    s.grid_per_axis = grid_per_axis;
    return s;
  };
  return {make("B1", {-3, -2, -3, 0, -2.5}, {3, 4, 3, 6, 3.5}),
          make("B2", {-1, 0, -1, 2, -0.5}, {1, 2, 1, 4, 1.5}),
          make("B3", {-3, 4, 5, -6, -2.5}, {3, 10, 11, 0, 3.5})};
}

CoefficientSpace example2_space(int l, long sobol_count) {
  CoefficientSpace s;
  s.id = "S" + std::to_string(l);
  s.lo.assign(l, -1.2);
  s.hi.assign(l, 1.2);
  s.mode = SamplingMode::Sobol;
  s.sobol_count = sobol_count;
  return s;
}

std::string basis_label(const std::vector<Monomial>& terms, int d) {
  const auto main = intercept_and_main_effects(d);
  const bool extends_main =
      terms.size() >= main.size() && std::equal(main.begin(), main.end(), terms.begin());
  std::string s = extends_main ? "main" : "";
  for (std::size_t t = extends_main ? main.size() : 0; t < terms.size(); ++t) {
    if (!s.empty()) s += '+';
    s += exponent_label(terms[t]);
  }
  return s;
}

std::vector<NamedBasis> example2_bases() {
  auto lp1 = intercept_and_main_effects(6);
  auto lp2 = lp1;
  lp2.push_back(interaction(6, 0, 1));
  lp2.push_back(interaction(6, 1, 2));
  lp2.push_back(interaction(6, 3, 5));
  return {{"lp1", lp1}, {"lp2", lp2}};
}

std::vector<NamedBasis> example3_bases() {
  constexpr int d = 7;
  constexpr std::size_t kTwoInteractionBases = 145;
  const auto main = intercept_and_main_effects(d);
  std::vector<NamedBasis> out;
  auto add = [&](std::vector<Monomial> extra) {
    auto terms = main;
    terms.insert(terms.end(), extra.begin(), extra.end());
    out.push_back({basis_label(terms, d), std::move(terms)});
  };

  add({});
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) add({interaction(d, i, j)});
  }

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) pairs.emplace_back(i, j);
  }
  std::vector<std::pair<std::size_t, std::size_t>> disjoint, shared;
  for (std::size_t a = 0; a < pairs.size(); ++a) {
    for (std::size_t b = a + 1; b < pairs.size(); ++b) {
      const auto [i, j] = pairs[a];
      const auto [k, s] = pairs[b];
      const bool overlap = i == k || i == s || j == k || j == s;
      (overlap ? shared : disjoint).emplace_back(a, b);
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> chosen = disjoint;
  chosen.insert(chosen.end(), shared.begin(), shared.end());
  chosen.resize(kTwoInteractionBases);
  for (const auto& [a, b] : chosen) {
    add({interaction(d, pairs[a].first, pairs[a].second), interaction(d, pairs[b].first, pairs[b].second)});
  }
  return out;
}

std::string StudyFamily::label() const {
  for (const auto& [name, fam] : base_family_labels()) {
    if (fam == base) return (target == TargetKind::Arcsine ? "Asin" : "") + name;
  }
  return "?";
}

std::vector<StudyFamily> ten_families() {
  const Family bases[] = {Family::ScrambledSobol, Family::MaximinLhd, Family::MinCorrLhd, Family::MaxProLhd,
                          Family::Random};
  std::vector<StudyFamily> out;
  for (TargetKind t : {TargetKind::Uniform, TargetKind::Arcsine}) {
    for (Family f : bases) out.push_back({f, t});
  }
  return out;
}

void StudyConfig::validate() const {
  if (n < 2) throw InvalidInput("study needs n >= 2");
  if (d < 1) throw InvalidInput("study needs d >= 1");
  if (seeds < 1) throw InvalidInput("study needs at least one seed");
  if (families.empty()) throw InvalidInput("study needs at least one family");
  if (groups.empty()) throw InvalidInput("study needs at least one model group");
  if (!(solver_tol > 0.0)) throw InvalidInput("solver tolerance must be positive");
  for (const auto& f : families) {
    GeneratorSpec{f.base, n, d, 0, optimizer_budget}.validate();
  }
  for (const auto& g : groups) {
    g.space.validate();
    if (g.space.dim() != static_cast<int>(g.basis.terms.size())) {
      throw InvalidInput("coefficient space of group '" + g.basis.id + "' does not match its basis size");
    }
    for (const auto& m : g.basis.terms) {
      if (m.dim() != d) throw InvalidInput("basis '" + g.basis.id + "' does not match the study dimension");
    }
  }
}

StudyConfig example_config(const std::string& example, bool full_scale, int seeds, long coeff_grid) {
  StudyConfig c;
  c.example = example;
  c.full_scale = full_scale;
  c.families = ten_families();
  c.seeds = seeds > 0 ? seeds : (full_scale ? 100 : 20);
  if (example == "ex1") {
    c.n = 16;
    c.d = 4;
    c.link = Link::Logit;
    c.coeff_grid = coeff_grid > 0 ? coeff_grid : (full_scale ? 7 : 3);
    for (auto& space : example1_spaces(static_cast<int>(c.coeff_grid))) {
      c.groups.push_back({{"main", intercept_and_main_effects(4)}, space, space.id});
    }
  } else if (example == "ex2") {
    c.n = 32;
    c.d = 6;
    c.link = Link::Probit;
    c.coeff_grid = coeff_grid > 0 ? coeff_grid : (full_scale ? 1024 : 256);
    for (auto& basis : example2_bases()) {
      auto space = example2_space(static_cast<int>(basis.terms.size()), c.coeff_grid);
      space.id = basis.id;
      c.groups.push_back({basis, space, basis.id});
    }
  } else if (example == "ex3") {
    c.n = 128;
    c.d = 7;
    c.link = Link::Identity;
    for (auto& basis : example3_bases()) {
      CoefficientSpace space;
      space.id = "fixed";
      const auto l = basis.terms.size();
      space.lo.assign(l, 0.0);
      space.hi.assign(l, 0.0);
      space.mode = SamplingMode::Fixed;
      space.fixed = {Vector::Zero(static_cast<Eigen::Index>(l))};
      c.groups.push_back({basis, space, "all"});
    }
  } else {
    throw InvalidInput("unknown example '" + example + "' (expected ex1, ex2 or ex3)");
  }
  return c;
}

StudyConfig config_from_json(const nlohmann::json& j) {
  const std::string example = j.value("example", std::string("custom"));
  StudyConfig c;
  if (example == "custom") {
    c.example = "custom";
    c.n = j.at("n").get<int>();
    c.d = j.at("d").get<int>();
    c.link = parse_link(j.at("link").get<std::string>());
    c.seeds = j.value("seeds", 20);
    if (j.contains("families")) {
      for (const auto& f : j.at("families")) c.families.push_back(parse_study_family(f.get<std::string>()));
    } else {
      c.families = ten_families();
    }
    const CoefficientSpace space = space_from_json(j.at("space"));
    for (const auto& b : j.at("bases")) {
      NamedBasis basis;
      for (const auto& t : b.at("terms")) basis.terms.push_back({t.get<std::vector<int>>()});
      basis.id = b.value("id", basis_label(basis.terms, c.d));
      c.groups.push_back({basis, space, b.value("group", space.id)});
    }
  } else {
    c = example_config(example, j.value("full_scale", false), j.value("seeds", 0), j.value("coeff_grid", 0L));
  }
  c.master_seed = j.value("master_seed", c.master_seed);
  c.optimizer_budget = j.value("optimizer_budget", c.optimizer_budget);
  c.solver_tol = j.value("solver_tol", c.solver_tol);
  c.grid_per_axis = j.value("grid_per_axis", c.grid_per_axis);
  c.cloud_size = j.value("cloud_size", c.cloud_size);
  c.bound_checks = j.value("bound_checks", c.bound_checks);
  c.quadrature_level = j.value("quadrature_level", c.quadrature_level);
  c.threads = j.value("threads", c.threads);
  return c;
}

nlohmann::json config_to_json(const StudyConfig& c) {
  nlohmann::json j{{"example", c.example},
                   {"full_scale", c.full_scale},
                   {"n", c.n},
                   {"d", c.d},
                   {"link", to_string(c.link)},
                   {"seeds", c.seeds},
                   {"master_seed", c.master_seed},
                   {"optimizer_budget", c.optimizer_budget},
                   {"solver_tol", c.solver_tol},
                   {"grid_per_axis", c.grid_per_axis},
                   {"cloud_size", c.cloud_size},
                   {"bound_checks", c.bound_checks},
                   {"quadrature_level", c.quadrature_level},
                   {"threads", c.threads}};
  if (c.coeff_grid > 0) j["coeff_grid"] = c.coeff_grid;
  nlohmann::json fams = nlohmann::json::array();
  for (const auto& f : c.families) fams.push_back(f.label());
  j["families"] = fams;
  if (c.example == "custom") {
    j["space"] = space_to_json(c.groups.front().space);
    nlohmann::json bases = nlohmann::json::array();
    for (const auto& g : c.groups) {
      nlohmann::json terms = nlohmann::json::array();
      for (const auto& m : g.basis.terms) terms.push_back(m.exponents);
      bases.push_back({{"id", g.basis.id}, {"terms", terms}, {"group", g.summary_group}});
    }
    j["bases"] = bases;
  } else {
    j["groups"] = c.groups.size();
  }
  return j;
}

int effective_threads(int requested) {
  if (const char* env = std::getenv("PILOT_DESIGN_THREADS")) {
    int v = 0;
    const char* end = env + std::strlen(env);
    const auto [ptr, ec] = std::from_chars(env, end, v);
    if (ec == std::errc() && ptr == end && v > 0) return v;
  }
  return std::max(1, requested);
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InvalidInput("spearman inputs differ in length");
  if (a.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

namespace {

// Everything the summary needs, accumulated while rows stream out.
struct Accumulator {
  // [summary group][family] -> seed-averaged efficiency per coefficient vector
  std::map<std::string, std::vector<std::vector<double>>> mean_eff;
  std::map<std::string, std::vector<long>> rows;
  std::vector<std::string> group_order;
};

FamilySummary make_summary(const std::string& group, const StudyFamily& fam, long rows, const std::vector<double>& eff,
                           const std::vector<double>& disc) {
  FamilySummary s;
  s.group = group;
  s.family = fam.label();
  s.target = std::string(to_string(fam.target));
  s.rows = rows;
  s.eff_min = quantile(eff, 0.0);
  s.eff_q1 = quantile(eff, 0.25);
  s.eff_median = quantile(eff, 0.5);
  s.eff_q3 = quantile(eff, 0.75);
  s.eff_max = quantile(eff, 1.0);
  s.eff_worst = s.eff_min;
  s.disc_min = quantile(disc, 0.0);
  s.disc_q1 = quantile(disc, 0.25);
  s.disc_median = quantile(disc, 0.5);
  s.disc_q3 = quantile(disc, 0.75);
  s.disc_max = quantile(disc, 1.0);
  return s;
}

}  // namespace

StudyResult run_study(const StudyConfig& config, const RowSink& sink) {
  config.validate();
  StudyResult result;
  result.config = config;
  const int threads = std::max(1, config.threads);
  const int R = config.seeds;
  const auto& fams = config.families;
  const std::size_t F = fams.size();

  // Designs: one unit-cube construction per (base family, replicate), mapped
  // onto every target that uses it.
  std::vector<Design> designs;
  std::vector<std::uint64_t> design_seed(F * R);
  std::vector<double> disc(F * R);
  {
    std::vector<std::optional<Design>> slots(F * R);
    parallel_for(F * R, threads, [&](std::size_t t) {
      const std::size_t f = t / R;
      const auto r = static_cast<std::uint64_t>(t % R);
      const std::uint64_t seed = derive_seed(config.master_seed, {kDesignStream, static_cast<std::uint64_t>(fams[f].base), r});
      const GeneratorSpec spec{fams[f].base, config.n, config.d, seed, config.optimizer_budget};
      const TargetDistribution target{fams[f].target, config.d};
      slots[t] = generate(spec, target);
      design_seed[t] = seed;
      disc[t] = discrepancy_closed(*slots[t], target).d;
    });
    designs.reserve(F * R);
    for (auto& s : slots) designs.push_back(std::move(*s));
  }

  // Coefficient samples and unique optima.
  const std::size_t G = config.groups.size();
  std::vector<std::vector<Vector>> betas(G);
  std::vector<std::vector<std::size_t>> opt_index(G);
  std::vector<std::pair<std::size_t, std::size_t>> jobs;  // (group, beta)
  {
    std::map<std::string, std::size_t> seen;
    for (std::size_t g = 0; g < G; ++g) {
      betas[g] = sample_coefficients(config.groups[g].space, derive_seed(config.master_seed, {kCoefficientStream, g}));
      for (std::size_t b = 0; b < betas[g].size(); ++b) {
        const auto [it, inserted] = seen.emplace(optimum_key(config.groups[g].basis.id, betas[g][b]), jobs.size());
        if (inserted) jobs.emplace_back(g, b);
        opt_index[g].push_back(it->second);
      }
    }
  }
  const PointMatrix candidates = study_candidates(config);
  std::vector<Optimum> optima(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t k) {
    const auto [g, b] = jobs[k];
    const ModelSpec spec(config.link, config.groups[g].basis.terms, betas[g][b]);
    SolveOptions opts;
    opts.tol = config.solver_tol;
    try {
      const auto r = solve_l_optimal(candidates, spec, CriterionMatrix::a_optimal(spec.num_terms()), opts);
      optima[k] = {r.criterion_value, false, r.converged};
    } catch (const std::exception&) {
      optima[k] = {0.0, true, false};
    }
  });

  // Rows, one (group, family) block at a time.
  Accumulator acc;
  for (std::size_t g = 0; g < G; ++g) {
    const auto& group = config.groups[g];
    const std::size_t B = betas[g].size();
    auto& means = acc.mean_eff[group.summary_group];
    auto& counts = acc.rows[group.summary_group];
    if (means.empty()) {
      means.resize(F);
      counts.assign(F, 0);
      acc.group_order.push_back(group.summary_group);
    }
    std::vector<std::string> beta_ids(B);
    for (std::size_t b = 0; b < B; ++b) beta_ids[b] = beta_label(group.space.id, b);

    for (std::size_t f = 0; f < F; ++f) {
      std::vector<StudyRow> block(R * B);
      parallel_for(R, threads, [&](std::size_t r) {
        const Design& design = designs[f * R + r];
        for (std::size_t b = 0; b < B; ++b) {
          StudyRow& row = block[r * B + b];
          row.family = fams[f].label();
          row.seed = design_seed[f * R + r];
          row.beta_id = beta_ids[b];
          row.basis_id = group.basis.id;
          row.discrepancy = disc[f * R + r];
          const Optimum& opt = optima[opt_index[g][b]];
          std::vector<const char*> flags;
          if (opt.failed) {
            flags.push_back(kFlagSolverFailed);
            row.a_efficiency = std::numeric_limits<double>::quiet_NaN();
          } else {
            if (!opt.converged) flags.push_back(kFlagNotConverged);
            const ModelSpec spec(config.link, group.basis.terms, betas[g][b]);
            const auto e = efficiency_from_info(info_exact(design, spec).entries,
                                                CriterionMatrix::a_optimal(spec.num_terms()), opt.value);
            if (e.singular) flags.push_back(kFlagSingular);
            row.a_efficiency = e.value;
          }
          row.flags = join_flags(flags);
        }
      });
      // Seed averages per coefficient vector, skipping failed solves.
      for (std::size_t b = 0; b < B; ++b) {
        if (optima[opt_index[g][b]].failed) continue;
        double s = 0.0;
        for (int r = 0; r < R; ++r) s += block[r * B + b].a_efficiency;
        means[f].push_back(s / R);
      }
      counts[f] += static_cast<long>(block.size());
      if (sink) {
        sink(block);
      } else {
        result.rows.insert(result.rows.end(), std::make_move_iterator(block.begin()),
                           std::make_move_iterator(block.end()));
      }
    }
  }

  for (const auto& key : acc.group_order) {
    std::vector<double> med_disc, worst;
    for (std::size_t f = 0; f < F; ++f) {
      const std::vector<double> d(disc.begin() + f * R, disc.begin() + (f + 1) * R);
      result.summaries.push_back(make_summary(key, fams[f], acc.rows[key][f], acc.mean_eff[key][f], d));
      med_disc.push_back(result.summaries.back().disc_median);
      worst.push_back(result.summaries.back().eff_worst);
    }
    result.correlations.push_back({key, spearman(med_disc, worst)});
  }

  // Bound checks on a seeded sample of (family, replicate, coefficient) cases.
  struct CaseRef {
    std::size_t g, f, r, b;
  };
  std::vector<CaseRef> cases;
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t B = betas[g].size();
    const std::size_t total = F * R * B;
    if (config.bound_checks < 0 || static_cast<std::size_t>(config.bound_checks) >= total) {
      for (std::size_t t = 0; t < total; ++t) cases.push_back({g, t / (R * B), (t / B) % R, t % B});
    } else {
      Engine eng(derive_seed(config.master_seed, {kBoundStream, g}));
      for (long k = 0; k < config.bound_checks; ++k) {
        const std::size_t t = uniform_index(eng, total);
        cases.push_back({g, t / (R * B), (t / B) % R, t % B});
      }
    }
  }
  const int level = config.quadrature_level > 0 ? config.quadrature_level : default_quadrature_level(config.d);
  // Target information depends only on the model and the target.
  std::map<std::tuple<std::size_t, std::size_t, TargetKind>, std::size_t> target_index;
  std::vector<std::tuple<std::size_t, std::size_t, TargetKind>> target_keys;
  for (const auto& c : cases) {
    const auto key = std::make_tuple(c.g, c.b, fams[c.f].target);
    if (target_index.emplace(key, target_keys.size()).second) target_keys.push_back(key);
  }
  std::vector<Matrix> target_info(target_keys.size());
  parallel_for(target_keys.size(), threads, [&](std::size_t k) {
    const auto [g, b, kind] = target_keys[k];
    if (optima[opt_index[g][b]].failed) return;
    const TargetDistribution target{kind, config.d};
    const ModelSpec spec(config.link, config.groups[g].basis.terms, betas[g][b]);
    target_info[k] = info_target(target, spec, QuadratureRule(target, level)).entries;
  });

  std::vector<std::optional<BoundCase>> bound_slots(cases.size());
  parallel_for(cases.size(), threads, [&](std::size_t k) {
    const auto [g, f, r, b] = cases[k];
    const Optimum& opt = optima[opt_index[g][b]];
    if (opt.failed) return;
    const auto& group = config.groups[g];
    const ModelSpec spec(config.link, group.basis.terms, betas[g][b]);
    BoundCase bc;
    bc.family = fams[f].label();
    bc.seed = design_seed[f * R + r];
    bc.beta_id = beta_label(group.space.id, b);
    bc.basis_id = group.basis.id;
    bc.check = bound_check(info_exact(designs[f * R + r], spec).entries, target_info[target_index.at({g, b, fams[f].target})],
                           Matrix::Identity(spec.num_terms(), spec.num_terms()), opt.value);
    bound_slots[k] = std::move(bc);
  });
  for (auto& s : bound_slots) {
    if (s) result.bounds.push_back(std::move(*s));
  }
  return result;
}

std::vector<FamilySummary> summarize(const StudyResult& result) { return result.summaries; }

void write_row_header(std::ostream& out) { out << "family,seed,beta_id,basis_id,discrepancy,a_efficiency,flags\n"; }

void write_row(std::ostream& out, const StudyRow& row) {
  out << row.family << ',' << row.seed << ',' << row.beta_id << ',' << row.basis_id << ','
      << format_double(row.discrepancy) << ',' << format_double(row.a_efficiency) << ',' << row.flags << '\n';
}

void write_rows(std::ostream& out, const std::vector<StudyRow>& rows, ReportFormat format) {
  if (format == ReportFormat::Csv) {
    write_row_header(out);
    for (const auto& r : rows) write_row(out, r);
    return;
  }
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"family", r.family},
                 {"seed", r.seed},
                 {"beta_id", r.beta_id},
                 {"basis_id", r.basis_id},
                 {"discrepancy", r.discrepancy},
                 {"a_efficiency", r.a_efficiency},
                 {"flags", r.flags}});
  }
  out << j.dump(2) << '\n';
}

void write_summary(std::ostream& out, const StudyResult& result, ReportFormat format) {
  if (format == ReportFormat::Csv) {
    out << "group,family,target,rows,eff_min,eff_q1,eff_median,eff_q3,eff_max,eff_worst,"
           "disc_min,disc_q1,disc_median,disc_q3,disc_max\n";
    for (const auto& s : result.summaries) {
      out << s.group << ',' << s.family << ',' << s.target << ',' << s.rows;
      for (double v : {s.eff_min, s.eff_q1, s.eff_median, s.eff_q3, s.eff_max, s.eff_worst, s.disc_min, s.disc_q1,
                       s.disc_median, s.disc_q3, s.disc_max}) {
        out << ',' << format_double(v);
      }
      out << '\n';
    }
    return;
  }
  nlohmann::json fams = nlohmann::json::array();
  for (const auto& s : result.summaries) {
    fams.push_back({{"group", s.group},
                    {"family", s.family},
                    {"target", s.target},
                    {"rows", s.rows},
                    {"efficiency",
                     {{"min", s.eff_min}, {"q1", s.eff_q1}, {"median", s.eff_median}, {"q3", s.eff_q3}, {"max", s.eff_max}}},
                    {"worst_case_efficiency", s.eff_worst},
                    {"discrepancy",
                     {{"min", s.disc_min},
                      {"q1", s.disc_q1},
                      {"median", s.disc_median},
                      {"q3", s.disc_q3},
                      {"max", s.disc_max}}}});
  }
  nlohmann::json corr = nlohmann::json::array();
  for (const auto& c : result.correlations) {
    corr.push_back({{"group", c.group}, {"spearman_discrepancy_vs_worst_efficiency", c.spearman}});
  }
  out << nlohmann::json{{"families", fams}, {"correlations", corr}}.dump(2) << '\n';
}

nlohmann::json bounds_to_json(const StudyResult& result) {
  long singular = 0, violations = 0, identity_cases = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  double max_identity_gap = 0.0;
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& bc : result.bounds) {
    const auto& c = bc.check;
    nlohmann::json j{{"family", bc.family}, {"seed", bc.seed}, {"beta_id", bc.beta_id}, {"basis_id", bc.basis_id},
                     {"singular", c.singular}};
    if (c.singular) {
      ++singular;
    } else {
      if (!c.chain_holds) ++violations;
      min_margin = std::min(min_margin, c.margin);
      if (c.identity_applies) {
        ++identity_cases;
        max_identity_gap = std::max(max_identity_gap, c.identity_gap);
      }
      j.update({{"eff_design", c.eff_design},
                {"eff_target", c.eff_target},
                {"spectral_radius_term", c.spectral_radius_term},
                {"inverse_max_eigenvalue", c.inverse_max_eigenvalue},
                {"whitened_min_eigenvalue", c.whitened_min_eigenvalue},
                {"whitened_max_eigenvalue", c.whitened_max_eigenvalue},
                {"chain_holds", c.chain_holds},
                {"margin", c.margin},
                {"identity_applies", c.identity_applies},
                {"identity_gap", c.identity_gap}});
    }
    cases.push_back(std::move(j));
  }
  nlohmann::json summary{{"checked", result.bounds.size()},
                         {"singular_skipped", singular},
                         {"chain_violations", violations},
                         {"identity_cases", identity_cases},
                         {"max_identity_gap", max_identity_gap}};
  summary["min_margin"] = std::isfinite(min_margin) ? nlohmann::json(min_margin) : nlohmann::json(nullptr);
  return {{"summary", summary}, {"cases", cases}};
}

nlohmann::json manifest_json(const StudyResult& result) {
  long rows = 0;
  for (const auto& s : result.summaries) rows += s.rows;
  return {{"version", kVersion},
          {"master_seed", result.config.master_seed},
          {"config", config_to_json(result.config)},
          {"rows", rows},
          {"files", {"rows.csv", "summary.csv", "summary.json", "bounds.json", "manifest.json"}}};
}

}  // namespace pilot
