#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>

#include "pilot/bound.hpp"
#include "pilot/design_gen.hpp"
#include "pilot/discrepancy.hpp"
#include "pilot/glm_info.hpp"
#include "pilot/io.hpp"
#include "pilot/opt_solver.hpp"
#include "pilot/study.hpp"

using nlohmann::json;
using namespace pilot;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitFailure = 1;

struct ModelOptions {
  std::string design, model, criterion = "A", grid = "default", imse_target = "uniform";
  double tol = 1e-7;
  long max_iter = 100000;
  int level = 0;
  std::uint64_t candidate_seed = 0;
  bool dump_info = false;
};

PointMatrix parse_candidates(const std::string& spec, int d, std::uint64_t seed) {
  auto number = [&](const std::string& s) {
    std::size_t pos = 0;
    long v = 0;
    try {
      v = std::stol(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || v < 1) throw InvalidInput("bad candidate specification '" + spec + "'");
    return v;
  };
  if (spec == "default") return default_candidates(d, seed);
  if (spec.rfind("grid:", 0) == 0) return candidate_grid(d, static_cast<int>(number(spec.substr(5))));
  if (spec.rfind("cloud:", 0) == 0) return candidate_cloud(d, number(spec.substr(6)), seed);
  return candidate_grid(d, static_cast<int>(number(spec)));
}

int quad_level(int requested, int d) { return requested > 0 ? requested : default_quadrature_level(d); }

CriterionMatrix parse_criterion(const ModelOptions& o, const ModelSpec& spec, const PointMatrix& candidates,
                                const SolveOptions& solve) {
  const int l = spec.num_terms();
  const std::string& c = o.criterion;
  if (c == "A") return CriterionMatrix::a_optimal(l);
  if (c == "SA") return standardized_a_matrix(candidates, spec, solve);
  if (c == "EI") {
    const TargetDistribution t{parse_target(o.imse_target), spec.dim()};
    return {ei_matrix(spec, t, quadrature(t, quad_level(o.level, spec.dim()))), CriterionKind::EI};
  }
  if (c.rfind("c:", 0) == 0) {
    int j = -1;
    try {
      j = std::stoi(c.substr(2));
    } catch (const std::exception&) {
      throw InvalidInput("bad c-criterion '" + c + "'");
    }
    return CriterionMatrix::c_optimal(l, j);
  }
  throw InvalidInput("unknown criterion '" + c + "' (expected A, c:<j>, SA or EI)");
}

json solve_json(const SolveResult& r, const CriterionMatrix& L) {
  json support = json::array();
  for (int i : r.weights.support(0.0)) {
    const auto row = r.weights.candidates.row(i);
    support.push_back({{"x", std::vector<double>(row.begin(), row.end())}, {"weight", r.weights.weights[i]}});
  }
  return {{"criterion", to_string(L.kind)},
          {"criterion_value", r.criterion_value},
          {"equivalence_gap", r.equivalence_gap},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"support", support}};
}

void add_model_options(CLI::App* cmd, ModelOptions& o, bool with_design) {
  if (with_design) cmd->add_option("--design", o.design, "design CSV")->required();
  cmd->add_option("--model", o.model, "model JSON")->required();
  cmd->add_option("--criterion", o.criterion, "A, c:<j>, SA or EI");
  cmd->add_option("--grid", o.grid, "candidates: default, <k>, grid:<k> or cloud:<N>");
  cmd->add_option("--tol", o.tol, "relative equivalence-gap tolerance");
  cmd->add_option("--max-iter", o.max_iter, "iteration cap");
  cmd->add_option("--level", o.level, "quadrature points per coordinate");
  cmd->add_option("--imse-target", o.imse_target, "IMSE measure for EI: uniform or arcsine");
  cmd->add_option("--candidate-seed", o.candidate_seed, "seed of a Sobol candidate cloud");
  cmd->add_flag("--dump-info", o.dump_info, "include information matrices in the output");
}

SolveOptions solve_options(const ModelOptions& o) {
  SolveOptions s;
  s.tol = o.tol;
  s.max_iter = o.max_iter;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-filling pilot designs, kernel discrepancy and GLM design efficiency"};
  app.require_subcommand(1);

  // generate
  GeneratorSpec gen;
  std::string gen_family = "scrambled-sobol", gen_target = "uniform", gen_out;
  auto* generate_cmd = app.add_subcommand("generate", "generate a design of one family");
  generate_cmd->add_option("--family", gen_family, "scrambled-sobol, random-lhd, maximin-lhd, mincorr-lhd, maxpro-lhd, random")
      ->required();
  generate_cmd->add_option("--n", gen.n, "number of points")->required();
  generate_cmd->add_option("--d", gen.d, "dimension")->required();
  generate_cmd->add_option("--target", gen_target, "uniform or arcsine");
  generate_cmd->add_option("--seed", gen.seed, "seed");
  generate_cmd->add_option("--budget", gen.optimizer_budget, "proposed moves for optimized families");
  generate_cmd->add_option("--out", gen_out, "output CSV (stdout when omitted)");

  // discrepancy
  std::string disc_design, disc_target = "uniform";
  bool disc_mc = false;
  std::int64_t disc_samples = 1000000;
  std::uint64_t disc_seed = 1;
  int disc_threads = 1;
  auto* disc_cmd = app.add_subcommand("discrepancy", "kernel discrepancy of a design");
  disc_cmd->add_option("--design", disc_design, "design CSV")->required();
  disc_cmd->add_option("--target", disc_target, "uniform or arcsine");
  disc_cmd->add_flag("--mc", disc_mc, "Monte-Carlo estimate instead of the closed form");
  disc_cmd->add_option("--samples", disc_samples, "Monte-Carlo samples");
  disc_cmd->add_option("--seed", disc_seed, "Monte-Carlo seed");
  disc_cmd->add_option("--threads", disc_threads, "worker threads");

  // solve, efficiency, bound-check
  ModelOptions solve_o, eff_o, bound_o;
  auto* solve_cmd = app.add_subcommand("solve", "locally optimal continuous design");
  add_model_options(solve_cmd, solve_o, false);
  auto* eff_cmd = app.add_subcommand("efficiency", "efficiency of a design against the solved optimum");
  add_model_options(eff_cmd, eff_o, true);
  std::string bound_target = "uniform";
  auto* bound_cmd = app.add_subcommand("bound-check", "spectral-radius efficiency chain for a design");
  add_model_options(bound_cmd, bound_o, true);
  bound_cmd->add_option("--target", bound_target, "uniform or arcsine");

  // experiment
  std::string exp_example, exp_out, exp_config;
  bool exp_full = false;
  int exp_seeds = 0, exp_threads = 1;
  long exp_grid = 0, exp_bound_checks = 50;
  std::uint64_t exp_master = 0;
  auto* exp_cmd = app.add_subcommand("experiment", "run an example study and write CSV/JSON results");
  exp_cmd->add_option("--example", exp_example, "ex1, ex2 or ex3");
  exp_cmd->add_option("--config", exp_config, "JSON config mirroring these flags");
  exp_cmd->add_flag("--full-scale", exp_full, "full-scale settings");
  exp_cmd->add_option("--seeds", exp_seeds, "design replications");
  exp_cmd->add_option("--coeff-grid", exp_grid, "grid points per coefficient (ex1) or Sobol count (ex2)");
  exp_cmd->add_option("--out", exp_out, "output directory")->required();
  exp_cmd->add_option("--threads", exp_threads, "worker threads (PILOT_DESIGN_THREADS overrides)");
  exp_cmd->add_option("--master-seed", exp_master, "master seed");
  exp_cmd->add_option("--bound-checks", exp_bound_checks, "bound checks per model group; negative checks all");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate_cmd->parsed()) {
      gen.family = parse_family(gen_family);
      const Design design = generate(gen, {parse_target(gen_target), gen.d});
      if (gen_out.empty()) {
        write_design_csv(std::cout, design);
      } else {
        write_design_csv_file(gen_out, design);
      }
    } else if (disc_cmd->parsed()) {
      const Design design = read_design_csv_file(disc_design);
      const TargetDistribution target{parse_target(disc_target), design.dim()};
      const auto r = disc_mc ? discrepancy_mc(design, target, disc_samples, disc_seed, disc_threads)
                             : discrepancy_closed(design, target);
      json j{{"target", to_string(target.kind)},
             {"method", disc_mc ? "monte-carlo" : "closed-form"},
             {"d_squared", r.d_squared},
             {"d", r.d},
             {"raw_d_squared", r.raw_d_squared},
             {"clamped", r.clamped}};
      if (r.mc_std_error) {
        j["mc_std_error"] = *r.mc_std_error;
        j["samples"] = disc_samples;
        j["seed"] = disc_seed;
      }
      std::cout << j.dump(2) << '\n';
    } else if (solve_cmd->parsed()) {
      const ModelSpec spec = read_model_json_file(solve_o.model);
      const PointMatrix candidates = parse_candidates(solve_o.grid, spec.dim(), solve_o.candidate_seed);
      const auto opts = solve_options(solve_o);
      const CriterionMatrix L = parse_criterion(solve_o, spec, candidates, opts);
      const auto r = solve_l_optimal(candidates, spec, L, opts);
      json j = solve_json(r, L);
      if (solve_o.dump_info) {
        j["criterion_matrix"] = matrix_to_json(L.entries);
        j["information"] = matrix_to_json(info_weighted(candidates, r.weights.weights, spec));
      }
      std::cout << j.dump(2) << '\n';
    } else if (eff_cmd->parsed()) {
      const Design design = read_design_csv_file(eff_o.design);
      const ModelSpec spec = read_model_json_file(eff_o.model);
      const PointMatrix candidates = parse_candidates(eff_o.grid, spec.dim(), eff_o.candidate_seed);
      const auto opts = solve_options(eff_o);
      const CriterionMatrix L = parse_criterion(eff_o, spec, candidates, opts);
      const auto opt = solve_l_optimal(candidates, spec, L, opts);
      const auto e = l_efficiency(design, spec, L, opt);
      json j{{"criterion", to_string(L.kind)},
             {"efficiency", e.value},
             {"singular", e.singular},
             {"design_criterion_value", e.singular ? json(nullptr) : json(e.criterion)},
             {"optimal_criterion_value", opt.criterion_value},
             {"equivalence_gap", opt.equivalence_gap},
             {"converged", opt.converged}};
      if (eff_o.dump_info) j["information"] = matrix_to_json(info_exact(design, spec).entries);
      std::cout << j.dump(2) << '\n';
    } else if (bound_cmd->parsed()) {
      const Design design = read_design_csv_file(bound_o.design);
      const ModelSpec spec = read_model_json_file(bound_o.model);
      const TargetDistribution target{parse_target(bound_target), spec.dim()};
      const PointMatrix candidates = parse_candidates(bound_o.grid, spec.dim(), bound_o.candidate_seed);
      const auto opts = solve_options(bound_o);
      const CriterionMatrix L = parse_criterion(bound_o, spec, candidates, opts);
      const auto opt = solve_l_optimal(candidates, spec, L, opts);
      const QuadratureRule rule(target, quad_level(bound_o.level, spec.dim()));
      const auto b = bound_check(design, spec, target, L, opt, rule);
      json j{{"target", to_string(target.kind)}, {"criterion", to_string(L.kind)}, {"singular", b.singular}};
      if (!b.singular) {
        j.update({{"eff_design", b.eff_design},
                  {"eff_target", b.eff_target},
                  {"spectral_radius_term", b.spectral_radius_term},
                  {"inverse_max_eigenvalue", b.inverse_max_eigenvalue},
                  {"whitened_min_eigenvalue", b.whitened_min_eigenvalue},
                  {"whitened_max_eigenvalue", b.whitened_max_eigenvalue},
                  {"chain_holds", b.chain_holds},
                  {"margin", b.margin},
                  {"identity_applies", b.identity_applies},
                  {"identity_gap", b.identity_gap}});
      }
      if (bound_o.dump_info) {
        j["information_design"] = matrix_to_json(info_exact(design, spec).entries);
        j["information_target"] = matrix_to_json(info_target(target, spec, rule).entries);
      }
      std::cout << j.dump(2) << '\n';
    } else if (exp_cmd->parsed()) {
      json cfg = json::object();
      if (!exp_config.empty()) {
        std::ifstream in(exp_config);
        if (!in) throw std::runtime_error("cannot open config file '" + exp_config + "'");
        try {
          in >> cfg;
        } catch (const json::exception& e) {
          throw InvalidInput("config file is not valid JSON: " + std::string(e.what()));
        }
      }
      if (!exp_example.empty()) cfg["example"] = exp_example;
      if (exp_full) cfg["full_scale"] = true;
      if (exp_seeds > 0) cfg["seeds"] = exp_seeds;
      if (exp_grid > 0) cfg["coeff_grid"] = exp_grid;
      if (exp_cmd->count("--master-seed")) cfg["master_seed"] = exp_master;
      if (exp_cmd->count("--bound-checks") || !cfg.contains("bound_checks")) cfg["bound_checks"] = exp_bound_checks;
      if (exp_cmd->count("--threads") || !cfg.contains("threads")) cfg["threads"] = exp_threads;
      if (!cfg.contains("example")) throw InvalidInput("experiment needs --example or a config with \"example\"");
      StudyConfig config = config_from_json(cfg);
      config.threads = effective_threads(config.threads);
      const auto r = run_and_emit(config, exp_out);
      const auto bounds = bounds_to_json(r);
      long rows = 0;
      for (const auto& s : r.summaries) rows += s.rows;
      json corr = json::object();
      for (const auto& c : r.correlations) corr[c.group] = c.spearman;
      std::cout << json{{"out", exp_out}, {"rows", rows}, {"spearman", corr}, {"bounds", bounds["summary"]}}.dump(2)
                << '\n';
    }
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return 0;
}
