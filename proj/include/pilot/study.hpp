#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pilot/bound.hpp"
#include "pilot/core_model.hpp"
#include "pilot/design_gen.hpp"

namespace pilot {

inline constexpr const char* kVersion = "0.1.0";

enum class SamplingMode { Grid, Sobol, Fixed };

/// Box of coefficient intervals plus how to sample it.
struct CoefficientSpace {
  std::string id;
  std::vector<double> lo, hi;
  SamplingMode mode = SamplingMode::Grid;
  int grid_per_axis = 3;
  long sobol_count = 256;
  std::vector<Vector> fixed;

  int dim() const { return static_cast<int>(lo.size()); }
  void validate() const;
};

inline constexpr long kDefaultCoefficientCap = 1L << 20;

/// Grid: tensor grid including the endpoints, first coefficient varying
/// slowest.  Sobol: scrambled Sobol points mapped affinely into the box.
std::vector<Vector> sample_coefficients(const CoefficientSpace& space, std::uint64_t seed,
                                        long cap = kDefaultCoefficientCap);

// Coefficient spaces and bases of the three worked examples.
std::vector<CoefficientSpace> example1_spaces(int grid_per_axis);
CoefficientSpace example2_space(int l, long sobol_count);

struct NamedBasis {
  std::string id;
  std::vector<Monomial> terms;
};

/// Readable id such as "main+x1x2" for a basis that extends the main effects.
std::string basis_label(const std::vector<Monomial>& terms, int d);

std::vector<NamedBasis> example2_bases();
/// The 174 bases on d = 7: main effects; main effects plus one second-order
/// term x_i x_j (i <= j, 28 bases); main effects plus two distinct
/// interactions (145 bases: the 105 index-disjoint pairs, then pairs sharing
/// one index in lexicographic order).
std::vector<NamedBasis> example3_bases();

/// One of the ten compared designs: a base family mapped to a target.
struct StudyFamily {
  Family base = Family::ScrambledSobol;
  TargetKind target = TargetKind::Uniform;
  std::string label() const;
};

/// The ten families: five constructions for each of the two targets.
std::vector<StudyFamily> ten_families();

/// A basis paired with the coefficient space sampled for it.
struct ModelGroup {
  NamedBasis basis;
  CoefficientSpace space;
  /// Groups sharing this key are pooled in the summaries.
  std::string summary_group;
};

struct StudyConfig {
  std::string example = "custom";
  bool full_scale = false;
  int n = 16;
  int d = 4;
  Link link = Link::Logit;
  std::vector<ModelGroup> groups;
  std::vector<StudyFamily> families;
  int seeds = 20;
  /// Grid points per axis (ex1) or Sobol count (ex2) the groups were built with.
  long coeff_grid = 0;
  std::uint64_t master_seed = 20240601;
  long optimizer_budget = 0;
  double solver_tol = 1e-6;
  /// Candidate points per axis for d <= 4, cloud size beyond.
  int grid_per_axis = 0;
  long cloud_size = 0;
  /// Bound checks per group; negative checks every (design, coefficient) pair.
  long bound_checks = 50;
  int quadrature_level = 0;
  int threads = 1;

  void validate() const;
};

/// Desk or full-scale configuration of example "ex1", "ex2" or "ex3";
/// `seeds` and `coeff_grid` (grid per axis for ex1, Sobol count for ex2)
/// override the scale defaults when positive.
StudyConfig example_config(const std::string& example, bool full_scale, int seeds = 0, long coeff_grid = 0);

/// Configuration from JSON.  Keys mirror the CLI flags; "example" selects a
/// preset that the remaining keys override, "custom" requires n, d, link,
/// bases and space.
StudyConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const StudyConfig& config);

/// Worker count: PILOT_DESIGN_THREADS when set to a positive integer, else `requested`.
int effective_threads(int requested);

struct StudyRow {
  std::string family;
  std::uint64_t seed = 0;
  std::string beta_id;
  std::string basis_id;
  double discrepancy = 0.0;
  double a_efficiency = 0.0;
  std::string flags;
};

struct BoundCase {
  std::string family;
  std::uint64_t seed = 0;
  std::string beta_id;
  std::string basis_id;
  BoundCheck check;
};

struct FamilySummary {
  std::string group;
  std::string family;
  std::string target;
  long rows = 0;
  /// Order statistics of the seed-averaged efficiency per coefficient vector.
  double eff_min = 0, eff_q1 = 0, eff_median = 0, eff_q3 = 0, eff_max = 0;
  /// Worst case over coefficient vectors of the seed-averaged efficiency.
  double eff_worst = 0;
  /// Order statistics of the discrepancy over seeds, against the family's own target.
  double disc_min = 0, disc_q1 = 0, disc_median = 0, disc_q3 = 0, disc_max = 0;
};

struct GroupCorrelation {
  std::string group;
  /// Spearman correlation across families of median discrepancy and worst-case efficiency.
  double spearman = 0.0;
};

struct StudyResult {
  StudyConfig config;
  std::vector<StudyRow> rows;
  std::vector<FamilySummary> summaries;
  std::vector<GroupCorrelation> correlations;
  std::vector<BoundCase> bounds;
};

/// Receives the rows of one (group, family) block at a time, in output order.
using RowSink = std::function<void(const std::vector<StudyRow>&)>;

/// Runs the study.  With a sink the rows are streamed to it and not kept in
/// the result.
StudyResult run_study(const StudyConfig& config, const RowSink& sink = {});

/// Type-7 quantile of unsorted values.
double quantile(std::vector<double> values, double prob);
/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

std::vector<FamilySummary> summarize(const StudyResult& result);

enum class ReportFormat { Csv, Json };

void write_rows(std::ostream& out, const std::vector<StudyRow>& rows, ReportFormat format);
void write_summary(std::ostream& out, const StudyResult& result, ReportFormat format);
nlohmann::json bounds_to_json(const StudyResult& result);
nlohmann::json manifest_json(const StudyResult& result);

/// Writes rows.csv, summary.csv, summary.json, bounds.json and manifest.json
/// into `dir`, creating it if needed.  Throws std::runtime_error when a file
/// cannot be written.
void emit_report(const StudyResult& result, const std::string& dir);

/// Runs the study and writes the same files, streaming rows.csv.
StudyResult run_and_emit(const StudyConfig& config, const std::string& dir);

void write_row_header(std::ostream& out);
void write_row(std::ostream& out, const StudyRow& row);

}  // namespace pilot
