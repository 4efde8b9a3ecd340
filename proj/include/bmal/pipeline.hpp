#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmal/atoms.hpp"
#include "bmal/criteria.hpp"
#include "bmal/fitting.hpp"
#include "bmal/io.hpp"
#include "bmal/measure.hpp"
#include "bmal/random.hpp"
#include "bmal/solvers.hpp"

namespace bmal {

using json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "1";

enum class ModelKind { Linear, Logistic, Cumlink };
ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind kind);

/// Everything a command needs; mirrored one-to-one by CLI flags.
struct RunConfig {
  std::string command;
  std::string input;
  std::string output_dir = ".";
  std::uint64_t seed = 0;
  int threads = 1;

  CsvSchema schema;
  ModelKind model = ModelKind::Linear;
  std::vector<double> beta;  // working coefficients; fitted from the response when empty
  std::vector<double> cuts;  // cumulative link cutpoints
  bool standardize = false;

  double p = 0.0;
  std::string g_rows;  // "first:count" selects parameter rows
  std::string g_file;  // CSV holding G
  Index n = 0;

  // Solver overrides; epsilon is always 1/n.
  double v0 = 1e-3;
  double v = 1e-6;
  double r_step = 0.25;
  int max_boost_iters = 5000;
  int max_outer_iters = 200;
  bool skip_refine = false;
  double time_limit = 0.0;

  std::string candidates;  // efficiency: index file

  // bench / cross-criteria
  std::vector<Index> sizes{10000};
  Index k = 11;
  std::vector<Index> sample_sizes{500, 1000, 3000, 5000};
  std::vector<std::string> algorithms{"hybrid", "exchange", "backward"};
  double reference_v = 1e-8;

  // two-stage / bootstrap-eval
  double r = 0.4;
  int bootstrap = 200;
  std::vector<std::string> methods{"two-stage", "random"};
  double max_failure_rate = 0.05;
  /// "model": responses of each resample are drawn from the model fitted to
  /// the full data; "observed": the resampled rows keep their responses.
  std::string responses = "model";

  SolverConfig solver_config(Index sample_size) const;
  json to_json() const;
};

/// Solver run on one pool; rounding to n and the certificate of the sample.
struct Selection {
  SolveResult solve;
  SampleSet sample;
  EfficiencyBounds efficiency;
  double sample_phi = 0.0;
};

Selection select_sample(const AtomSet& atoms, const CriterionSpec& spec, Index n, const SolverConfig& cfg);

/// Parameters a working model is evaluated at.
struct WorkingModel {
  ModelKind kind = ModelKind::Linear;
  VectorXd beta;
  VectorXd cuts;
  std::vector<double> levels;  // response levels per category (cumulative link)

  AtomSet atoms(const MatrixXd& z) const;
  /// Coefficients compared across bootstrap replicates (beta only for
  /// cumulative link models, whose cutpoint count can vary).
  VectorXd coefficients() const { return beta; }
};

/// Maximum likelihood fit on the rows `rows` of (z, y). Cumulative link fits
/// collapse categories that are absent from those rows.
WorkingModel fit_model(ModelKind kind, const MatrixXd& z, const VectorXd& y, const std::vector<Index>& rows,
                       const FitOptions& opts = {});

struct TwoStageResult {
  std::vector<Index> stage1;  // in draw order
  SampleSet stage2;
  SampleSet combined;
  WorkingModel working;
  std::optional<SolveResult> solve;  // absent when nothing is left for stage 2
};

/// Random pilot of round(r n) points, fit, then criterion-driven choice of
/// the remaining n - round(r n) points with the pilot pinned at weight 1/n.
TwoStageResult two_stage_select(const MatrixXd& z, const VectorXd& y, ModelKind kind, const CriterionSpec& spec,
                                Index n, double r, Rng& rng, const SolverConfig& base);

struct BootstrapSummary {
  std::vector<std::string> methods;
  Index replicates = 0;
  Index failed = 0;
  VectorXd reference;                  // fit on the full data
  std::vector<VectorXd> component_mse;  // per method
  std::vector<double> total_mse;        // per method
  /// squared_errors[b][m] per component; empty vector for failed replicates.
  std::vector<std::vector<VectorXd>> squared_errors;
};

/// Draws responses at the rows of z from a fitted model; `noise_sd` is the
/// residual standard deviation of a linear model.
VectorXd simulate_responses(const WorkingModel& model, const MatrixXd& z, double noise_sd, Rng& rng);

/// Resamples the pool B times, runs each method on the resample, refits on
/// the chosen rows and accumulates ||beta_b - beta_hat||^2. Replicate b uses
/// Rng(seed, b + 1) for the resample and its responses; method m within it
/// uses Rng(seed, (b + 1) * 1024 + m).
BootstrapSummary bootstrap_eval(const MatrixXd& z, const VectorXd& y, const RunConfig& cfg, const CriterionSpec& spec);

struct BenchCell {
  Index pool_size = 0;
  std::string algorithm;
  std::optional<double> efficiency;  // empty when the time budget was exceeded
  std::optional<double> certified_lower_bound;
  double seconds = 0.0;
  Index iterations = 0;
};

/// Intercept + Gaussian pools, one per size, solved by each algorithm and
/// scored against the relaxation solved to reference_v.
std::vector<BenchCell> run_bench(const RunConfig& cfg);

struct CrossRow {
  Index n = 0;
  std::optional<double> d_eff_of_d;
  std::optional<double> a_eff_of_d;
  std::optional<double> d_eff_of_a;
  std::optional<double> a_eff_of_a;
  double seconds = 0.0;
};

/// D- and A-optimal samples for each n and their efficiencies under both criteria.
std::vector<CrossRow> run_cross_criteria(const AtomSet& atoms, const RunConfig& cfg);

/// Runs fn(0..count-1) on up to `threads` workers. Exceptions propagate.
void parallel_for(Index count, int threads, const std::function<void(Index)>& fn);

struct CommandOutcome {
  json report;
  int exit_code = 0;
};

/// Each command writes report.json (and CSV outputs) under cfg.output_dir.
/// Library errors are caught, written to the report and mapped to exit codes.
CommandOutcome cmd_select(const RunConfig& cfg);
CommandOutcome cmd_efficiency(const RunConfig& cfg);
CommandOutcome cmd_bench(const RunConfig& cfg);
CommandOutcome cmd_cross_criteria(const RunConfig& cfg);
CommandOutcome cmd_two_stage(const RunConfig& cfg);
CommandOutcome cmd_bootstrap_eval(const RunConfig& cfg);

CommandOutcome run_command(const RunConfig& cfg);

}  // namespace bmal
