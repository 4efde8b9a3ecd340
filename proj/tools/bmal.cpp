#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bmal/errors.hpp"
#include "bmal/io.hpp"
#include "bmal/pipeline.hpp"

namespace {

std::vector<double> parse_doubles(const std::string& text, const char* flag) {
  std::vector<double> out;
  for (const std::string& piece : bmal::split_list(text)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(piece, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != piece.size()) throw bmal::InvalidArgument(std::string("bad number '") + piece + "' in " + flag);
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch selection of informative points by convex design relaxation"};
  app.set_config("--config", "", "TOML/INI file mirroring the command-line flags (flags win)");
  app.fallthrough();
  app.require_subcommand(1);

  bmal::RunConfig cfg;
  std::string features;
  std::string model = "linear";
  std::string beta;
  std::string cuts;
  std::string delimiter = ",";

  app.add_option("--input", cfg.input, "CSV file with a header row");
  app.add_option("--output-dir", cfg.output_dir, "Directory for report.json and CSV outputs")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads for replicates and benchmark cells")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  app.add_option("--features", features, "Comma-separated feature terms; a:b multiplies columns (default: all)");
  app.add_option("--response", cfg.schema.response, "Response column");
  app.add_flag("--intercept", cfg.schema.add_intercept, "Prepend a column of ones");
  app.add_option("--delimiter", delimiter, "Field separator")->capture_default_str();
  app.add_flag("--standardize", cfg.standardize, "Center and scale non-intercept columns (population sd)");

  app.add_option("--model", model, "linear, logistic or cumlink")->capture_default_str();
  app.add_option("--beta", beta, "Working coefficients, comma-separated (fitted from --response when omitted)");
  app.add_option("--cuts", cuts, "Cumulative link cutpoints, comma-separated");

  app.add_option("--p", cfg.p, "Criterion exponent: 0 = D, 1 = A")->check(CLI::NonNegativeNumber)->capture_default_str();
  app.add_option("--g-rows", cfg.g_rows, "Estimate only parameters first:count");
  app.add_option("--g-file", cfg.g_file, "CSV holding the Jacobian G of the function of interest");
  app.add_option("--n", cfg.n, "Sample size");

  app.add_option("--v0", cfg.v0, "Gap tolerance of the boost phase")->capture_default_str();
  app.add_option("--v", cfg.v, "Final gap tolerance")->capture_default_str();
  app.add_option("--step-cap", cfg.r_step, "Largest boost step")->capture_default_str();
  app.add_option("--max-boost-iters", cfg.max_boost_iters)->capture_default_str();
  app.add_option("--max-outer-iters", cfg.max_outer_iters)->capture_default_str();
  app.add_flag("--skip-refine", cfg.skip_refine, "Stop after the boost phase");
  app.add_option("--time-limit", cfg.time_limit, "Seconds per solver or baseline run (0 = none)")->capture_default_str();

  app.add_subcommand("select", "Choose n points and certify their efficiency");
  auto* efficiency = app.add_subcommand("efficiency", "Certify the efficiency of a given sample");
  efficiency->add_option("--candidates", cfg.candidates, "File with one pool index per line")->required();

  auto* bench = app.add_subcommand("bench", "Time and D-efficiency of hybrid, exchange and backward on Gaussian pools");
  bench->add_option("--sizes", cfg.sizes, "Pool sizes")->delimiter(',')->capture_default_str();
  bench->add_option("--k", cfg.k, "Parameters (intercept + k-1 Gaussian features)")->capture_default_str();
  bench->add_option("--algorithms", cfg.algorithms, "Subset of hybrid,exchange,backward")->delimiter(',');
  bench->add_option("--reference-v", cfg.reference_v, "Gap tolerance of the reference solution")->capture_default_str();

  auto* cross = app.add_subcommand("cross-criteria", "A-efficiency of D-optimal samples and vice versa");
  cross->add_option("--sizes", cfg.sizes, "Pool size when no --input is given")->delimiter(',')->capture_default_str();
  cross->add_option("--k", cfg.k, "Parameters of the generated pool")->capture_default_str();
  cross->add_option("--sample-sizes", cfg.sample_sizes, "Values of n")->delimiter(',')->capture_default_str();
  cross->add_option("--reference-v", cfg.reference_v)->capture_default_str();

  auto* two_stage = app.add_subcommand("two-stage", "Random pilot, model fit, then designed selection of the rest");
  two_stage->add_option("--r", cfg.r, "Fraction of n drawn in the random first stage")->capture_default_str();

  auto* boot = app.add_subcommand("bootstrap-eval", "Bootstrap MSE of designed versus random samples");
  boot->add_option("--r", cfg.r, "Fraction of n drawn in the random first stage")->capture_default_str();
  boot->add_option("--B", cfg.bootstrap, "Bootstrap replicates")->capture_default_str();
  boot->add_option("--methods", cfg.methods, "Subset of two-stage,random,full")->delimiter(',');
  boot->add_option("--max-failure-rate", cfg.max_failure_rate)->capture_default_str();
  boot->add_option("--responses", cfg.responses,
                   "model: draw responses from the full-data fit; observed: keep the resampled ones")
      ->check(CLI::IsMember({"model", "observed"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    cfg.command = app.get_subcommands().front()->get_name();
    if (delimiter.size() != 1) throw bmal::InvalidArgument("--delimiter must be a single character");
    cfg.schema.delimiter = delimiter.front();
    cfg.schema.features = bmal::split_list(features);
    cfg.model = bmal::parse_model_kind(model);
    cfg.beta = parse_doubles(beta, "--beta");
    cfg.cuts = parse_doubles(cuts, "--cuts");
    if (cfg.command == "bench") {
      if (app.get_option("--v")->count() == 0) cfg.v = 1e-3;
      if (app.get_option("--n")->count() == 0) cfg.n = 1000;
    }
  } catch (const bmal::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  }

  try {
    const bmal::CommandOutcome out = bmal::run_command(cfg);
    if (out.report.contains("error")) {
      std::cerr << "error: " << out.report["error"]["message"].get<std::string>() << '\n';
      if (out.report["error"].contains("suggestion"))
        std::cerr << "hint: " << out.report["error"]["suggestion"].get<std::string>() << '\n';
    } else if (out.exit_code == 4) {
      std::cerr << "warning: the solver stopped before reaching the gap tolerance\n";
    }
    std::cout << "wrote " << cfg.output_dir << "/report.json\n";
    return out.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
