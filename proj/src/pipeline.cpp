#include "bmal/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <Eigen/Cholesky>

#include "bmal/baselines.hpp"
#include "bmal/errors.hpp"
#include "bmal/measures.hpp"
#include "bmal/models.hpp"

namespace bmal {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

json to_array(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json to_array(const std::vector<Index>& v) {
  json out = json::array();
  for (Index i : v) out.push_back(i);
  return out;
}

json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

std::string cell(const std::optional<double>& x) { return x ? format_double(*x) : std::string("NA"); }

const char* error_type(const Error& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const DimensionMismatch*>(&e)) return "DimensionMismatch";
  if (dynamic_cast<const InfeasibleEpsilon*>(&e)) return "InfeasibleEpsilon";
  if (dynamic_cast<const InfeasibleMass*>(&e)) return "InfeasibleMass";
  if (dynamic_cast<const NotPSD*>(&e)) return "NotPSD";
  if (dynamic_cast<const ZeroVariance*>(&e)) return "ZeroVariance";
  if (dynamic_cast<const EmptyInput*>(&e)) return "EmptyInput";
  if (dynamic_cast<const InvalidArgument*>(&e)) return "InvalidArgument";
  if (dynamic_cast<const SingularInformation*>(&e)) return "SingularInformation";
  if (dynamic_cast<const PositivityRepairFailed*>(&e)) return "PositivityRepairFailed";
  if (dynamic_cast<const DegenerateCategory*>(&e)) return "DegenerateCategory";
  if (dynamic_cast<const FitDiverged*>(&e)) return "FitDiverged";
  return "Error";
}

std::filesystem::path output_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output_dir);
  return std::filesystem::path(cfg.output_dir) / name;
}

void write_json(const RunConfig& cfg, const json& report) {
  std::ofstream out(output_path(cfg, "report.json"));
  out << report.dump(2) << '\n';
  if (!out) throw InvalidArgument("cannot write report.json in '" + cfg.output_dir + "'");
}

void write_table(const RunConfig& cfg, const std::string& name, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(output_path(cfg, name));
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  if (!out) throw InvalidArgument("cannot write " + name + " in '" + cfg.output_dir + "'");
}

void write_weights(const RunConfig& cfg, const Measure& w, const VectorXd& scores, const SampleSet& selected) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(w.size()));
  for (Index i = 0; i < w.size(); ++i) {
    rows.push_back({std::to_string(i), format_double(w[i]), format_double(scores[i]), selected.contains(i) ? "1" : "0"});
  }
  write_table(cfg, "weights.csv", {"index", "weight", "score", "selected"}, rows);
}

json base_report(const RunConfig& cfg) {
  return json{{"schema_version", kSchemaVersion}, {"command", cfg.command}, {"config", cfg.to_json()}, {"seed", cfg.seed}};
}

template <typename Body>
CommandOutcome guarded(const RunConfig& cfg, Body body) {
  const auto start = Clock::now();
  try {
    CommandOutcome out = body();
    out.report["timing"]["total_seconds"] = seconds_since(start);
    write_json(cfg, out.report);
    return out;
  } catch (const Error& e) {
    json report = base_report(cfg);
    report["error"] = {{"type", error_type(e)}, {"message", e.what()}, {"exit_code", e.exit_code()}};
    if (dynamic_cast<const FitDiverged*>(&e) && cfg.command == "two-stage")
      report["error"]["suggestion"] = "the stage-1 sample may be too small to fit the model; try a larger r";
    report["timing"]["total_seconds"] = seconds_since(start);
    write_json(cfg, report);
    return {report, e.exit_code()};
  }
}

CriterionSpec make_criterion(const RunConfig& cfg, Index k) {
  CriterionSpec spec(cfg.p);
  if (!cfg.g_file.empty()) {
    spec = CriterionSpec(cfg.p, read_matrix_csv(cfg.g_file));
  } else if (!cfg.g_rows.empty()) {
    const auto parts = split_list(cfg.g_rows, ':');
    if (parts.size() != 2) throw InvalidArgument("--g-rows expects first:count");
    spec = CriterionSpec::select(cfg.p, k, std::stol(parts[0]), std::stol(parts[1]));
  }
  spec.check_dim(k);
  return spec;
}

struct Problem {
  CsvData data;
  MatrixXd z;
  std::optional<Standardized> standardized;
  WorkingModel model;
  bool fitted = false;
  AtomSet atoms;
  CriterionSpec spec;
};

Problem load_problem(const RunConfig& cfg, bool atoms_needed = true) {
  if (cfg.input.empty()) throw InvalidArgument("--input is required");
  if (cfg.model == ModelKind::Cumlink && cfg.schema.add_intercept)
    throw InvalidArgument("cumulative link models carry intercepts in their cutpoints; drop --intercept");
  Problem pr;
  pr.data = ingest_csv(cfg.input, cfg.schema);
  pr.z = pr.data.z;
  if (cfg.standardize) {
    std::vector<bool> keep;
    for (const auto& c : pr.data.columns) keep.push_back(c == "(intercept)");
    pr.standardized = standardize_features(pr.z, keep);
    pr.z = pr.standardized->z;
  }
  pr.model.kind = cfg.model;
  if (cfg.model != ModelKind::Linear) {
    if (!cfg.beta.empty()) {
      pr.model.beta = Eigen::Map<const VectorXd>(cfg.beta.data(), static_cast<Index>(cfg.beta.size()));
      pr.model.cuts = Eigen::Map<const VectorXd>(cfg.cuts.data(), static_cast<Index>(cfg.cuts.size()));
    } else if (atoms_needed) {
      if (!pr.data.y) throw InvalidArgument("working parameters need --beta or a --response column to fit");
      std::vector<Index> all(static_cast<std::size_t>(pr.z.rows()));
      std::iota(all.begin(), all.end(), Index{0});
      pr.model = fit_model(cfg.model, pr.z, *pr.data.y, all);
      pr.fitted = true;
    }
  }
  if (atoms_needed) {
    pr.atoms = pr.model.atoms(pr.z);
    pr.spec = make_criterion(cfg, pr.atoms.dim());
  }
  return pr;
}

json problem_json(const Problem& pr) {
  json out{{"kind", to_string(pr.model.kind)}, {"columns", pr.data.columns}, {"fitted", pr.fitted}};
  if (pr.model.kind != ModelKind::Linear) out["beta"] = to_array(pr.model.beta);
  if (pr.model.kind == ModelKind::Cumlink) out["cuts"] = to_array(pr.model.cuts);
  if (pr.standardized) {
    out["standardization"] = {{"sd", "population"}, {"means", to_array(pr.standardized->means)}, {"sds", to_array(pr.standardized->sds)}};
  }
  return out;
}

json solve_json(const SolveResult& s) {
  return json{{"phi", s.phi},
              {"gap_ratio", s.gap_ratio},
              {"converged", s.converged},
              {"timed_out", s.timed_out},
              {"boost_iterations", s.boost_iterations},
              {"outer_iterations", s.outer_iterations}};
}

void check_sample_size(Index n, Index pool, bool allow_full) {
  if (n < 1) throw InvalidArgument("--n must be at least 1");
  if (allow_full ? n > pool : n >= pool)
    throw InvalidArgument("sample size " + std::to_string(n) + (allow_full ? " exceeds" : " must be below") +
                          " the pool size " + std::to_string(pool));
}

std::vector<Index> all_indices(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

}  // namespace

ModelKind parse_model_kind(const std::string& name) {
  if (name == "linear") return ModelKind::Linear;
  if (name == "logistic") return ModelKind::Logistic;
  if (name == "cumlink") return ModelKind::Cumlink;
  throw InvalidArgument("unknown model '" + name + "' (expected linear, logistic or cumlink)");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear:
      return "linear";
    case ModelKind::Logistic:
      return "logistic";
    case ModelKind::Cumlink:
      return "cumlink";
  }
  return "linear";
}

SolverConfig RunConfig::solver_config(Index sample_size) const {
  SolverConfig c = SolverConfig::for_sample_size(sample_size);
  c.v0 = std::max(v0, v);
  c.v = v;
  c.r = r_step;
  c.max_boost_iters = max_boost_iters;
  c.max_outer_iters = max_outer_iters;
  c.skip_refine = skip_refine;
  c.time_limit_seconds = time_limit;
  c.seed = seed;
  return c;
}

json RunConfig::to_json() const {
  return json{{"input", input},
              {"threads", threads},
              {"features", schema.features},
              {"response", schema.response},
              {"intercept", schema.add_intercept},
              {"delimiter", std::string(1, schema.delimiter)},
              {"model", bmal::to_string(model)},
              {"beta", beta},
              {"cuts", cuts},
              {"standardize", standardize},
              {"p", p},
              {"g_rows", g_rows},
              {"g_file", g_file},
              {"n", n},
              {"v0", v0},
              {"v", v},
              {"r_step", r_step},
              {"max_boost_iters", max_boost_iters},
              {"max_outer_iters", max_outer_iters},
              {"skip_refine", skip_refine},
              {"time_limit", time_limit},
              {"candidates", candidates},
              {"sizes", sizes},
              {"k", k},
              {"sample_sizes", sample_sizes},
              {"algorithms", algorithms},
              {"reference_v", reference_v},
              {"r", r},
              {"bootstrap", bootstrap},
              {"methods", methods},
              {"max_failure_rate", max_failure_rate},
              {"responses", responses}};
}

Selection select_sample(const AtomSet& atoms, const CriterionSpec& spec, Index n, const SolverConfig& cfg) {
  Selection out{solve_hybrid(atoms, spec, cfg), SampleSet{}, EfficiencyBounds{}, 0.0};
  out.sample = round_to_sample(out.solve.w, n, out.solve.leverages);
  const Measure m = measure_of_sample(out.sample, atoms.size());
  out.efficiency = efficiency_bounds(m, out.solve.w, atoms, spec);
  out.sample_phi = criterion_value(atoms, m.weights(), spec);
  return out;
}

AtomSet WorkingModel::atoms(const MatrixXd& z) const {
  switch (kind) {
    case ModelKind::Linear:
      return linear_atoms(z);
    case ModelKind::Logistic:
      return logistic_atoms(z, LogisticModelSpec{beta, false});
    case ModelKind::Cumlink:
      return cumlink_atoms(z, CumulativeLinkSpec{beta, cuts, Link::Logit});
  }
  return linear_atoms(z);
}

WorkingModel fit_model(ModelKind kind, const MatrixXd& z, const VectorXd& y, const std::vector<Index>& rows,
                       const FitOptions& opts) {
  if (y.size() != z.rows()) throw DimensionMismatch("response length does not match the design rows");
  const MatrixXd zs = z(rows, Eigen::all);
  const VectorXd ys = y(rows);
  WorkingModel out;
  out.kind = kind;
  switch (kind) {
    case ModelKind::Linear: {
      Eigen::LDLT<MatrixXd> ldlt(zs.transpose() * zs);
      if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 1e-12 * ldlt.vectorD().maxCoeff()))
        throw FitDiverged("least squares design is singular");
      out.beta = ldlt.solve(zs.transpose() * ys);
      break;
    }
    case ModelKind::Logistic:
      out.beta = fit_logistic(zs, ys, opts).beta;
      break;
    case ModelKind::Cumlink: {
      CategoryCoding coding = code_categories(ys);
      const Index jn = static_cast<Index>(coding.levels.size());
      if (jn < 2) throw FitDiverged("fewer than two response categories observed");
      CumulativeLinkFit fit = fit_cumlink(zs, coding.codes, jn, opts);
      out.beta = fit.spec.beta;
      out.cuts = fit.spec.cuts;
      out.levels = std::move(coding.levels);
      break;
    }
  }
  return out;
}

TwoStageResult two_stage_select(const MatrixXd& z, const VectorXd& y, ModelKind kind, const CriterionSpec& spec,
                                Index n, double r, Rng& rng, const SolverConfig& base) {
  const Index pool = z.rows();
  if (!(r > 0.0 && r <= 1.0)) throw InvalidArgument("stage-1 fraction r must lie in (0, 1]");
  check_sample_size(n, pool, false);
  const Index n1 = std::clamp<Index>(static_cast<Index>(std::llround(r * static_cast<double>(n))), 1, n);

  TwoStageResult out;
  out.stage1 = rng.sample_without_replacement(pool, n1);
  if (n1 == n) {
    out.combined = SampleSet(out.stage1);
    out.working.kind = kind;
    return out;
  }
  out.working = fit_model(kind, z, y, out.stage1);
  const AtomSet atoms = out.working.atoms(z);
  spec.check_dim(atoms.dim());

  SolverConfig cfg = base;
  cfg.epsilon = 1.0 / static_cast<double>(n);
  cfg.pinned = out.stage1;
  std::sort(cfg.pinned.begin(), cfg.pinned.end());
  out.solve = solve_hybrid(atoms, spec, cfg);
  out.stage2 = round_to_sample(out.solve->w, n - n1, out.solve->leverages, cfg.pinned);
  std::vector<Index> all = out.stage1;
  all.insert(all.end(), out.stage2.indices().begin(), out.stage2.indices().end());
  out.combined = SampleSet(std::move(all));
  return out;
}

void parallel_for(Index count, int threads, const std::function<void(Index)>& fn) {
  const Index workers = std::clamp<Index>(threads, 1, std::max<Index>(count, 1));
  if (workers <= 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto work = [&] {
    for (;;) {
      const Index i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (Index w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

VectorXd simulate_responses(const WorkingModel& model, const MatrixXd& z, double noise_sd, Rng& rng) {
  VectorXd y(z.rows());
  for (Index i = 0; i < z.rows(); ++i) {
    const double eta = z.row(i).dot(model.beta);
    switch (model.kind) {
      case ModelKind::Linear:
        y[i] = eta + noise_sd * rng.normal();
        break;
      case ModelKind::Logistic:
        y[i] = rng.uniform() < link_cdf(Link::Logit, eta) ? 1.0 : 0.0;
        break;
      case ModelKind::Cumlink: {
        const double u = rng.uniform();
        Index j = 0;
        while (j < model.cuts.size() && u >= link_cdf(Link::Logit, model.cuts[j] - eta)) ++j;
        y[i] = static_cast<std::size_t>(j) < model.levels.size() ? model.levels[static_cast<std::size_t>(j)] : static_cast<double>(j);
        break;
      }
    }
  }
  return y;
}

BootstrapSummary bootstrap_eval(const MatrixXd& z, const VectorXd& y, const RunConfig& cfg, const CriterionSpec& spec) {
  if (cfg.bootstrap < 1) throw InvalidArgument("bootstrap replicate count B must be at least 1");
  if (cfg.methods.empty()) throw InvalidArgument("no bootstrap methods given");
  for (const auto& m : cfg.methods)
    if (m != "two-stage" && m != "random" && m != "full") throw InvalidArgument("unknown bootstrap method '" + m + "'");
  const Index pool = z.rows();
  check_sample_size(cfg.n, pool, false);

  if (cfg.responses != "model" && cfg.responses != "observed")
    throw InvalidArgument("--responses must be model or observed");
  const bool simulate = cfg.responses == "model";

  BootstrapSummary out;
  out.methods = cfg.methods;
  out.replicates = cfg.bootstrap;
  const WorkingModel truth = fit_model(cfg.model, z, y, all_indices(pool));
  out.reference = truth.coefficients();
  double noise_sd = 0.0;
  if (cfg.model == ModelKind::Linear) noise_sd = std::sqrt((y - z * truth.beta).squaredNorm() / static_cast<double>(pool));
  const std::size_t nm = cfg.methods.size();
  out.squared_errors.assign(static_cast<std::size_t>(cfg.bootstrap), {});
  const SolverConfig base = cfg.solver_config(cfg.n);

  parallel_for(cfg.bootstrap, cfg.threads, [&](Index b) {
    Rng rb(cfg.seed, static_cast<std::uint64_t>(b) + 1);
    const std::vector<Index> idx = rb.resample(pool);
    const MatrixXd zb = z(idx, Eigen::all);
    const VectorXd yb = simulate ? simulate_responses(truth, zb, noise_sd, rb) : VectorXd(y(idx));
    std::vector<VectorXd> errors;
    try {
      for (std::size_t m = 0; m < nm; ++m) {
        Rng rm(cfg.seed, (static_cast<std::uint64_t>(b) + 1) * 1024 + m);
        std::vector<Index> rows;
        if (cfg.methods[m] == "random") {
          rows = rm.sample_without_replacement(pool, cfg.n);
        } else if (cfg.methods[m] == "full") {
          rows = all_indices(pool);
        } else {
          rows = two_stage_select(zb, yb, cfg.model, spec, cfg.n, cfg.r, rm, base).combined.indices();
        }
        const VectorXd est = fit_model(cfg.model, zb, yb, rows).coefficients();
        if (est.size() != out.reference.size()) throw FitDiverged("coefficient dimension changed");
        errors.push_back((est - out.reference).array().square().matrix());
      }
    } catch (const Error& e) {
      if (e.exit_code() == 2) throw;
      return;  // counted as a failed replicate
    }
    out.squared_errors[static_cast<std::size_t>(b)] = std::move(errors);
  });

  out.component_mse.assign(nm, VectorXd::Zero(out.reference.size()));
  Index ok = 0;
  for (const auto& rep : out.squared_errors) {
    if (rep.empty()) {
      ++out.failed;
      continue;
    }
    ++ok;
    for (std::size_t m = 0; m < nm; ++m) out.component_mse[m] += rep[m];
  }
  if (static_cast<double>(out.failed) > cfg.max_failure_rate * static_cast<double>(cfg.bootstrap) || ok == 0) {
    throw FitDiverged(std::to_string(out.failed) + " of " + std::to_string(cfg.bootstrap) +
                      " bootstrap replicates failed to fit");
  }
  out.total_mse.assign(nm, 0.0);
  for (std::size_t m = 0; m < nm; ++m) {
    out.component_mse[m] /= static_cast<double>(ok);
    out.total_mse[m] = out.component_mse[m].sum();
  }
  return out;
}

std::vector<BenchCell> run_bench(const RunConfig& cfg) {
  for (const auto& a : cfg.algorithms)
    if (a != "hybrid" && a != "exchange" && a != "backward") throw InvalidArgument("unknown algorithm '" + a + "'");
  if (cfg.k < 2) throw InvalidArgument("k must be at least 2 (intercept plus features)");
  const std::size_t na = cfg.algorithms.size();
  std::vector<BenchCell> cells(cfg.sizes.size() * na);
  parallel_for(static_cast<Index>(cfg.sizes.size()), cfg.threads, [&](Index c) {
    const Index pool = cfg.sizes[static_cast<std::size_t>(c)];
    check_sample_size(cfg.n, pool, false);
    Rng rng(cfg.seed, static_cast<std::uint64_t>(c));
    const AtomSet atoms = linear_atoms(gaussian_pool(pool, cfg.k, rng));
    const CriterionSpec spec(0.0);
    SolverConfig ref_cfg = cfg.solver_config(cfg.n);
    ref_cfg.v = cfg.reference_v;
    ref_cfg.v0 = std::max(cfg.v0, cfg.reference_v);
    ref_cfg.skip_refine = false;
    ref_cfg.time_limit_seconds = 0.0;
    const SolveResult ref = solve_hybrid(atoms, spec, ref_cfg);

    for (std::size_t a = 0; a < na; ++a) {
      BenchCell& out = cells[static_cast<std::size_t>(c) * na + a];
      out.pool_size = pool;
      out.algorithm = cfg.algorithms[a];
      SampleSet sample;
      bool timed_out = false;
      const auto start = Clock::now();
      if (out.algorithm == "hybrid") {
        const SolveResult s = solve_hybrid(atoms, spec, cfg.solver_config(cfg.n));
        sample = round_to_sample(s.w, cfg.n, s.leverages);
        timed_out = s.timed_out;
        out.iterations = s.boost_iterations + s.outer_iterations;
      } else {
        const BaselineOptions opts{100000, cfg.time_limit};
        const BaselineResult b =
            out.algorithm == "exchange" ? exchange_select(atoms, cfg.n, opts) : backward_select(atoms, cfg.n, opts);
        sample = b.sample;
        timed_out = b.timed_out;
        out.iterations = b.iterations;
      }
      out.seconds = seconds_since(start);
      if (timed_out) continue;
      const EfficiencyBounds e = efficiency_bounds(measure_of_sample(sample, pool), ref.w, atoms, spec);
      out.efficiency = e.ratio;
      out.certified_lower_bound = e.certified_lower_bound;
    }
  });
  return cells;
}

std::vector<CrossRow> run_cross_criteria(const AtomSet& atoms, const RunConfig& cfg) {
  const CriterionSpec d_spec(0.0);
  const CriterionSpec a_spec(1.0);
  std::vector<CrossRow> rows(cfg.sample_sizes.size());
  parallel_for(static_cast<Index>(rows.size()), cfg.threads, [&](Index i) {
    CrossRow& row = rows[static_cast<std::size_t>(i)];
    row.n = cfg.sample_sizes[static_cast<std::size_t>(i)];
    check_sample_size(row.n, atoms.size(), true);
    const auto start = Clock::now();
    SolverConfig sc = cfg.solver_config(row.n);
    sc.v = cfg.reference_v;
    sc.v0 = std::max(cfg.v0, cfg.reference_v);
    sc.skip_refine = false;
    const SolveResult d = solve_hybrid(atoms, d_spec, sc);
    const SolveResult a = solve_hybrid(atoms, a_spec, sc);
    row.seconds = seconds_since(start);
    if (d.timed_out || a.timed_out) return;
    const Measure md = measure_of_sample(round_to_sample(d.w, row.n, d.leverages), atoms.size());
    const Measure ma = measure_of_sample(round_to_sample(a.w, row.n, a.leverages), atoms.size());
    row.d_eff_of_d = efficiency_bounds(md, d.w, atoms, d_spec).ratio;
    row.a_eff_of_d = efficiency_bounds(md, a.w, atoms, a_spec).ratio;
    row.d_eff_of_a = efficiency_bounds(ma, d.w, atoms, d_spec).ratio;
    row.a_eff_of_a = efficiency_bounds(ma, a.w, atoms, a_spec).ratio;
  });
  return rows;
}

CommandOutcome cmd_select(const RunConfig& cfg) {
  return guarded(cfg, [&] {
    const auto start = Clock::now();
    const Problem pr = load_problem(cfg);
    const double ingest = seconds_since(start);
    check_sample_size(cfg.n, pr.atoms.size(), false);
    const Selection sel = select_sample(pr.atoms, pr.spec, cfg.n, cfg.solver_config(cfg.n));

    json report = base_report(cfg);
    report["N"] = pr.atoms.size();
    report["k"] = pr.atoms.dim();
    report["n"] = cfg.n;
    report["p"] = cfg.p;
    report["epsilon"] = sel.solve.w.epsilon();
    report["model"] = problem_json(pr);
    report["selected"] = to_array(sel.sample.indices());
    report["phi"] = sel.solve.phi;
    report["gap_ratio"] = sel.solve.gap_ratio;
    report["sample_phi"] = sel.sample_phi;
    report["efficiency"] = {{"ratio", sel.efficiency.ratio}, {"certified_lower_bound", sel.efficiency.certified_lower_bound}};
    report["solver"] = solve_json(sel.solve);
    report["timing"] = {{"ingest_seconds", ingest},
                        {"boost_seconds", sel.solve.boost_seconds},
                        {"refine_seconds", sel.solve.refine_seconds}};
    write_weights(cfg, sel.solve.w, sel.solve.leverages, sel.sample);
    return CommandOutcome{report, sel.solve.converged ? 0 : 4};
  });
}

CommandOutcome cmd_efficiency(const RunConfig& cfg) {
  return guarded(cfg, [&] {
    if (cfg.candidates.empty()) throw InvalidArgument("--candidates is required");
    const Problem pr = load_problem(cfg);
    const Index pool = pr.atoms.size();
    std::vector<Index> idx = read_index_file(cfg.candidates);
    for (Index i : idx)
      if (i < 0 || i >= pool) throw InvalidArgument("candidate index " + std::to_string(i) + " is outside the pool");
    const SampleSet candidate(idx);
    if (candidate.size() != static_cast<Index>(idx.size())) throw InvalidArgument("candidate indices are not distinct");
    const Index n = candidate.size();
    if (cfg.n != 0 && cfg.n != n)
      throw DimensionMismatch("candidate file lists " + std::to_string(n) + " indices but --n is " + std::to_string(cfg.n));
    check_sample_size(n, pool, true);

    const SolveResult solved = solve_hybrid(pr.atoms, pr.spec, cfg.solver_config(n));
    const Measure m = measure_of_sample(candidate, pool);
    const EfficiencyBounds e = efficiency_bounds(m, solved.w, pr.atoms, pr.spec);

    json report = base_report(cfg);
    report["N"] = pool;
    report["k"] = pr.atoms.dim();
    report["n"] = n;
    report["p"] = cfg.p;
    report["epsilon"] = solved.w.epsilon();
    report["model"] = problem_json(pr);
    report["selected"] = to_array(candidate.indices());
    report["phi"] = solved.phi;
    report["gap_ratio"] = solved.gap_ratio;
    report["sample_phi"] = criterion_value(pr.atoms, m.weights(), pr.spec);
    report["efficiency"] = {{"ratio", e.ratio}, {"certified_lower_bound", e.certified_lower_bound}};
    report["solver"] = solve_json(solved);
    report["timing"] = {{"boost_seconds", solved.boost_seconds}, {"refine_seconds", solved.refine_seconds}};
    write_weights(cfg, solved.w, solved.leverages, candidate);
    return CommandOutcome{report, solved.converged ? 0 : 4};
  });
}

CommandOutcome cmd_bench(const RunConfig& cfg) {
  return guarded(cfg, [&] {
    const std::vector<BenchCell> cells = run_bench(cfg);
    json report = base_report(cfg);
    report["k"] = cfg.k;
    report["n"] = cfg.n;
    report["p"] = 0.0;
    json table = json::array();
    json times = json::array();
    std::vector<std::vector<std::string>> rows;
    for (const BenchCell& c : cells) {
      table.push_back({{"N", c.pool_size},
                       {"algorithm", c.algorithm},
                       {"efficiency", optional_number(c.efficiency)},
                       {"certified_lower_bound", optional_number(c.certified_lower_bound)},
                       {"iterations", c.iterations}});
      times.push_back({{"N", c.pool_size}, {"algorithm", c.algorithm}, {"seconds", c.seconds}});
      rows.push_back({std::to_string(c.pool_size), std::to_string(cfg.k), std::to_string(cfg.n), c.algorithm,
                      c.efficiency ? format_double(c.seconds) : "NA", cell(c.efficiency), cell(c.certified_lower_bound)});
    }
    report["table"] = table;
    report["timing"] = {{"cells", times}};
    write_table(cfg, "table.csv", {"N", "k", "n", "algorithm", "seconds", "efficiency", "certified_lower_bound"}, rows);
    return CommandOutcome{report, 0};
  });
}

CommandOutcome cmd_cross_criteria(const RunConfig& cfg) {
  return guarded(cfg, [&] {
    AtomSet atoms;
    if (cfg.input.empty()) {
      if (cfg.sizes.empty()) throw InvalidArgument("--sizes must name the pool size");
      Rng rng(cfg.seed, 0);
      atoms = linear_atoms(gaussian_pool(cfg.sizes.front(), cfg.k, rng));
    } else {
      atoms = load_problem(cfg).atoms;
    }
    const std::vector<CrossRow> rows = run_cross_criteria(atoms, cfg);
    json report = base_report(cfg);
    report["N"] = atoms.size();
    report["k"] = atoms.dim();
    json table = json::array();
    json times = json::array();
    std::vector<std::vector<std::string>> csv;
    for (const CrossRow& r : rows) {
      table.push_back({{"n", r.n},
                       {"a_efficiency_of_d_sample", optional_number(r.a_eff_of_d)},
                       {"d_efficiency_of_a_sample", optional_number(r.d_eff_of_a)},
                       {"d_efficiency_of_d_sample", optional_number(r.d_eff_of_d)},
                       {"a_efficiency_of_a_sample", optional_number(r.a_eff_of_a)}});
      times.push_back({{"n", r.n}, {"seconds", r.seconds}});
      csv.push_back({std::to_string(r.n), cell(r.a_eff_of_d), cell(r.d_eff_of_a), cell(r.d_eff_of_d), cell(r.a_eff_of_a)});
    }
    report["table"] = table;
    report["timing"] = {{"rows", times}};
    write_table(cfg, "table.csv",
                {"n", "a_efficiency_of_d_sample", "d_efficiency_of_a_sample", "d_efficiency_of_d_sample",
                 "a_efficiency_of_a_sample"},
                csv);
    return CommandOutcome{report, 0};
  });
}

CommandOutcome cmd_two_stage(const RunConfig& cfg) {
  return guarded(cfg, [&] {
    if (cfg.model == ModelKind::Linear) throw InvalidArgument("two-stage sampling needs --model logistic or cumlink");
    const Problem pr = load_problem(cfg, false);
    if (!pr.data.y) throw InvalidArgument("two-stage sampling needs a --response column");
    const Index k_est = cfg.model == ModelKind::Cumlink ? pr.z.cols() + 1 : pr.z.cols();
    const CriterionSpec spec = make_criterion(cfg, k_est);
    Rng rng(cfg.seed, 0);
    const TwoStageResult ts = two_stage_select(pr.z, *pr.data.y, cfg.model, spec, cfg.n, cfg.r, rng, cfg.solver_config(cfg.n));

    json report = base_report(cfg);
    report["N"] = pr.z.rows();
    report["n"] = cfg.n;
    report["p"] = cfg.p;
    report["r"] = cfg.r;
    std::vector<Index> s1 = ts.stage1;
    std::sort(s1.begin(), s1.end());
    report["stage1"] = to_array(s1);
    report["stage2"] = to_array(ts.stage2.indices());
    report["selected"] = to_array(ts.combined.indices());
    json timing = json::object();
    if (ts.solve) {
      report["epsilon"] = ts.solve->w.epsilon();
      report["working_model"] = {{"kind", to_string(cfg.model)}, {"beta", to_array(ts.working.beta)}};
      if (cfg.model == ModelKind::Cumlink) report["working_model"]["cuts"] = to_array(ts.working.cuts);
      report["solver"] = solve_json(*ts.solve);
      report["phi"] = ts.solve->phi;
      report["gap_ratio"] = ts.solve->gap_ratio;
      timing = {{"boost_seconds", ts.solve->boost_seconds}, {"refine_seconds", ts.solve->refine_seconds}};
      write_weights(cfg, ts.solve->w, ts.solve->leverages, ts.combined);
    }
    try {
      const WorkingModel final_fit = fit_model(cfg.model, pr.z, *pr.data.y, ts.combined.indices());
      report["estimate"] = {{"beta", to_array(final_fit.beta)}};
      if (cfg.model == ModelKind::Cumlink) report["estimate"]["cuts"] = to_array(final_fit.cuts);
    } catch (const FitDiverged& e) {
      report["estimate"] = {{"error", e.what()}};
    }
    report["timing"] = timing;
    const int code = ts.solve && !ts.solve->converged ? 4 : 0;
    return CommandOutcome{report, code};
  });
}

CommandOutcome cmd_bootstrap_eval(const RunConfig& cfg) {
  return guarded(cfg, [&] {
    const Problem pr = load_problem(cfg, false);
    if (!pr.data.y) throw InvalidArgument("bootstrap evaluation needs a --response column");
    const Index k_est = cfg.model == ModelKind::Cumlink ? pr.z.cols() + 1 : pr.z.cols();
    const CriterionSpec spec = make_criterion(cfg, k_est);
    const BootstrapSummary s = bootstrap_eval(pr.z, *pr.data.y, cfg, spec);

    const std::size_t nm = s.methods.size();
    const auto base_it = std::find(s.methods.begin(), s.methods.end(), "random");
    const std::size_t base = base_it != s.methods.end() ? static_cast<std::size_t>(base_it - s.methods.begin()) : nm - 1;
    const std::vector<std::string>& names = pr.data.columns;  // one coefficient per design column

    json report = base_report(cfg);
    report["N"] = pr.z.rows();
    report["n"] = cfg.n;
    report["p"] = cfg.p;
    report["r"] = cfg.r;
    report["B"] = s.replicates;
    report["failed_replicates"] = s.failed;
    report["reference_estimate"] = to_array(s.reference);
    report["baseline_method"] = s.methods[base];
    json methods = json::array();
    for (std::size_t m = 0; m < nm; ++m) {
      methods.push_back({{"method", s.methods[m]},
                         {"total_mse", s.total_mse[m]},
                         {"component_mse", to_array(s.component_mse[m])},
                         {"total_ratio", s.total_mse[m] / s.total_mse[base]},
                         {"component_ratio", to_array(s.component_mse[m].cwiseQuotient(s.component_mse[base]))}});
    }
    report["methods"] = methods;
    report["timing"] = json::object();

    std::vector<std::string> header{"component"};
    for (const auto& m : s.methods) header.push_back(m + "_mse");
    for (std::size_t m = 0; m < nm; ++m)
      if (m != base) header.push_back(s.methods[m] + "_ratio");
    std::vector<std::vector<std::string>> rows;
    auto add_row = [&](const std::string& name, auto value) {
      std::vector<std::string> row{name};
      for (std::size_t m = 0; m < nm; ++m) row.push_back(format_double(value(m)));
      for (std::size_t m = 0; m < nm; ++m)
        if (m != base) row.push_back(format_double(value(m) / value(base)));
      rows.push_back(std::move(row));
    };
    for (Index c = 0; c < s.reference.size(); ++c)
      add_row(names[static_cast<std::size_t>(c)], [&](std::size_t m) { return s.component_mse[m][c]; });
    add_row("total", [&](std::size_t m) { return s.total_mse[m]; });
    write_table(cfg, "table.csv", header, rows);

    std::vector<std::vector<std::string>> reps;
    for (std::size_t b = 0; b < s.squared_errors.size(); ++b) {
      const auto& rep = s.squared_errors[b];
      for (std::size_t m = 0; m < rep.size(); ++m)
        for (Index c = 0; c < rep[m].size(); ++c)
          reps.push_back({std::to_string(b), s.methods[m], names[static_cast<std::size_t>(c)], format_double(rep[m][c])});
    }
    write_table(cfg, "replicates.csv", {"replicate", "method", "component", "squared_error"}, reps);
    return CommandOutcome{report, 0};
  });
}

CommandOutcome run_command(const RunConfig& cfg) {
  if (cfg.command == "select") return cmd_select(cfg);
  if (cfg.command == "efficiency") return cmd_efficiency(cfg);
  if (cfg.command == "bench") return cmd_bench(cfg);
  if (cfg.command == "cross-criteria") return cmd_cross_criteria(cfg);
  if (cfg.command == "two-stage") return cmd_two_stage(cfg);
  if (cfg.command == "bootstrap-eval") return cmd_bootstrap_eval(cfg);
  return guarded(cfg, [&]() -> CommandOutcome { throw InvalidArgument("unknown command '" + cfg.command + "'"); });
}

}  // namespace bmal
