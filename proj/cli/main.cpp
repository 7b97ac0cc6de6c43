#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "defed/analysis.hpp"
#include "defed/config.hpp"
#include "defed/data.hpp"
#include "defed/engine.hpp"
#include "defed/rng.hpp"
#include "defed/svg.hpp"
#include "defed/topology.hpp"
#include "defed/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "algorithm",
    "topology.kind", "topology.clients", "topology.degree", "topology.file",
    "objective.kind", "objective.reg",
    "data.source", "data.samples", "data.lo", "data.hi", "data.noise_std",
    "data.feature_powers", "data.dim", "data.margin", "data.path", "data.label_column",
    "data.seed", "data.partition_seed", "data.test_samples",
    "schedule.kind", "schedule.eta", "schedule.delta", "schedule.gamma",
    "run.rounds", "run.batch_size", "run.participation", "run.seed", "run.n_seeds",
    "run.log_every", "run.init", "run.init_scale", "run.scale_step",
    "analysis.oracle", "analysis.bound_check", "analysis.proof_variant",
    "analysis.sigma_draws", "analysis.sigma_batch",
};

struct GlobalFlags {
  std::optional<uint64_t> seed;
  int threads = 1;
  bool quiet = false;
};

/* Everything a single experiment needs, assembled from one config file. */
struct Experiment {
  defed::Config config;
  defed::Objective objective;
  std::vector<defed::Dataset> shards;
  defed::Dataset train_eval;
  std::optional<defed::Dataset> test_eval;
  std::optional<defed::MixingMatrix> mixing;
  defed::ConvexityConstants constants;
  double lambda = 0;
  defed::RunConfig run;
  defed::Schedule schedule;
  defed::ScheduleValidation validation;
  std::optional<Eigen::VectorXd> optimum;
  bool bound_check = false;
  bool proof_variant = false;
  int sigma_draws = 1000;
  int sigma_batch = 64;
};

defed::Dataset build_dataset(const defed::Config& config) {
  const std::string source = config.get_string("data.source", "regression");
  const uint64_t seed = static_cast<uint64_t>(config.get_long("data.seed", 1));
  if (source == "regression") {
    defed::RegressionParams params;
    params.n_samples = static_cast<int>(config.get_long("data.samples", params.n_samples));
    params.lo = config.get_double("data.lo", params.lo);
    params.hi = config.get_double("data.hi", params.hi);
    params.noise_std = config.get_double("data.noise_std", params.noise_std);
    params.feature_powers = config.get_int_list("data.feature_powers", params.feature_powers);
    return defed::generate_regression(params, seed);
  }
  if (source == "classification") {
    defed::ClassificationParams params;
    params.n_samples = static_cast<int>(config.get_long("data.samples", params.n_samples));
    params.dim = static_cast<int>(config.get_long("data.dim", params.dim));
    params.margin = config.get_double("data.margin", params.margin);
    return defed::generate_classification(params, seed);
  }
  if (source == "csv") {
    const std::string path = config.require_string("data.path");
    const int label_column = static_cast<int>(config.get_long("data.label_column", 0));
    return defed::load_csv_dataset(path, label_column);
  }
  throw std::invalid_argument("unknown data.source '" + source +
                              "' (expected regression, classification or csv)");
}

std::optional<defed::Dataset> build_test_set(const defed::Config& config) {
  const long n = config.get_long("data.test_samples", 0);
  if (n <= 0) return std::nullopt;
  const std::string source = config.get_string("data.source", "regression");
  const uint64_t seed =
      defed::derive_stream(static_cast<uint64_t>(config.get_long("data.seed", 1)), 1, 0,
                           defed::kStreamData);
  if (source == "regression") {
    defed::RegressionParams params;
    params.n_samples = static_cast<int>(n);
    params.lo = config.get_double("data.lo", params.lo);
    params.hi = config.get_double("data.hi", params.hi);
    params.noise_std = config.get_double("data.noise_std", params.noise_std);
    params.feature_powers = config.get_int_list("data.feature_powers", params.feature_powers);
    return defed::generate_regression(params, seed);
  }
  if (source == "classification") {
    defed::ClassificationParams params;
    params.n_samples = static_cast<int>(n);
    params.dim = static_cast<int>(config.get_long("data.dim", params.dim));
    params.margin = config.get_double("data.margin", params.margin);
    return defed::generate_classification(params, seed);
  }
  throw std::invalid_argument("data.test_samples needs a synthetic data.source");
}

Experiment build_experiment(const defed::Config& config, const GlobalFlags& flags) {
  Experiment exp;
  exp.config = config;

  const std::vector<std::string> unknown = config.unknown_keys(kKnownKeys);
  if (!unknown.empty()) {
    std::string message = "unknown config keys:";
    for (const std::string& key : unknown) message += " " + key;
    throw defed::ConfigError(message);
  }

  exp.objective.kind = defed::kind_from_name(config.get_string("objective.kind", "ridge"));
  exp.objective.reg = config.get_double("objective.reg", 0.1);
  if (exp.objective.reg < 0) throw std::invalid_argument("objective.reg must be >= 0");

  const int n_clients = static_cast<int>(config.get_long("topology.clients", 10));
  if (n_clients < 2) throw std::invalid_argument("topology.clients must be >= 2");

  const defed::Dataset data = build_dataset(config);
  defed::check_dataset(exp.objective, data);
  const uint64_t partition_seed =
      static_cast<uint64_t>(config.get_long("data.partition_seed", 2));
  defed::Partition partition = defed::partition_uniform(data, n_clients, partition_seed);
  exp.shards = std::move(partition.shards);
  exp.train_eval = data;
  exp.test_eval = build_test_set(config);

  exp.run.algorithm =
      defed::algorithm_from_name(config.get_string("algorithm", "defed"));
  if (exp.run.algorithm == defed::Algorithm::defed) {
    const std::string kind = config.get_string("topology.kind", "regular");
    if (kind == "regular") {
      const int degree = static_cast<int>(config.get_long("topology.degree", 2));
      exp.mixing = defed::build_regular_graph(n_clients, degree);
    } else if (kind == "complete") {
      exp.mixing = defed::build_complete_graph(n_clients);
    } else if (kind == "file") {
      exp.mixing = defed::load_matrix(config.require_string("topology.file"));
      if (exp.mixing->size() != n_clients) {
        throw std::invalid_argument("topology.file matrix is " +
                                    std::to_string(exp.mixing->size()) + "x" +
                                    std::to_string(exp.mixing->size()) + " but topology.clients = " +
                                    std::to_string(n_clients));
      }
    } else {
      throw std::invalid_argument("unknown topology.kind '" + kind +
                                  "' (expected regular, complete or file)");
    }
    exp.lambda = exp.mixing->lambda();
  }

  exp.constants = defed::constants(exp.objective, exp.shards);

  const std::string schedule_kind = config.get_string("schedule.kind", "fixed");
  if (schedule_kind == "fixed") {
    exp.schedule.kind = defed::ScheduleKind::fixed;
    exp.schedule.eta = config.get_double("schedule.eta", 0.1);
    if (exp.schedule.eta <= 0) throw std::invalid_argument("schedule.eta must be > 0");
  } else if (schedule_kind == "diminishing") {
    exp.schedule.kind = defed::ScheduleKind::diminishing;
    exp.schedule.delta = config.require_double("schedule.delta");
    exp.schedule.gamma = config.require_double("schedule.gamma");
    if (exp.schedule.delta <= 0 || exp.schedule.gamma <= 0) {
      throw std::invalid_argument("schedule.delta and schedule.gamma must be > 0");
    }
  } else {
    throw std::invalid_argument("unknown schedule.kind '" + schedule_kind +
                                "' (expected fixed or diminishing)");
  }
  exp.run.schedule = exp.schedule;
  exp.validation =
      defed::validate_schedule(exp.schedule, exp.constants, data.size(), exp.lambda);

  exp.run.rounds = config.get_long("run.rounds", 1000);
  if (exp.run.rounds < 1) throw std::invalid_argument("run.rounds must be >= 1");
  exp.run.batch_size = static_cast<int>(config.get_long("run.batch_size", 64));
  if (exp.run.batch_size < 0) throw std::invalid_argument("run.batch_size must be >= 0");
  exp.run.participation = config.get_double("run.participation", 1.0);
  if (exp.run.participation <= 0 || exp.run.participation > 1) {
    throw std::invalid_argument("run.participation must lie in (0, 1]");
  }
  exp.run.master_seed =
      flags.seed.value_or(static_cast<uint64_t>(config.get_long("run.seed", 1)));
  exp.run.log_every = config.get_long("run.log_every", 1);
  if (exp.run.log_every < 1) throw std::invalid_argument("run.log_every must be >= 1");
  const std::string init = config.get_string("run.init", "zeros");
  if (init == "zeros") {
    exp.run.init = defed::InitKind::zeros;
  } else if (init == "random") {
    exp.run.init = defed::InitKind::random;
  } else {
    throw std::invalid_argument("unknown run.init '" + init + "' (expected zeros or random)");
  }
  exp.run.init_scale = config.get_double("run.init_scale", 1.0);
  exp.run.scale_step = config.get_bool("run.scale_step", false);
  exp.run.threads = flags.threads;

  if (config.get_bool("analysis.oracle", true)) {
    exp.optimum = exp.objective.kind == defed::ObjectiveKind::ridge
                      ? defed::optimum_ridge(exp.objective, exp.shards)
                      : defed::optimum_numeric(exp.objective, exp.shards, 1e-9);
  }
  exp.bound_check = config.get_bool("analysis.bound_check", false);
  exp.proof_variant = config.get_bool("analysis.proof_variant", false);
  exp.sigma_draws = static_cast<int>(config.get_long("analysis.sigma_draws", 1000));
  exp.sigma_batch =
      static_cast<int>(config.get_long("analysis.sigma_batch", exp.run.batch_size));
  if (exp.bound_check && !exp.optimum) {
    throw std::invalid_argument("analysis.bound_check needs analysis.oracle = true");
  }
  return exp;
}

/* Mean initial consensus error and mean squared distance of the initial
 * average from w*, over the per-repetition initial points the run will
 * actually use. */
void initial_moments(const Experiment& exp, int n_seeds, double* init_consensus,
                     double* init_dist) {
  const Eigen::Index dim = exp.shards.front().dim();
  const int n = static_cast<int>(exp.shards.size());
  if (exp.run.init == defed::InitKind::zeros) {
    *init_consensus = 0.0;
    *init_dist = exp.optimum ? exp.optimum->squaredNorm() : 0.0;
    return;
  }
  double consensus = 0, dist = 0;
  for (int rep = 0; rep < n_seeds; ++rep) {
    const uint64_t rep_seed = defed::derive_stream(exp.run.master_seed,
                                                   static_cast<uint64_t>(rep), 0,
                                                   defed::kStreamSeed);
    Eigen::MatrixXd inits(dim, n);
    for (int k = 0; k < n; ++k) {
      defed::Rng rng(defed::derive_stream(rep_seed, static_cast<uint64_t>(k), 0,
                                          defed::kStreamInit));
      for (Eigen::Index j = 0; j < dim; ++j) {
        inits(j, k) = exp.run.init_scale * rng.next_normal();
      }
    }
    const Eigen::VectorXd mean = inits.rowwise().mean();
    for (int k = 0; k < n; ++k) consensus += (inits.col(k) - mean).squaredNorm();
    if (exp.optimum) dist += (mean - *exp.optimum).squaredNorm();
  }
  *init_consensus = consensus / n_seeds;
  *init_dist = exp.optimum ? dist / n_seeds : 0.0;
}

json check_to_json(const defed::ConditionCheck& check) {
  return json{{"pass", check.pass}, {"value", check.lhs}, {"threshold", check.rhs}};
}

json validation_to_json(const defed::ScheduleValidation& v) {
  json out;
  out["ok"] = v.ok;
  if (v.kind == defed::ScheduleKind::fixed) {
    out["kind"] = "fixed";
    out["eta_below_inverse_smoothness"] = check_to_json(v.eta_bound);
  } else {
    out["kind"] = "diminishing";
    out["delta_above_samples_over_mu"] = check_to_json(v.delta_over_mu);
    out["gamma_contraction"] = check_to_json(v.gamma_contraction);
    out["initial_step_below_half_inverse_smoothness"] = check_to_json(v.step_bound);
  }
  return out;
}

json fit_to_json_or_null(const defed::RunTrace& trace, const std::string& metric, double t_lo,
                         double t_hi) {
  try {
    const defed::RateFit fit = defed::fit_rate(trace, metric, t_lo, t_hi);
    return json{{"slope", fit.slope},
                {"intercept", fit.intercept},
                {"r_squared", fit.r_squared},
                {"n_points", fit.n_points}};
  } catch (const std::exception&) {
    return json();  // null: not enough usable points
  }
}

struct RunOutputs {
  defed::RunTrace mean;
  json summary;
};

RunOutputs execute(Experiment& exp, int n_seeds, const GlobalFlags& flags) {
  defed::RunContext context;
  context.objective = exp.objective;
  context.shards = &exp.shards;
  context.mixing = exp.mixing ? &*exp.mixing : nullptr;
  context.train_eval = &exp.train_eval;
  context.test_eval = exp.test_eval ? &*exp.test_eval : nullptr;
  context.optimum = exp.optimum ? &*exp.optimum : nullptr;

  json summary;
  summary["algorithm"] = defed::algorithm_name(exp.run.algorithm);
  summary["n_clients"] = static_cast<int>(exp.shards.size());
  summary["rounds"] = exp.run.rounds;
  summary["n_seeds"] = n_seeds;
  summary["master_seed"] = exp.run.master_seed;
  summary["total_samples"] = exp.train_eval.size();
  summary["smoothness"] = exp.constants.smoothness;
  summary["strong_convexity"] = exp.constants.strong_convexity;
  if (exp.mixing) summary["lambda"] = exp.lambda;
  summary["schedule_validation"] = validation_to_json(exp.validation);

  if (!exp.validation.ok && !flags.quiet) {
    std::cerr << "warning: schedule fails the admissibility conditions; running anyway\n"
              << exp.validation.summary();
  }

  std::optional<defed::BoundConstants> bound_constants;
  if (exp.bound_check) {
    const defed::NoiseEstimates noise = defed::estimate_sigma_chi(
        exp.objective, exp.shards, *exp.optimum, exp.sigma_batch, exp.sigma_draws,
        exp.run.master_seed);
    const defed::HeterogeneityGaps gaps =
        defed::heterogeneity_gaps(exp.objective, exp.shards, *exp.optimum);
    defed::BoundInputs inputs;
    inputs.delta = exp.schedule.delta;
    inputs.gamma = exp.schedule.gamma;
    inputs.lambda = exp.lambda;
    inputs.total_samples = exp.train_eval.size();
    inputs.smoothness = exp.constants.smoothness;
    inputs.strong_convexity = exp.constants.strong_convexity;
    inputs.sigma_sq = noise.sigma_sq;
    inputs.chi_sq = noise.chi_sq;
    inputs.epsilon = gaps.epsilon;
    inputs.n_clients = static_cast<int>(exp.shards.size());
    inputs.proof_variant = exp.proof_variant;
    initial_moments(exp, n_seeds, &inputs.init_consensus, &inputs.init_dist);
    bound_constants = defed::bound_constants(inputs);

    summary["noise"] = {{"sigma_sq", noise.sigma_sq},
                        {"chi_sq", noise.chi_sq},
                        {"draws", exp.sigma_draws},
                        {"batch_size", exp.sigma_batch}};
    summary["heterogeneity"] = {{"epsilon", gaps.epsilon}, {"varsigma", gaps.varsigma}};
    json constants_json;
    constants_json["defined"] = bound_constants->defined;
    if (bound_constants->defined) {
      constants_json["zeta"] = bound_constants->zeta;
      constants_json["zeta_tilde"] = bound_constants->zeta_tilde;
      constants_json["gamma"] = bound_constants->gamma;
    } else {
      constants_json["why_undefined"] = bound_constants->why_undefined;
    }
    summary["bound_constants"] = constants_json;
    if (bound_constants->defined && exp.schedule.kind == defed::ScheduleKind::diminishing) {
      const defed::BoundConstants bc = *bound_constants;
      context.bound_envelope = [bc](long t) { return bc.iterate_envelope(t); };
    }
  }

  const std::vector<defed::RunTrace> traces = defed::run_seeds(exp.run, context, n_seeds);
  RunOutputs out;
  out.mean = defed::mean_trace(traces);

  const defed::TraceRow& last = out.mean.rows.back();
  summary["final"] = {{"t", last.t},
                      {"consensus_error", last.consensus_error},
                      {"dist_to_opt", last.dist_to_opt},
                      {"loss_mean_iterate", last.loss_mean_iterate},
                      {"train_metric", last.train_metric},
                      {"test_metric", last.test_metric}};

  const double t_hi = static_cast<double>(exp.run.rounds);
  const double t_lo = std::max(1.0, t_hi / 100.0);
  summary["rate_fits"] = {
      {"window", {t_lo, t_hi}},
      {"dist_to_opt", fit_to_json_or_null(out.mean, "dist_to_opt", t_lo, t_hi)},
      {"consensus_error", fit_to_json_or_null(out.mean, "consensus_error", t_lo, t_hi)},
  };

  if (bound_constants) {
    defed::BoundCheckParams params;
    params.kind = defed::BoundKind::envelope;
    params.constants = *bound_constants;
    params.check_consensus = true;
    const defed::BoundCheck check = defed::check_bound(out.mean, params);
    summary["bound_check"] = json::parse(check.to_json());
  }
  out.summary = summary;
  return out;
}

void write_outputs(const fs::path& out_dir, const Experiment& exp, const RunOutputs& outputs) {
  fs::create_directories(out_dir);
  defed::write_trace_csv((out_dir / "trace.csv").string(), outputs.mean);
  std::ofstream summary(out_dir / "summary.json", std::ios::binary);
  if (!summary) throw std::runtime_error("cannot write " + (out_dir / "summary.json").string());
  summary << outputs.summary.dump(2) << "\n";
  std::ofstream echo(out_dir / "config_echo.txt", std::ios::binary);
  if (!echo) throw std::runtime_error("cannot write " + (out_dir / "config_echo.txt").string());
  echo << exp.config.echo();
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const GlobalFlags& flags) {
  const defed::Config config = defed::Config::parse_file(config_path);
  Experiment exp = build_experiment(config, flags);
  const int n_seeds = static_cast<int>(config.get_long("run.n_seeds", 1));
  if (n_seeds < 1) throw std::invalid_argument("run.n_seeds must be >= 1");
  const RunOutputs outputs = execute(exp, n_seeds, flags);
  write_outputs(out_dir, exp, outputs);
  if (!flags.quiet) {
    const defed::TraceRow& last = outputs.mean.rows.back();
    std::cout << "run finished: t=" << last.t << " loss=" << last.loss_mean_iterate
              << " train_metric=" << last.train_metric << "\n"
              << "outputs in " << out_dir << "\n";
  }
  return 0;
}

int cmd_compare(const std::string& config_a, const std::string& config_b,
                const std::string& out_dir, const GlobalFlags& flags) {
  const defed::Config a = defed::Config::parse_file(config_a);
  const defed::Config b = defed::Config::parse_file(config_b);

  // The two runs must describe the same learning problem: only the algorithm
  // and the communication topology may differ.
  std::set<std::string> keys;
  for (const auto& [key, value] : a.entries()) keys.insert(key);
  for (const auto& [key, value] : b.entries()) keys.insert(key);
  for (const std::string& key : keys) {
    const bool comparable = key == "algorithm" || key.rfind("topology.", 0) == 0 ||
                            key == "run.participation";
    if (comparable) continue;
    if (!a.has(key) || !b.has(key) ||
        a.get_string(key, "") != b.get_string(key, "")) {
      throw std::invalid_argument("configs disagree on '" + key +
                                  "'; only algorithm/topology keys may differ");
    }
  }

  GlobalFlags sub = flags;
  Experiment exp_a = build_experiment(a, sub);
  Experiment exp_b = build_experiment(b, sub);
  const int n_seeds = static_cast<int>(a.get_long("run.n_seeds", 1));
  const RunOutputs out_a = execute(exp_a, n_seeds, flags);
  const RunOutputs out_b = execute(exp_b, n_seeds, flags);
  const fs::path dir(out_dir);
  write_outputs(dir / "a", exp_a, out_a);
  write_outputs(dir / "b", exp_b, out_b);

  if (out_a.mean.rows.size() != out_b.mean.rows.size()) {
    throw std::runtime_error("compare: traces have different numbers of logged rounds");
  }
  std::ofstream joint(dir / "joint.csv", std::ios::binary);
  if (!joint) throw std::runtime_error("cannot write " + (dir / "joint.csv").string());
  joint << "t,a_consensus_error,a_dist_to_opt,a_loss_mean_iterate,a_train_metric,a_test_metric,"
           "b_consensus_error,b_dist_to_opt,b_loss_mean_iterate,b_train_metric,b_test_metric\n";
  char buffer[48];
  const auto put = [&](double v, bool last) {
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    joint << buffer << (last ? "\n" : ",");
  };
  for (size_t i = 0; i < out_a.mean.rows.size(); ++i) {
    const defed::TraceRow& ra = out_a.mean.rows[i];
    const defed::TraceRow& rb = out_b.mean.rows[i];
    if (ra.t != rb.t) throw std::runtime_error("compare: traces log different rounds");
    joint << ra.t << ",";
    put(ra.consensus_error, false);
    put(ra.dist_to_opt, false);
    put(ra.loss_mean_iterate, false);
    put(ra.train_metric, false);
    put(ra.test_metric, false);
    put(rb.consensus_error, false);
    put(rb.dist_to_opt, false);
    put(rb.loss_mean_iterate, false);
    put(rb.train_metric, false);
    put(rb.test_metric, true);
  }
  joint.close();

  const defed::TraceRow& fa = out_a.mean.rows.back();
  const defed::TraceRow& fb = out_b.mean.rows.back();
  json delta;
  delta["final_t"] = fa.t;
  delta["a"] = {{"algorithm", out_a.mean.algorithm},
                {"train_metric", fa.train_metric},
                {"test_metric", fa.test_metric},
                {"loss_mean_iterate", fa.loss_mean_iterate}};
  delta["b"] = {{"algorithm", out_b.mean.algorithm},
                {"train_metric", fb.train_metric},
                {"test_metric", fb.test_metric},
                {"loss_mean_iterate", fb.loss_mean_iterate}};
  delta["a_minus_b"] = {{"train_metric", fa.train_metric - fb.train_metric},
                        {"test_metric", fa.test_metric - fb.test_metric},
                        {"loss_mean_iterate", fa.loss_mean_iterate - fb.loss_mean_iterate},
                        {"dist_to_opt", fa.dist_to_opt - fb.dist_to_opt}};
  delta["abs_train_metric_gap"] = std::abs(fa.train_metric - fb.train_metric);
  std::ofstream delta_file(dir / "delta.json", std::ios::binary);
  if (!delta_file) throw std::runtime_error("cannot write " + (dir / "delta.json").string());
  delta_file << delta.dump(2) << "\n";

  if (!flags.quiet) {
    std::cout << "compare finished: |train metric gap| = "
              << std::abs(fa.train_metric - fb.train_metric) << "\n"
              << "outputs in " << out_dir << "\n";
  }
  return 0;
}

int cmd_graph(int n_clients, int degree, bool complete, const std::string& file,
              const std::string& svg_path, const GlobalFlags& flags) {
  Eigen::MatrixXd weights;
  if (!file.empty()) {
    const defed::MixingMatrix mixing = defed::load_matrix(file);
    weights = mixing.weights();
  } else if (complete) {
    weights = defed::build_complete_graph(n_clients).weights();
  } else {
    weights = defed::build_regular_graph(n_clients, degree).weights();
  }
  const defed::TopologyReport report = defed::validate(weights, defed::kLoadedTol);
  std::cout << report.to_string() << "\n";
  if (!report.ok()) {
    std::cerr << "error: matrix fails topology validation\n";
    return 1;
  }
  std::cout << "lambda = " << defed::spectral_norm(weights) << "\n";
  if (!svg_path.empty()) {
    defed::write_graph(svg_path, weights);
    if (!flags.quiet) std::cout << "wrote " << svg_path << "\n";
  }
  return 0;
}

int cmd_plot(const std::vector<std::string>& trace_paths, const std::string& metric,
             const std::string& out_svg, bool loglog, const GlobalFlags& flags) {
  const std::set<std::string> metrics = {"eta",           "consensus_error", "dist_to_opt",
                                         "loss_mean_iterate", "train_metric", "test_metric",
                                         "bound_value"};
  if (!metrics.count(metric)) {
    std::string names;
    for (const std::string& name : metrics) names += " " + name;
    throw std::invalid_argument("unknown metric '" + metric + "'; available:" + names);
  }
  std::vector<defed::Series> series;
  for (const std::string& path : trace_paths) {
    const defed::RunTrace trace = defed::read_trace_csv(path);
    defed::Series s;
    s.label = fs::path(path).stem().string();
    for (const defed::TraceRow& row : trace.rows) {
      s.x.push_back(static_cast<double>(row.t));
      double y = 0;
      if (metric == "eta") y = row.eta;
      else if (metric == "consensus_error") y = row.consensus_error;
      else if (metric == "dist_to_opt") y = row.dist_to_opt;
      else if (metric == "loss_mean_iterate") y = row.loss_mean_iterate;
      else if (metric == "train_metric") y = row.train_metric;
      else if (metric == "test_metric") y = row.test_metric;
      else y = row.bound_value;
      s.y.push_back(y);
    }
    series.push_back(std::move(s));
  }
  defed::ChartOptions options;
  options.title = metric;
  options.y_label = metric;
  options.log_x = loglog;
  options.log_y = loglog;
  defed::write_line_chart(out_svg, series, options);
  if (!flags.quiet) std::cout << "wrote " << out_svg << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized and federated learning simulator"};
  app.require_subcommand(1);
  GlobalFlags flags;
  std::optional<uint64_t> seed_flag;
  app.add_option("--seed", seed_flag, "Master seed override");
  app.add_option("--threads", flags.threads, "Worker threads (results are thread-count invariant)")
      ->check(CLI::Range(1, 256));
  app.add_flag("--quiet", flags.quiet, "Suppress informational output");

  std::string config_path, out_dir = "out";
  CLI::App* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--out", out_dir, "Output directory");

  std::string config_a, config_b, compare_out = "compare_out";
  CLI::App* compare = app.add_subcommand("compare", "Run two configs on the same problem");
  compare->add_option("--config-a", config_a, "First config")->required();
  compare->add_option("--config-b", config_b, "Second config")->required();
  compare->add_option("--out", compare_out, "Output directory");

  int n_clients = 10, degree = 2;
  bool complete = false;
  std::string graph_file, graph_svg;
  CLI::App* graph = app.add_subcommand("graph", "Validate and describe a topology");
  graph->add_option("--clients", n_clients, "Client count");
  graph->add_option("--degree", degree, "Neighbor count (regular graph)");
  graph->add_flag("--complete", complete, "Use the complete graph");
  graph->add_option("--file", graph_file, "Load the matrix from a CSV file");
  graph->add_option("--svg", graph_svg, "Write an SVG rendering here");

  std::vector<std::string> traces;
  std::string metric = "train_metric", plot_out = "plot.svg";
  bool loglog = false;
  CLI::App* plot = app.add_subcommand("plot", "Plot metric curves from trace CSVs");
  plot->add_option("traces", traces, "Trace CSV files")->required();
  plot->add_option("--metric", metric, "Metric column to plot");
  plot->add_option("--out", plot_out, "Output SVG path");
  plot->add_flag("--loglog", loglog, "Log-log axes");

  CLI11_PARSE(app, argc, argv);
  flags.seed = seed_flag;

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, flags);
    if (compare->parsed()) return cmd_compare(config_a, config_b, compare_out, flags);
    if (graph->parsed()) {
      return cmd_graph(n_clients, degree, complete, graph_file, graph_svg, flags);
    }
    if (plot->parsed()) return cmd_plot(traces, metric, plot_out, loglog, flags);
  } catch (const defed::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const defed::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const defed::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
