#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "defed/analysis.hpp"
#include "defed/data.hpp"
#include "defed/engine.hpp"
#include "defed/topology.hpp"

using namespace defed;

namespace {

struct SmallProblem {
  std::vector<Dataset> shards;
  MixingMatrix mixing = build_regular_graph(4, 2);
  Objective objective{ObjectiveKind::ridge, 0.1};
  ConvexityConstants constants;
  Eigen::VectorXd optimum;
  Schedule schedule;  // admissible diminishing schedule for this instance
};

/* A 4-client ridge instance small enough (40 samples) that an admissible
 * diminishing schedule has a transient short enough to watch the asymptotic
 * decay rates directly. */
SmallProblem make_problem() {
  SmallProblem p;
  RegressionParams params;
  params.n_samples = 40;
  const Dataset data = generate_regression(params, 201);
  Partition partition = partition_uniform(data, 4, 7);
  p.shards = partition.shards;
  p.constants = constants(p.objective, p.shards);
  p.optimum = optimum_ridge(p.objective, p.shards);

  const double total = 40;
  p.schedule.kind = ScheduleKind::diminishing;
  p.schedule.delta = 1.05 * total / p.constants.strong_convexity;
  p.schedule.gamma = 2.05 * p.constants.smoothness * p.schedule.delta;
  return p;
}

}  // namespace

TEST_CASE("admissible schedule shows the expected asymptotic decay rates") {
  SmallProblem p = make_problem();
  const ScheduleValidation validation =
      validate_schedule(p.schedule, p.constants, 40, p.mixing.lambda());
  REQUIRE(validation.ok);

  RunConfig config;
  config.schedule = p.schedule;
  config.batch_size = 2;
  config.init = InitKind::random;
  config.init_scale = 1.0;
  config.master_seed = 11;
  config.rounds = static_cast<long>(100 * p.schedule.gamma);
  config.log_every = 2;
  config.threads = 4;

  RunContext context;
  context.objective = p.objective;
  context.shards = &p.shards;
  context.mixing = &p.mixing;
  context.optimum = &p.optimum;

  const RunTrace mean = expected_trace(config, context, 10);
  const double t_min = 5 * p.schedule.gamma;
  const double t_max = static_cast<double>(config.rounds);
  const RateFit dist_fit = fit_rate(mean, "dist_to_opt", t_min, t_max);
  const RateFit consensus_fit = fit_rate(mean, "consensus_error", t_min, t_max);

  // Past the transient the squared distance decays like 1/t and the
  // consensus error like 1/t^2.
  CHECK(dist_fit.slope > -1.3);
  CHECK(dist_fit.slope < -0.8);
  CHECK(consensus_fit.slope > -2.4);
  CHECK(consensus_fit.slope < -1.6);
}

TEST_CASE("measured mean trace stays under the certified envelopes") {
  SmallProblem p = make_problem();
  REQUIRE(validate_schedule(p.schedule, p.constants, 40, p.mixing.lambda()).ok);

  const NoiseEstimates noise = estimate_sigma_chi(p.objective, p.shards, p.optimum, 2, 2000, 5);
  const HeterogeneityGaps gaps = heterogeneity_gaps(p.objective, p.shards, p.optimum);

  BoundInputs inputs;
  inputs.delta = p.schedule.delta;
  inputs.gamma = p.schedule.gamma;
  inputs.lambda = p.mixing.lambda();
  inputs.total_samples = 40;
  inputs.smoothness = p.constants.smoothness;
  inputs.strong_convexity = p.constants.strong_convexity;
  inputs.sigma_sq = noise.sigma_sq;
  inputs.chi_sq = noise.chi_sq;
  inputs.epsilon = gaps.epsilon;
  inputs.init_consensus = 0.0;  // zeros init: all clients agree at round 0
  inputs.init_dist = p.optimum.squaredNorm();
  inputs.n_clients = 4;
  const BoundConstants bounds = bound_constants(inputs);
  REQUIRE(bounds.defined);

  RunConfig config;
  config.schedule = p.schedule;
  config.batch_size = 2;
  config.init = InitKind::zeros;
  config.master_seed = 31;
  config.rounds = 2000;
  config.log_every = 10;
  config.threads = 4;

  RunContext context;
  context.objective = p.objective;
  context.shards = &p.shards;
  context.mixing = &p.mixing;
  context.optimum = &p.optimum;
  context.bound_envelope = [&bounds](long t) { return bounds.iterate_envelope(t); };

  const RunTrace mean = expected_trace(config, context, 20);
  BoundCheckParams params;
  params.constants = bounds;
  params.check_consensus = true;
  const BoundCheck check = check_bound(mean, params);
  CHECK(check.pass);
  CHECK(check.rounds_checked == 2 * static_cast<long>(mean.rows.size()));
  CHECK(check.violations == 0);

  // The logged envelope column matches the certified envelope.
  for (const TraceRow& row : mean.rows) {
    CHECK(row.bound_value == doctest::Approx(bounds.iterate_envelope(row.t)).epsilon(1e-12));
  }
}

TEST_CASE("identical shards under a fixed rate contract geometrically") {
  // All clients hold the same data, so the run is plain gradient descent on
  // the global objective once the applied step is rescaled by K; the loss
  // gap must contract at least as fast as (1 - mu eta) per round.
  RegressionParams params;
  params.n_samples = 20;
  const Dataset data = generate_regression(params, 211);
  const std::vector<Dataset> shards(3, data);
  const MixingMatrix mixing = build_complete_graph(3);
  const Objective objective{ObjectiveKind::ridge, 0.1};
  const ConvexityConstants consts = constants(objective, shards);
  const Eigen::VectorXd w_star = optimum_ridge(objective, shards);
  const double f_star = global_loss(objective, shards, w_star);
  const double eta = 0.5 / consts.smoothness;

  RunConfig config;
  config.schedule.kind = ScheduleKind::fixed;
  config.schedule.eta = eta;
  config.batch_size = 0;
  config.scale_step = true;
  config.rounds = 100;

  RunContext context;
  context.objective = objective;
  context.shards = &shards;
  context.mixing = &mixing;
  context.optimum = &w_star;

  const RunTrace trace = run(config, context);
  const double factor = 1 - consts.strong_convexity * eta + 0.05;
  for (size_t i = 1; i < trace.rows.size(); ++i) {
    const double prev = trace.rows[i - 1].loss_mean_iterate - f_star;
    const double cur = trace.rows[i].loss_mean_iterate - f_star;
    if (prev < 1e-14) break;  // numerically at the optimum
    CHECK(cur / prev <= factor);
    CHECK(trace.rows[i].consensus_error < 1e-20);  // exact agreement persists
  }

  BoundCheckParams props;
  props.kind = BoundKind::contraction;
  props.eta = eta;
  props.smoothness = consts.smoothness;
  props.strong_convexity = consts.strong_convexity;
  props.sigma_sq = 0;
  props.varsigma = 0;
  props.optimum_value = f_star;
  props.slack = 1e-9;
  CHECK(check_bound(trace, props).pass);
}
