#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "defed/analysis.hpp"
#include "defed/data.hpp"
#include "defed/engine.hpp"
#include "defed/rng.hpp"
#include "defed/topology.hpp"
#include "defed/trace.hpp"

using namespace defed;

namespace {

Dataset one_sample(double a, double b) {
  Dataset data;
  data.features = Eigen::MatrixXd::Constant(1, 1, a);
  data.labels = Eigen::VectorXd::Constant(1, b);
  return data;
}

std::vector<ClientState> zero_clients(int n, Eigen::Index dim,
                                      const std::vector<double>& weights) {
  std::vector<ClientState> clients(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    clients[static_cast<size_t>(k)].w = Eigen::VectorXd::Zero(dim);
    clients[static_cast<size_t>(k)].weight = weights[static_cast<size_t>(k)];
  }
  return clients;
}

/* Shards that share one feature matrix (equal sizes, distinct labels): all
 * clients then have the same quadratic curvature, which makes the mean
 * iterate follow centralized gradient descent exactly. */
std::vector<Dataset> common_curvature_shards(int n_clients, int rows_each, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd features(rows_each, 2);
  for (int i = 0; i < rows_each; ++i) {
    features(i, 0) = 1.0;
    features(i, 1) = rng.next_uniform(-3, 3);
  }
  std::vector<Dataset> shards(static_cast<size_t>(n_clients));
  for (int k = 0; k < n_clients; ++k) {
    shards[static_cast<size_t>(k)].features = features;
    shards[static_cast<size_t>(k)].labels.resize(rows_each);
    for (int i = 0; i < rows_each; ++i) {
      shards[static_cast<size_t>(k)].labels[i] = rng.next_normal();
    }
  }
  return shards;
}

}  // namespace

TEST_CASE("hand-computed two-client decentralized round") {
  // Complete graph, squared error, reg 0, eta 1: client 1 holds (a=1,b=1),
  // client 2 holds (a=1,b=0), both start at 0.
  const std::vector<Dataset> shards = {one_sample(1, 1), one_sample(1, 0)};
  const MixingMatrix mixing = build_complete_graph(2);
  std::vector<ClientState> clients = zero_clients(2, 1, {0.5, 0.5});

  // grad F_1(0) = -1 so the weighted applied term is -0.5;
  // w_1' = mix(0,0) + 0.5 = 0.5, w_2' = 0.
  defed_round(clients, mixing, {ObjectiveKind::ridge, 0.0}, shards, 1.0, 0, 1, 0);
  CHECK(clients[0].w[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(clients[1].w[0] == doctest::Approx(0.0).epsilon(1e-15));

  // Step scaling by K doubles the applied term: w_1' would be 1.0.
  std::vector<ClientState> scaled = zero_clients(2, 1, {0.5, 0.5});
  defed_round(scaled, mixing, {ObjectiveKind::ridge, 0.0}, shards, 1.0, 0, 1, 0, true);
  CHECK(scaled[0].w[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("hand-computed two-client server round shows the 1/K rate gap") {
  const std::vector<Dataset> shards = {one_sample(1, 1), one_sample(1, 0)};
  std::vector<ClientState> clients = zero_clients(2, 1, {0.5, 0.5});
  Eigen::VectorXd global = Eigen::VectorXd::Zero(1);

  // Full participation: w_1' = 0 - 1*(-1) = 1, w_2' = 0, global = 0.5 —
  // double the round mean the decentralized rule produces (0.25).
  fedavg_round(clients, global, {ObjectiveKind::ridge, 0.0}, shards, 1.0, 0, 1.0, 1, 0);
  CHECK(global[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(clients[0].w[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(clients[1].w[0] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("zero step size is pure gossip") {
  const MixingMatrix complete = build_complete_graph(4);
  const std::vector<Dataset> shards = {one_sample(1, 1), one_sample(1, 2), one_sample(1, 3),
                                       one_sample(1, 4)};
  std::vector<ClientState> clients = zero_clients(4, 1, {0.25, 0.25, 0.25, 0.25});
  for (int k = 0; k < 4; ++k) clients[static_cast<size_t>(k)].w[0] = k;  // 0,1,2,3
  defed_round(clients, complete, {ObjectiveKind::ridge, 0.0}, shards, 0.0, 0, 1, 0);
  for (int k = 0; k < 4; ++k) {
    CHECK(clients[static_cast<size_t>(k)].w[0] == doctest::Approx(1.5).epsilon(1e-15));
  }
}

TEST_CASE("gossip contracts consensus error by at least lambda squared") {
  const MixingMatrix ring = build_regular_graph(8, 2);
  const double factor = ring.lambda() * ring.lambda();
  std::vector<Dataset> shards;
  std::vector<double> weights(8, 1.0 / 8);
  for (int k = 0; k < 8; ++k) shards.push_back(one_sample(1, 0));
  std::vector<ClientState> clients = zero_clients(8, 1, weights);
  Rng rng(5);
  for (int k = 0; k < 8; ++k) clients[static_cast<size_t>(k)].w[0] = rng.next_normal();

  for (int t = 0; t < 20; ++t) {
    double mean = 0;
    for (const ClientState& c : clients) mean += c.w[0] / 8;
    double before = 0;
    for (const ClientState& c : clients) before += (c.w[0] - mean) * (c.w[0] - mean);
    defed_round(clients, ring, {ObjectiveKind::ridge, 0.0}, shards, 0.0, 0, 1, t);
    mean = 0;
    for (const ClientState& c : clients) mean += c.w[0] / 8;
    double after = 0;
    for (const ClientState& c : clients) after += (c.w[0] - mean) * (c.w[0] - mean);
    CHECK(after <= factor * before + 1e-9);
  }
}

TEST_CASE("average iterate follows the logged gradient law") {
  // Ring of 4 with uneven shards and mini-batches; after every round
  // mean(t+1) = mean(t) - eta * (1/K) * sum_k applied_k, recomputed from the
  // observer's log, must hold to near machine precision.
  RegressionParams params;
  params.n_samples = 30;
  const Dataset data = generate_regression(params, 61);
  Partition partition = partition_uniform(data, 4, 9);
  const std::vector<double> weights = shard_weights(partition.shards);
  const MixingMatrix ring = build_regular_graph(4, 2);
  const Objective objective{ObjectiveKind::ridge, 0.1};

  std::vector<ClientState> clients(4);
  Rng rng(71);
  for (int k = 0; k < 4; ++k) {
    clients[static_cast<size_t>(k)].weight = weights[static_cast<size_t>(k)];
    clients[static_cast<size_t>(k)].w.resize(2);
    clients[static_cast<size_t>(k)].w << rng.next_normal(), rng.next_normal();
  }

  std::vector<Eigen::VectorXd> logged;
  const RoundObserver observer = [&](long, const std::vector<Eigen::VectorXd>& applied) {
    logged = applied;
  };
  const double eta = 0.05;
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd before = Eigen::VectorXd::Zero(2);
    for (const ClientState& c : clients) before += c.w / 4;
    defed_round(clients, ring, objective, partition.shards, eta, 3, 42, t, false, nullptr,
                observer);
    Eigen::VectorXd after = Eigen::VectorXd::Zero(2);
    for (const ClientState& c : clients) after += c.w / 4;
    Eigen::VectorXd applied_mean = Eigen::VectorXd::Zero(2);
    for (const Eigen::VectorXd& g : logged) applied_mean += g / 4;
    CHECK((after - (before - eta * applied_mean)).norm() < 1e-12);
  }
}

TEST_CASE("full participation reduces the server algorithm to centralized steps") {
  RegressionParams params;
  params.n_samples = 24;
  const Dataset data = generate_regression(params, 81);
  Partition partition = partition_uniform(data, 3, 4);
  const std::vector<double> weights = shard_weights(partition.shards);
  const Objective objective{ObjectiveKind::ridge, 0.1};

  std::vector<ClientState> clients = zero_clients(3, 2, weights);
  Eigen::VectorXd global = Eigen::VectorXd::Zero(2);
  std::vector<Eigen::VectorXd> logged;
  const RoundObserver observer = [&](long, const std::vector<Eigen::VectorXd>& applied) {
    logged = applied;
  };
  const double eta = 0.07;
  for (int t = 0; t < 40; ++t) {
    const Eigen::VectorXd before = global;
    fedavg_round(clients, global, objective, partition.shards, eta, 5, 1.0, 99, t, nullptr,
                 observer);
    Eigen::VectorXd weighted = Eigen::VectorXd::Zero(2);
    for (size_t k = 0; k < 3; ++k) weighted += weights[k] * logged[k];
    CHECK((global - (before - eta * weighted)).norm() < 1e-12);
  }

  // Full batch + full participation is exact centralized gradient descent.
  std::vector<ClientState> gd_clients = zero_clients(3, 2, weights);
  Eigen::VectorXd gd_global = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd oracle = Eigen::VectorXd::Zero(2);
  for (int t = 0; t < 40; ++t) {
    fedavg_round(gd_clients, gd_global, objective, partition.shards, eta, 0, 1.0, 99, t);
    oracle -= eta * global_gradient(objective, partition.shards, oracle);
    CHECK((gd_global - oracle).norm() < 1e-12);
  }
}

TEST_CASE("participation fraction controls the selected-client count") {
  RegressionParams params;
  params.n_samples = 40;
  params.noise_std = 0.0;
  const Dataset data = generate_regression(params, 91);
  Partition partition = partition_uniform(data, 10, 5);
  const std::vector<double> weights = shard_weights(partition.shards);
  const Objective objective{ObjectiveKind::ridge, 0.1};

  const auto count_active = [&](double participation) {
    std::vector<ClientState> clients = zero_clients(10, 2, weights);
    Eigen::VectorXd global = Eigen::VectorXd::Zero(2);
    int active = 0;
    const RoundObserver observer = [&](long, const std::vector<Eigen::VectorXd>& applied) {
      for (const Eigen::VectorXd& g : applied) {
        if (g.norm() > 0) ++active;
      }
    };
    fedavg_round(clients, global, objective, partition.shards, 0.1, 0, participation, 7, 0,
                 nullptr, observer);
    return active;
  };
  CHECK(count_active(0.5) == 5);   // N = floor(0.5 * 10)
  CHECK(count_active(1.0) == 10);
  CHECK(count_active(0.01) == 1);  // N = max(floor(0.1), 1)
}

TEST_CASE("unselected clients carry their local model") {
  const std::vector<Dataset> shards = {one_sample(1, 1), one_sample(1, 2)};
  std::vector<ClientState> clients = zero_clients(2, 1, {0.5, 0.5});
  clients[0].w[0] = 10;
  clients[1].w[0] = 20;
  Eigen::VectorXd global = Eigen::VectorXd::Constant(1, 15);
  fedavg_round(clients, global, {ObjectiveKind::ridge, 0.0}, shards, 0.0, 0, 0.5, 3, 0);
  // One client stepped from the broadcast model with eta=0 (now equals 15),
  // the other kept its value; the aggregate is their weighted mean.
  const bool first_selected = clients[0].w[0] == 15;
  CHECK((clients[first_selected ? 1 : 0].w[0] == (first_selected ? 20 : 10)));
  CHECK(global[0] == doctest::Approx(0.5 * clients[0].w[0] + 0.5 * clients[1].w[0]));
}

TEST_CASE("mean iterate on the complete graph tracks rescaled gradient descent") {
  // Shards with identical curvature: the decentralized mean with step eta
  // equals centralized descent with step eta/K on the global objective.
  const int n_clients = 5;
  const std::vector<Dataset> shards = common_curvature_shards(n_clients, 8, 101);
  const std::vector<double> weights = shard_weights(shards);
  const MixingMatrix complete = build_complete_graph(n_clients);
  const Objective objective{ObjectiveKind::ridge, 0.1};

  std::vector<ClientState> clients = zero_clients(n_clients, 2, weights);
  Eigen::VectorXd oracle = Eigen::VectorXd::Zero(2);
  const double eta = 0.2;
  for (int t = 0; t < 100; ++t) {
    defed_round(clients, complete, objective, shards, eta, 0, 1, t);
    oracle -= (eta / n_clients) * global_gradient(objective, shards, oracle);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
    for (const ClientState& c : clients) mean += c.w / n_clients;
    CHECK((mean - oracle).norm() < 1e-9);
  }
}

TEST_CASE("schedule values and validation") {
  Schedule diminishing;
  diminishing.kind = ScheduleKind::diminishing;
  diminishing.delta = 2;
  diminishing.gamma = 10;
  CHECK(diminishing.eta_at(0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(diminishing.eta_at(90) == doctest::Approx(0.02).epsilon(1e-15));
  Schedule fixed;
  fixed.eta = 0.3;
  CHECK(fixed.eta_at(0) == 0.3);
  CHECK(fixed.eta_at(1000) == 0.3);

  ConvexityConstants constants;
  constants.smoothness = 0.6;
  constants.strong_convexity = 0.6;

  SUBCASE("admissible diminishing schedule") {
    Schedule s;
    s.kind = ScheduleKind::diminishing;
    s.delta = 40;   // > m/mu = 20/0.6 = 33.3
    s.gamma = 200;  // 200/201 = 0.995 >= sqrt(1.64/2) = 0.906; 40/200 = 0.2 <= 1/1.2
    const ScheduleValidation v = validate_schedule(s, constants, 20, 0.8);
    CHECK(v.ok);
    CHECK(v.delta_over_mu.pass);
    CHECK(v.delta_over_mu.rhs == doctest::Approx(20 / 0.6).epsilon(1e-12));
    CHECK(v.gamma_contraction.pass);
    CHECK(v.gamma_contraction.rhs == doctest::Approx(std::sqrt(0.82)).epsilon(1e-12));
    CHECK(v.step_bound.pass);
    CHECK(v.summary().find("admissible") != std::string::npos);
  }
  SUBCASE("each condition can fail alone") {
    Schedule s;
    s.kind = ScheduleKind::diminishing;
    s.delta = 33;  // below m/mu
    s.gamma = 200;
    CHECK(!validate_schedule(s, constants, 20, 0.8).delta_over_mu.pass);
    s.delta = 40;
    s.gamma = 5;  // 5/6 < 0.906
    const ScheduleValidation v2 = validate_schedule(s, constants, 20, 0.8);
    CHECK(!v2.gamma_contraction.pass);
    s.gamma = 40;  // step 1.0 > 0.833
    CHECK(!validate_schedule(s, constants, 20, 0.8).step_bound.pass);
  }
  SUBCASE("fixed-rate bound") {
    Schedule s;
    s.eta = 0.1;
    CHECK(validate_schedule(s, constants, 20, 0.8).ok);  // 0.1 < 1/0.6
    s.eta = 2.0;
    const ScheduleValidation v = validate_schedule(s, constants, 20, 0.8);
    CHECK(!v.ok);
    CHECK(v.eta_bound.rhs == doctest::Approx(1 / 0.6).epsilon(1e-12));
  }
}

TEST_CASE("one-round run reproduces the hand-computed example") {
  const std::vector<Dataset> shards = {one_sample(1, 1), one_sample(1, 0)};
  const MixingMatrix complete = build_complete_graph(2);
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(1);

  RunConfig config;
  config.schedule.kind = ScheduleKind::fixed;
  config.schedule.eta = 1.0;
  config.rounds = 1;
  config.batch_size = 0;
  RunContext context;
  context.objective = {ObjectiveKind::ridge, 0.0};
  context.shards = &shards;
  context.mixing = &complete;
  context.optimum = &origin;

  const RunTrace trace = run(config, context);
  REQUIRE(trace.rows.size() == 2);
  CHECK(trace.rows[0].t == 0);
  CHECK(trace.rows[0].dist_to_opt == 0.0);
  // After the round: w = (0.5, 0), mean 0.25.
  CHECK(trace.rows[1].dist_to_opt == doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(trace.rows[1].consensus_error == doctest::Approx(0.125).epsilon(1e-12));

  config.algorithm = Algorithm::fedavg;
  context.mixing = nullptr;
  const RunTrace server = run(config, context);
  CHECK(server.rows[1].dist_to_opt == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("logging hits round zero, the stride, and the final round") {
  RegressionParams params;
  params.n_samples = 20;
  const Dataset data = generate_regression(params, 111);
  Partition partition = partition_uniform(data, 2, 1);
  const MixingMatrix complete = build_complete_graph(2);

  RunConfig config;
  config.rounds = 10;
  config.log_every = 3;
  config.batch_size = 4;
  RunContext context;
  context.objective = {ObjectiveKind::ridge, 0.1};
  context.shards = &partition.shards;
  context.mixing = &complete;
  const RunTrace trace = run(config, context);
  std::vector<long> logged;
  for (const TraceRow& row : trace.rows) logged.push_back(row.t);
  CHECK(logged == std::vector<long>{0, 3, 6, 9, 10});
}

TEST_CASE("identical configurations yield byte-identical traces at any thread count") {
  RegressionParams params;
  params.n_samples = 60;
  const Dataset data = generate_regression(params, 121);
  Partition partition = partition_uniform(data, 6, 2);
  const MixingMatrix ring = build_regular_graph(6, 2);

  RunConfig config;
  config.rounds = 30;
  config.batch_size = 4;
  config.init = InitKind::random;
  config.master_seed = 77;
  RunContext context;
  context.objective = {ObjectiveKind::ridge, 0.1};
  context.shards = &partition.shards;
  context.mixing = &ring;

  config.threads = 1;
  const RunTrace serial = expected_trace(config, context, 5);
  config.threads = 4;
  const RunTrace parallel = expected_trace(config, context, 5);
  CHECK(trace_csv_string(serial) == trace_csv_string(parallel));

  config.algorithm = Algorithm::fedavg;
  config.participation = 0.5;
  context.mixing = nullptr;
  config.threads = 1;
  const RunTrace server_serial = expected_trace(config, context, 5);
  config.threads = 4;
  const RunTrace server_parallel = expected_trace(config, context, 5);
  CHECK(trace_csv_string(server_serial) == trace_csv_string(server_parallel));
}

TEST_CASE("distinct repetition seeds explore distinct trajectories") {
  RegressionParams params;
  params.n_samples = 40;
  const Dataset data = generate_regression(params, 131);
  Partition partition = partition_uniform(data, 4, 3);
  const MixingMatrix ring = build_regular_graph(4, 2);

  RunConfig config;
  config.rounds = 10;
  config.batch_size = 2;
  RunContext context;
  context.objective = {ObjectiveKind::ridge, 0.1};
  context.shards = &partition.shards;
  context.mixing = &ring;
  const std::vector<RunTrace> traces = run_seeds(config, context, 3);
  REQUIRE(traces.size() == 3);
  CHECK(traces[0].rows.back().loss_mean_iterate != traces[1].rows.back().loss_mean_iterate);
  CHECK(traces[1].rows.back().loss_mean_iterate != traces[2].rows.back().loss_mean_iterate);
}

TEST_CASE("size mismatches are rejected") {
  const std::vector<Dataset> shards = {one_sample(1, 1), one_sample(1, 0)};
  const MixingMatrix wrong = build_complete_graph(3);
  std::vector<ClientState> clients = zero_clients(2, 1, {0.5, 0.5});
  CHECK_THROWS_AS(
      defed_round(clients, wrong, {ObjectiveKind::ridge, 0.0}, shards, 0.1, 0, 1, 0),
      std::invalid_argument);

  RunConfig config;
  RunContext context;
  context.objective = {ObjectiveKind::ridge, 0.0};
  context.shards = &shards;
  context.mixing = nullptr;
  CHECK_THROWS_AS(run(config, context), std::invalid_argument);  // missing mixing
}

TEST_CASE("algorithm names round-trip") {
  CHECK(algorithm_from_name(algorithm_name(Algorithm::defed)) == Algorithm::defed);
  CHECK(algorithm_from_name(algorithm_name(Algorithm::fedavg)) == Algorithm::fedavg);
  CHECK_THROWS_AS(algorithm_from_name("sgd"), std::invalid_argument);
}
