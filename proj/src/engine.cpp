#include "defed/engine.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "defed/analysis.hpp"
#include "defed/rng.hpp"

namespace defed {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void append_check(std::ostringstream& out, const char* name, const char* relation,
                  const ConditionCheck& check) {
  out << "  " << name << ": " << check.lhs << " " << relation << " " << check.rhs << " -> "
      << (check.pass ? "ok" : "VIOLATED") << "\n";
}

/* Mini-batch gradient for one client in one round.  batch_size <= 0 or
 * batch_size >= m_k means the exact full gradient (and burns no randomness,
 * so full-batch runs are invariant to the batch stream layout). */
Eigen::VectorXd round_gradient(const Objective& objective, const Dataset& shard,
                               const Eigen::VectorXd& w, int batch_size, uint64_t master_seed,
                               uint64_t client, long t) {
  if (batch_size <= 0 || batch_size >= shard.size()) {
    return full_gradient(objective, shard, w);
  }
  Rng rng(derive_stream(master_seed, client, static_cast<uint64_t>(t), kStreamBatch));
  const std::vector<int> batch = sample_without_replacement(shard.size(), batch_size, rng);
  return batch_gradient(objective, shard, w, batch);
}

}  // namespace

std::string ScheduleValidation::summary() const {
  std::ostringstream out;
  if (kind == ScheduleKind::fixed) {
    out << "fixed-rate schedule: " << (ok ? "admissible" : "NOT admissible") << "\n";
    append_check(out, "eta < 1/L", "<", eta_bound);
  } else {
    out << "diminishing schedule: " << (ok ? "admissible" : "NOT admissible") << "\n";
    append_check(out, "delta > m/mu", ">", delta_over_mu);
    append_check(out, "gamma/(gamma+1) >= sqrt((1+lambda^2)/2)", ">=", gamma_contraction);
    append_check(out, "delta/gamma <= 1/(2L)", "<=", step_bound);
  }
  return out.str();
}

ScheduleValidation validate_schedule(const Schedule& schedule, const ConvexityConstants& constants,
                                     long total_samples, double lambda) {
  ScheduleValidation v;
  v.kind = schedule.kind;
  if (schedule.kind == ScheduleKind::fixed) {
    v.eta_bound.lhs = schedule.eta;
    v.eta_bound.rhs = 1.0 / constants.smoothness;
    v.eta_bound.pass = schedule.eta > 0 && schedule.eta < v.eta_bound.rhs;
    v.ok = v.eta_bound.pass;
    return v;
  }
  v.delta_over_mu.lhs = schedule.delta;
  v.delta_over_mu.rhs = static_cast<double>(total_samples) / constants.strong_convexity;
  v.delta_over_mu.pass = schedule.delta > v.delta_over_mu.rhs;

  v.gamma_contraction.lhs = schedule.gamma / (schedule.gamma + 1.0);
  v.gamma_contraction.rhs = std::sqrt((1.0 + lambda * lambda) / 2.0);
  v.gamma_contraction.pass = v.gamma_contraction.lhs >= v.gamma_contraction.rhs;

  v.step_bound.lhs = schedule.delta / schedule.gamma;
  v.step_bound.rhs = 1.0 / (2.0 * constants.smoothness);
  v.step_bound.pass = schedule.delta > 0 && v.step_bound.lhs <= v.step_bound.rhs;

  v.ok = v.delta_over_mu.pass && v.gamma_contraction.pass && v.step_bound.pass;
  return v;
}

void defed_round(std::vector<ClientState>& clients, const MixingMatrix& mixing,
                 const Objective& objective, const std::vector<Dataset>& shards, double eta,
                 int batch_size, uint64_t master_seed, long t, bool scale_step, ThreadPool* pool,
                 const RoundObserver& observer) {
  const int n = static_cast<int>(clients.size());
  if (n == 0 || shards.size() != clients.size() || mixing.size() != n) {
    throw std::invalid_argument("defed_round: clients, shards and mixing matrix disagree in size");
  }
  const double scale = scale_step ? static_cast<double>(n) : 1.0;
  const Eigen::Index dim = clients.front().w.size();

  // Snapshot the round-t state: mixing and gradients both read it.
  Eigen::MatrixXd state(dim, n);
  for (int k = 0; k < n; ++k) state.col(k) = clients[k].w;

  std::vector<Eigen::VectorXd> applied(static_cast<size_t>(n));
  const auto compute = [&](int k) {
    applied[static_cast<size_t>(k)] =
        scale * clients[static_cast<size_t>(k)].weight *
        round_gradient(objective, shards[static_cast<size_t>(k)], state.col(k), batch_size,
                       master_seed, static_cast<uint64_t>(k), t);
  };
  if (pool != nullptr && pool->thread_count() > 1) {
    pool->parallel_for(n, compute);
  } else {
    for (int k = 0; k < n; ++k) compute(k);
  }

  const Eigen::MatrixXd mixed = state * mixing.weights().transpose();
  for (int k = 0; k < n; ++k) {
    clients[static_cast<size_t>(k)].w = mixed.col(k) - eta * applied[static_cast<size_t>(k)];
  }
  if (observer) observer(t, applied);
}

void fedavg_round(std::vector<ClientState>& clients, Eigen::VectorXd& global_w,
                  const Objective& objective, const std::vector<Dataset>& shards, double eta,
                  int batch_size, double participation, uint64_t master_seed, long t,
                  ThreadPool* pool, const RoundObserver& observer) {
  const int n = static_cast<int>(clients.size());
  if (n == 0 || shards.size() != clients.size()) {
    throw std::invalid_argument("fedavg_round: clients and shards disagree in size");
  }
  int n_selected = static_cast<int>(std::floor(participation * n));
  n_selected = std::max(1, std::min(n, n_selected));

  Rng select_rng(derive_stream(master_seed, 0, static_cast<uint64_t>(t), kStreamSelect));
  const std::vector<int> selected = sample_without_replacement(n, n_selected, select_rng);

  std::vector<Eigen::VectorXd> applied(static_cast<size_t>(n),
                                       Eigen::VectorXd::Zero(global_w.size()));
  const auto compute = [&](int i) {
    const int k = selected[static_cast<size_t>(i)];
    applied[static_cast<size_t>(k)] =
        round_gradient(objective, shards[static_cast<size_t>(k)], global_w, batch_size,
                       master_seed, static_cast<uint64_t>(k), t);
  };
  if (pool != nullptr && pool->thread_count() > 1) {
    pool->parallel_for(n_selected, compute);
  } else {
    for (int i = 0; i < n_selected; ++i) compute(i);
  }

  for (const int k : selected) {
    clients[static_cast<size_t>(k)].w = global_w - eta * applied[static_cast<size_t>(k)];
  }
  global_w.setZero();
  for (int k = 0; k < n; ++k) {
    global_w.noalias() += clients[static_cast<size_t>(k)].weight * clients[static_cast<size_t>(k)].w;
  }
  if (observer) observer(t, applied);
}

std::string algorithm_name(Algorithm a) { return a == Algorithm::defed ? "defed" : "fedavg"; }

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "defed") return Algorithm::defed;
  if (name == "fedavg") return Algorithm::fedavg;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected 'defed' or 'fedavg')");
}

RunTrace run(const RunConfig& config, const RunContext& context) {
  if (context.shards == nullptr || context.shards->empty()) {
    throw std::invalid_argument("run: no shards");
  }
  const std::vector<Dataset>& shards = *context.shards;
  const int n = static_cast<int>(shards.size());
  if (config.algorithm == Algorithm::defed) {
    if (context.mixing == nullptr) {
      throw std::invalid_argument("run: decentralized run needs a mixing matrix");
    }
    if (context.mixing->size() != n) {
      throw std::invalid_argument("run: mixing matrix size does not match shard count");
    }
  }
  const Eigen::Index dim = shards.front().dim();
  const std::vector<double> weights = shard_weights(shards);

  Dataset pooled;
  const Dataset* train_eval = context.train_eval;
  if (train_eval == nullptr) {
    pooled = pool(shards);
    train_eval = &pooled;
  }

  std::vector<ClientState> clients(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    ClientState& c = clients[static_cast<size_t>(k)];
    c.weight = weights[static_cast<size_t>(k)];
    if (config.init == InitKind::zeros) {
      c.w = Eigen::VectorXd::Zero(dim);
    } else {
      Rng rng(derive_stream(config.master_seed, static_cast<uint64_t>(k), 0, kStreamInit));
      c.w.resize(dim);
      for (Eigen::Index j = 0; j < dim; ++j) c.w[j] = config.init_scale * rng.next_normal();
    }
  }
  Eigen::VectorXd global_w = Eigen::VectorXd::Zero(dim);
  for (int k = 0; k < n; ++k) {
    global_w.noalias() += clients[static_cast<size_t>(k)].weight * clients[static_cast<size_t>(k)].w;
  }

  ThreadPool pool_storage(config.threads);
  ThreadPool* worker_pool = config.threads > 1 ? &pool_storage : nullptr;

  RunTrace trace;
  trace.algorithm = algorithm_name(config.algorithm);
  trace.n_clients = n;
  trace.master_seed = config.master_seed;
  trace.n_seeds = 1;

  const auto log_state = [&](long t) {
    Eigen::VectorXd reference;
    if (config.algorithm == Algorithm::defed) {
      reference = Eigen::VectorXd::Zero(dim);
      for (const ClientState& c : clients) reference.noalias() += c.w;
      reference /= static_cast<double>(n);
    } else {
      reference = global_w;
    }
    TraceRow row;
    row.t = t;
    row.eta = config.schedule.eta_at(t);
    row.consensus_error = 0;
    for (const ClientState& c : clients) row.consensus_error += (c.w - reference).squaredNorm();
    row.dist_to_opt =
        context.optimum != nullptr ? (reference - *context.optimum).squaredNorm() : kNan;
    row.loss_mean_iterate = loss(context.objective, *train_eval, reference);
    row.train_metric = evaluate(context.objective, *train_eval, reference);
    row.test_metric =
        context.test_eval != nullptr ? evaluate(context.objective, *context.test_eval, reference)
                                     : kNan;
    row.bound_value = context.bound_envelope ? context.bound_envelope(t) : kNan;
    trace.rows.push_back(row);
  };

  log_state(0);
  for (long t = 0; t < config.rounds; ++t) {
    const double eta = config.schedule.eta_at(t);
    if (config.algorithm == Algorithm::defed) {
      defed_round(clients, *context.mixing, context.objective, shards, eta, config.batch_size,
                  config.master_seed, t, config.scale_step, worker_pool, context.observer);
    } else {
      fedavg_round(clients, global_w, context.objective, shards, eta, config.batch_size,
                   config.participation, config.master_seed, t, worker_pool, context.observer);
    }
    const long now = t + 1;
    if (config.log_every > 0 && (now % config.log_every == 0 || now == config.rounds)) {
      log_state(now);
    }
  }
  return trace;
}

std::vector<RunTrace> run_seeds(const RunConfig& config, const RunContext& context, int n_seeds) {
  if (n_seeds < 1) throw std::invalid_argument("run_seeds: n_seeds < 1");
  std::vector<RunTrace> traces(static_cast<size_t>(n_seeds));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n_seeds));
  const auto one = [&](int i) {
    try {
      RunConfig rep = config;
      rep.master_seed =
          derive_stream(config.master_seed, static_cast<uint64_t>(i), 0, kStreamSeed);
      rep.threads = 1;  // repetitions are the parallel unit
      traces[static_cast<size_t>(i)] = run(rep, context);
      traces[static_cast<size_t>(i)].master_seed = config.master_seed;
    } catch (...) {
      errors[static_cast<size_t>(i)] = std::current_exception();
    }
  };
  if (config.threads > 1 && n_seeds > 1) {
    ThreadPool pool(config.threads);
    pool.parallel_for(n_seeds, one);
  } else {
    for (int i = 0; i < n_seeds; ++i) one(i);
  }
  for (const std::exception_ptr& error : errors) {
    if (error) std::rethrow_exception(error);
  }
  return traces;
}

RunTrace expected_trace(const RunConfig& config, const RunContext& context, int n_seeds) {
  return mean_trace(run_seeds(config, context, n_seeds));
}

}  // namespace defed
