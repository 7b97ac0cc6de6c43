#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "defed/data.hpp"
#include "defed/objective.hpp"
#include "defed/thread_pool.hpp"
#include "defed/topology.hpp"
#include "defed/trace.hpp"

namespace defed {

// ---------------------------------------------------------------------------
// Learning-rate schedules

enum class ScheduleKind { fixed, diminishing };

struct Schedule {
  ScheduleKind kind = ScheduleKind::fixed;
  double eta = 0.1;    // fixed
  double delta = 1.0;  // diminishing: eta_t = delta / (t + gamma)
  double gamma = 1.0;

  double eta_at(long t) const {
    return kind == ScheduleKind::fixed ? eta : delta / (static_cast<double>(t) + gamma);
  }
};

struct ConditionCheck {
  bool pass = false;
  double lhs = 0;  // the checked quantity
  double rhs = 0;  // the threshold it is compared against
};

// Admissibility of a schedule for the convergence guarantees.  Violations
// are reported, not fatal: callers warn and run.
struct ScheduleValidation {
  ScheduleKind kind = ScheduleKind::fixed;
  ConditionCheck delta_over_mu;     // diminishing: delta > m / mu
  ConditionCheck gamma_contraction; // diminishing: gamma/(gamma+1) >= sqrt((1+lambda^2)/2)
  ConditionCheck step_bound;        // diminishing: delta/gamma <= 1/(2L)
  ConditionCheck eta_bound;         // fixed: eta < 1/L
  bool ok = false;
  std::string summary() const;
};

ScheduleValidation validate_schedule(const Schedule& schedule, const ConvexityConstants& constants,
                                     long total_samples, double lambda);

// ---------------------------------------------------------------------------
// Rounds

struct ClientState {
  Eigen::VectorXd w;
  double weight = 0;  // m_k / m
};

// Test/inspection hook: the per-client gradient terms actually applied in a
// round (for decentralized rounds the shard-weighted gradients).
using RoundObserver =
    std::function<void(long t, const std::vector<Eigen::VectorXd>& applied_gradients)>;

// One decentralized round on round-t state:
//   w_k <- sum_j W_kj w_j - eta * s * (m_k/m) * g_k(w_k),
// gradients and mixing both reading the pre-round state; s = K when
// scale_step is set (see README), else 1.  batch_size 0 means full batch.
void defed_round(std::vector<ClientState>& clients, const MixingMatrix& mixing,
                 const Objective& objective, const std::vector<Dataset>& shards, double eta,
                 int batch_size, uint64_t master_seed, long t, bool scale_step = false,
                 ThreadPool* pool = nullptr, const RoundObserver& observer = nullptr);

// One server round: N = max(floor(C*K), 1) clients are drawn uniformly
// without replacement; each selected client steps from the broadcast global
// model with its unweighted gradient, unselected clients keep their local
// model, and the new global model is the shard-size weighted average of all
// local models.
void fedavg_round(std::vector<ClientState>& clients, Eigen::VectorXd& global_w,
                  const Objective& objective, const std::vector<Dataset>& shards, double eta,
                  int batch_size, double participation, uint64_t master_seed, long t,
                  ThreadPool* pool = nullptr, const RoundObserver& observer = nullptr);

// ---------------------------------------------------------------------------
// Full runs

enum class Algorithm { defed, fedavg };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

enum class InitKind { zeros, random };

struct RunConfig {
  Algorithm algorithm = Algorithm::defed;
  Schedule schedule;
  long rounds = 1000;
  int batch_size = 64;        // 0 = full batch
  double participation = 1.0; // C, server runs only
  uint64_t master_seed = 1;
  long log_every = 1;
  InitKind init = InitKind::zeros;
  double init_scale = 1.0;
  bool scale_step = false;
  int threads = 1;
};

struct RunContext {
  Objective objective;
  const std::vector<Dataset>* shards = nullptr;
  const MixingMatrix* mixing = nullptr;       // required for decentralized runs
  const Dataset* train_eval = nullptr;        // defaults to the pooled shards
  const Dataset* test_eval = nullptr;         // optional
  const Eigen::VectorXd* optimum = nullptr;   // optional oracle
  std::function<double(long)> bound_envelope; // optional: fills bound_value
  RoundObserver observer;                     // optional
};

// Simulates config.rounds rounds and logs rows at t = 0, every log_every-th
// round, and the final round.  Row t describes the state after t rounds;
// eta is the rate the schedule assigns to round t.
RunTrace run(const RunConfig& config, const RunContext& context);

// Independent repetitions with per-repetition seeds derived from
// config.master_seed; repetitions run in parallel when config.threads > 1
// but are aggregated in a fixed order.
std::vector<RunTrace> run_seeds(const RunConfig& config, const RunContext& context, int n_seeds);

// mean_trace(run_seeds(...)) — the empirical expectation of the trace.
RunTrace expected_trace(const RunConfig& config, const RunContext& context, int n_seeds = 20);

}  // namespace defed
