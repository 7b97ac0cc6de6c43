#pragma once
#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "defed/engine.hpp"
#include "defed/objective.hpp"
#include "defed/trace.hpp"

namespace defed {

// ---------------------------------------------------------------------------
// Optima

// Global ridge optimum from the normal equations
//   (sum_k (m_k/m) A_k^T A_k / m_k + reg I) w = sum_k (m_k/m) A_k^T b_k / m_k.
// If residual is non-null it receives ||grad F(w*)||.
Eigen::VectorXd optimum_ridge(const Objective& objective, const std::vector<Dataset>& shards,
                              double* residual = nullptr);

// Deterministic full-batch gradient descent at step 1/L until
// ||grad F|| <= tol.  Works for both objective kinds; requires reg > 0 for
// the logistic objective (otherwise the minimizer may not exist).
Eigen::VectorXd optimum_numeric(const Objective& objective, const std::vector<Dataset>& shards,
                                double tol = 1e-10, long max_iters = 10'000'000);

// Global objective value F(w) = sum_k (m_k/m) F_k(w).
double global_loss(const Objective& objective, const std::vector<Dataset>& shards,
                   const Eigen::VectorXd& w);
Eigen::VectorXd global_gradient(const Objective& objective, const std::vector<Dataset>& shards,
                                const Eigen::VectorXd& w);

// ---------------------------------------------------------------------------
// Empirical gradient-noise and heterogeneity estimates

struct NoiseEstimates {
  double sigma_sq = 0;  // (1/K) sum_k sigma_k^2, sigma_k^2 = E||g_k - grad F_k||^2
  double chi_sq = 0;    // max ||g_k||^2 observed across clients and draws
  std::vector<double> per_client_sigma_sq;
};

// Monte-Carlo estimates at w_ref from n_draws batch gradients per client.
// batch_size 0 means full batch (sigma collapses to 0 and chi^2 to the max
// squared full-gradient norm).
NoiseEstimates estimate_sigma_chi(const Objective& objective, const std::vector<Dataset>& shards,
                                  const Eigen::VectorXd& w_ref, int batch_size, int n_draws,
                                  uint64_t seed);

struct HeterogeneityGaps {
  double epsilon = 0;   // (1/K) sum_k (m_k/m) [F_k(w*) - F_k(w_k*)]
  double varsigma = 0;  // F(w*) - (1/K) sum_k F_k(w_k*)
  std::vector<Eigen::VectorXd> client_optima;
};

HeterogeneityGaps heterogeneity_gaps(const Objective& objective,
                                     const std::vector<Dataset>& shards,
                                     const Eigen::VectorXd& w_opt);

// ---------------------------------------------------------------------------
// Convergence-bound constants and envelopes

struct BoundInputs {
  double delta = 0;
  double gamma = 0;
  double lambda = 0;
  long total_samples = 0;
  double smoothness = 0;        // L
  double strong_convexity = 0;  // mu
  double sigma_sq = 0;
  double chi_sq = 0;
  double epsilon = 0;
  double init_consensus = 0;  // E ||w(0) - ones x mean||^2
  double init_dist = 0;       // E ||mean(0) - w*||^2
  int n_clients = 0;
  bool proof_variant = false;  // replace the 2*zeta*m term by 2*zeta
};

struct BoundConstants {
  double zeta = 0;
  double zeta_tilde = 0;
  double gamma = 0;
  bool defined = false;
  std::string why_undefined;

  double iterate_envelope(long t) const { return zeta_tilde / (static_cast<double>(t) + gamma); }
  double consensus_envelope(long t) const {
    const double tg = static_cast<double>(t) + gamma;
    return zeta / (tg * tg);
  }
};

// zeta  = max{ Gamma^2 E||w(0)-ones x mean||^2,
//              (1/(1-lambda^2)) delta^2 K chi^2 / (Gamma^2/((Gamma+1)^2 (1+lambda^2)) - 1/2) }
// zeta~ = max{ ((6 eps L + sigma^2) delta^2 m + 2 zeta m)/(mu delta - m),
//              Gamma E||mean(0)-w*||^2 }
// Undefined (defined=false, reason filled) when mu*delta <= m, when the
// zeta denominator is <= 0, or when lambda >= 1.
BoundConstants bound_constants(const BoundInputs& inputs);

// ---------------------------------------------------------------------------
// Bound certification against a measured (mean) trace

enum class BoundKind { envelope, contraction };

struct BoundCheckParams {
  BoundKind kind = BoundKind::envelope;
  // envelope: certified decay curves for diminishing-schedule runs
  BoundConstants constants;
  bool check_consensus = true;  // also certify sum_k||w_k - mean||^2 <= zeta/(t+Gamma)^2
  // contraction: geometric loss-gap decay for fixed-rate runs
  double eta = 0;
  double smoothness = 0;
  double strong_convexity = 0;
  double sigma_sq = 0;
  double varsigma = 0;
  double optimum_value = 0;  // F*
  double slack = 1e-12;
};

struct BoundCheck {
  bool pass = false;
  long rounds_checked = 0;
  long violations = 0;
  long worst_t = -1;
  double worst_margin = 0;  // min over rounds of (envelope - measured); negative = violation
  std::string to_json() const;
};

BoundCheck check_bound(const RunTrace& mean_trace, const BoundCheckParams& params);

// ---------------------------------------------------------------------------
// Rate fits and task metrics

struct RateFit {
  double slope = 0;
  double intercept = 0;  // natural-log intercept
  double r_squared = 0;
  int n_points = 0;
};

// Least squares of log y on log t over rows with t in [t_min, t_max];
// requires >= 10 usable (t > 0, y > 0) points, else throws
// std::invalid_argument.
RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& y, double t_min,
                 double t_max);
RateFit fit_rate(const RunTrace& trace, const std::string& metric, double t_min, double t_max);

// Task metric at w: mean squared error (regularizer excluded) for ridge,
// 0/1 accuracy with threshold 0.5 for logistic.
double evaluate(const Objective& objective, const Dataset& data, const Eigen::VectorXd& w);

}  // namespace defed
