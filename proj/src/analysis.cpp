#include "defed/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "defed/rng.hpp"

namespace defed {

Eigen::VectorXd optimum_ridge(const Objective& objective, const std::vector<Dataset>& shards,
                              double* residual) {
  if (objective.kind != ObjectiveKind::ridge) {
    throw std::invalid_argument("optimum_ridge: objective is not ridge");
  }
  if (shards.empty()) throw std::invalid_argument("optimum_ridge: no shards");
  const Eigen::Index dim = shards.front().dim();
  const std::vector<double> weights = shard_weights(shards);
  Eigen::MatrixXd h = objective.reg * Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  for (size_t k = 0; k < shards.size(); ++k) {
    const Dataset& shard = shards[k];
    const double scale = weights[k] / static_cast<double>(shard.size());
    h.noalias() += scale * (shard.features.transpose() * shard.features);
    rhs.noalias() += scale * (shard.features.transpose() * shard.labels);
  }
  const Eigen::VectorXd w = h.ldlt().solve(rhs);
  if (residual != nullptr) *residual = global_gradient(objective, shards, w).norm();
  return w;
}

Eigen::VectorXd optimum_numeric(const Objective& objective, const std::vector<Dataset>& shards,
                                double tol, long max_iters) {
  if (shards.empty()) throw std::invalid_argument("optimum_numeric: no shards");
  if (objective.kind == ObjectiveKind::logistic && objective.reg <= 0) {
    throw std::invalid_argument(
        "optimum_numeric: logistic objective needs reg > 0 for a finite minimizer");
  }
  const ConvexityConstants c = constants(objective, shards);
  const double step = 1.0 / c.smoothness;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(shards.front().dim());
  for (long iter = 0; iter < max_iters; ++iter) {
    const Eigen::VectorXd grad = global_gradient(objective, shards, w);
    if (grad.norm() <= tol) return w;
    w.noalias() -= step * grad;
  }
  const double remaining = global_gradient(objective, shards, w).norm();
  if (remaining <= tol) return w;
  throw std::runtime_error("optimum_numeric: gradient norm " + std::to_string(remaining) +
                           " still above tolerance after " + std::to_string(max_iters) +
                           " iterations");
}

double global_loss(const Objective& objective, const std::vector<Dataset>& shards,
                   const Eigen::VectorXd& w) {
  const std::vector<double> weights = shard_weights(shards);
  double total = 0;
  for (size_t k = 0; k < shards.size(); ++k) total += weights[k] * loss(objective, shards[k], w);
  return total;
}

Eigen::VectorXd global_gradient(const Objective& objective, const std::vector<Dataset>& shards,
                                const Eigen::VectorXd& w) {
  const std::vector<double> weights = shard_weights(shards);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(w.size());
  for (size_t k = 0; k < shards.size(); ++k) {
    grad.noalias() += weights[k] * full_gradient(objective, shards[k], w);
  }
  return grad;
}

NoiseEstimates estimate_sigma_chi(const Objective& objective, const std::vector<Dataset>& shards,
                                  const Eigen::VectorXd& w_ref, int batch_size, int n_draws,
                                  uint64_t seed) {
  if (shards.empty()) throw std::invalid_argument("estimate_sigma_chi: no shards");
  if (n_draws < 1) throw std::invalid_argument("estimate_sigma_chi: n_draws < 1");
  NoiseEstimates out;
  out.per_client_sigma_sq.reserve(shards.size());
  out.chi_sq = 0;
  for (size_t k = 0; k < shards.size(); ++k) {
    const Dataset& shard = shards[k];
    const Eigen::VectorXd exact = full_gradient(objective, shard, w_ref);
    if (batch_size <= 0 || batch_size >= shard.size()) {
      out.per_client_sigma_sq.push_back(0.0);
      out.chi_sq = std::max(out.chi_sq, exact.squaredNorm());
      continue;
    }
    double acc = 0;
    for (int draw = 0; draw < n_draws; ++draw) {
      Rng rng(derive_stream(seed, static_cast<uint64_t>(k), static_cast<uint64_t>(draw),
                            kStreamNoise));
      const std::vector<int> batch = sample_without_replacement(shard.size(), batch_size, rng);
      const Eigen::VectorXd g = batch_gradient(objective, shard, w_ref, batch);
      acc += (g - exact).squaredNorm();
      out.chi_sq = std::max(out.chi_sq, g.squaredNorm());
    }
    out.per_client_sigma_sq.push_back(acc / n_draws);
  }
  out.sigma_sq = 0;
  for (const double s : out.per_client_sigma_sq) out.sigma_sq += s;
  out.sigma_sq /= static_cast<double>(shards.size());
  return out;
}

HeterogeneityGaps heterogeneity_gaps(const Objective& objective,
                                     const std::vector<Dataset>& shards,
                                     const Eigen::VectorXd& w_opt) {
  if (shards.empty()) throw std::invalid_argument("heterogeneity_gaps: no shards");
  HeterogeneityGaps out;
  const std::vector<double> weights = shard_weights(shards);
  const double k_count = static_cast<double>(shards.size());
  double local_losses = 0;  // (1/K) sum_k F_k(w_k*)
  out.epsilon = 0;
  out.client_optima.reserve(shards.size());
  for (size_t k = 0; k < shards.size(); ++k) {
    const std::vector<Dataset> alone = {shards[k]};
    const Eigen::VectorXd w_k =
        objective.kind == ObjectiveKind::ridge ? optimum_ridge(objective, alone)
                                               : optimum_numeric(objective, alone);
    out.client_optima.push_back(w_k);
    const double at_global = loss(objective, shards[k], w_opt);
    const double at_local = loss(objective, shards[k], w_k);
    out.epsilon += weights[k] * (at_global - at_local) / k_count;
    local_losses += at_local / k_count;
  }
  out.varsigma = global_loss(objective, shards, w_opt) - local_losses;
  return out;
}

BoundConstants bound_constants(const BoundInputs& in) {
  BoundConstants out;
  out.gamma = in.gamma;
  if (in.lambda >= 1.0) {
    out.why_undefined = "lambda >= 1: the topology does not contract disagreement";
    return out;
  }
  const double lambda_sq = in.lambda * in.lambda;
  const double g = in.gamma;
  const double contraction_margin = g * g / ((g + 1.0) * (g + 1.0) * (1.0 + lambda_sq)) - 0.5;
  if (contraction_margin <= 0.0) {
    out.why_undefined = "gamma/(gamma+1) below sqrt((1+lambda^2)/2): consensus term diverges";
    return out;
  }
  const double m = static_cast<double>(in.total_samples);
  const double mu_delta_gap = in.strong_convexity * in.delta - m;
  if (mu_delta_gap <= 0.0) {
    out.why_undefined = "mu * delta <= m: the iterate recursion does not close";
    return out;
  }
  const double consensus_forcing = (1.0 / (1.0 - lambda_sq)) * in.delta * in.delta *
                                   static_cast<double>(in.n_clients) * in.chi_sq /
                                   contraction_margin;
  out.zeta = std::max(g * g * in.init_consensus, consensus_forcing);
  const double zeta_carry = in.proof_variant ? 2.0 * out.zeta : 2.0 * out.zeta * m;
  const double forcing =
      ((6.0 * in.epsilon * in.smoothness + in.sigma_sq) * in.delta * in.delta * m + zeta_carry) /
      mu_delta_gap;
  out.zeta_tilde = std::max(forcing, g * in.init_dist);
  out.defined = true;
  return out;
}

std::string BoundCheck::to_json() const {
  std::ostringstream out;
  out.precision(17);
  out << "{\"pass\": " << (pass ? "true" : "false") << ", \"rounds_checked\": " << rounds_checked
      << ", \"violations\": " << violations << ", \"worst_t\": " << worst_t
      << ", \"worst_margin\": " << worst_margin << "}";
  return out.str();
}

BoundCheck check_bound(const RunTrace& mean_trace, const BoundCheckParams& params) {
  BoundCheck out;
  out.worst_margin = std::numeric_limits<double>::infinity();
  double init_gap = std::numeric_limits<double>::quiet_NaN();
  for (const TraceRow& row : mean_trace.rows) {
    if (row.t == 0) {
      init_gap = row.loss_mean_iterate - params.optimum_value;
      break;
    }
  }
  const auto check_one = [&](long t, double measured, double envelope) {
    if (!std::isfinite(measured) || !std::isfinite(envelope)) return;
    ++out.rounds_checked;
    const double margin = envelope - measured;
    if (margin < out.worst_margin) {
      out.worst_margin = margin;
      out.worst_t = t;
    }
    if (measured > envelope + params.slack * std::max(1.0, std::abs(envelope))) {
      ++out.violations;
    }
  };
  for (const TraceRow& row : mean_trace.rows) {
    if (params.kind == BoundKind::envelope) {
      if (!params.constants.defined) break;
      check_one(row.t, row.dist_to_opt, params.constants.iterate_envelope(row.t));
      if (params.check_consensus) {
        check_one(row.t, row.consensus_error, params.constants.consensus_envelope(row.t));
      }
    } else {
      const double floor = params.eta * params.smoothness *
                           (params.sigma_sq + 2.0 * params.strong_convexity * params.varsigma) /
                           (2.0 * params.strong_convexity);
      const double contraction =
          std::pow(1.0 - params.strong_convexity * params.eta, static_cast<double>(row.t));
      check_one(row.t, row.loss_mean_iterate - params.optimum_value,
                contraction * init_gap + floor);
    }
  }
  out.pass = out.rounds_checked > 0 && out.violations == 0;
  return out;
}

RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& y, double t_min,
                 double t_max) {
  if (t.size() != y.size()) throw std::invalid_argument("fit_rate: t and y sizes differ");
  std::vector<double> xs, ys;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_min || t[i] > t_max) continue;
    if (!(t[i] > 0) || !(y[i] > 0) || !std::isfinite(y[i])) continue;
    xs.push_back(std::log(t[i]));
    ys.push_back(std::log(y[i]));
  }
  if (xs.size() < 10) {
    throw std::invalid_argument("fit_rate: only " + std::to_string(xs.size()) +
                                " usable points in [" + std::to_string(t_min) + ", " +
                                std::to_string(t_max) + "], need at least 10");
  }
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0) throw std::invalid_argument("fit_rate: degenerate time axis");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.n_points = static_cast<int>(xs.size());
  return fit;
}

RateFit fit_rate(const RunTrace& trace, const std::string& metric, double t_min, double t_max) {
  std::vector<double> t, y;
  t.reserve(trace.rows.size());
  y.reserve(trace.rows.size());
  for (const TraceRow& row : trace.rows) {
    t.push_back(static_cast<double>(row.t));
    if (metric == "consensus_error") {
      y.push_back(row.consensus_error);
    } else if (metric == "dist_to_opt") {
      y.push_back(row.dist_to_opt);
    } else if (metric == "loss_mean_iterate") {
      y.push_back(row.loss_mean_iterate);
    } else if (metric == "train_metric") {
      y.push_back(row.train_metric);
    } else if (metric == "test_metric") {
      y.push_back(row.test_metric);
    } else if (metric == "bound_value") {
      y.push_back(row.bound_value);
    } else {
      throw std::invalid_argument("fit_rate: unknown metric '" + metric + "'");
    }
  }
  return fit_rate(t, y, t_min, t_max);
}

double evaluate(const Objective& objective, const Dataset& data, const Eigen::VectorXd& w) {
  const Eigen::VectorXd z = data.features * w;
  if (objective.kind == ObjectiveKind::ridge) {
    return (z - data.labels).squaredNorm() / static_cast<double>(data.size());
  }
  long correct = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double predicted = z[i] >= 0.0 ? 1.0 : 0.0;
    if (predicted == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace defed
