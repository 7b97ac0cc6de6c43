#pragma once
#include <Eigen/Dense>
#include <string>
#include <vector>

namespace defed {

// Client objectives:
//   F_k(w) = (1/m_k) sum_i f(a_i, b_i; w) + (reg/2) ||w||^2
// with f either the squared error  0.5 (a^T w - b)^2  or the logistic
// cross-entropy  softplus(a^T w) - b a^T w,  labels in {0,1}.
// The global objective is the shard-size weighted sum F = sum_k (m_k/m) F_k.

enum class ObjectiveKind { ridge, logistic };

struct Objective {
  ObjectiveKind kind = ObjectiveKind::ridge;
  double reg = 0.0;  // l2 coefficient, >= 0
};

struct Dataset {
  Eigen::MatrixXd features;  // m x n
  Eigen::VectorXd labels;    // m

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

std::string kind_name(ObjectiveKind kind);
ObjectiveKind kind_from_name(const std::string& name);

// Throws std::invalid_argument on shape mismatch, empty data, or non-{0,1}
// labels for the logistic objective.
void check_dataset(const Objective& objective, const Dataset& data);

// Numerically stable helpers (no overflow for |z| up to ~1e3 and beyond).
double softplus(double z);
double sigmoid(double z);

// F_k(w), including the regularizer.
double loss(const Objective& objective, const Dataset& data, const Eigen::VectorXd& w);

// grad F_k(w) = (1/m_k) A^T r(w) + reg * w  with r the residual
// (A w - b for ridge, sigmoid(A w) - b for logistic).
Eigen::VectorXd full_gradient(const Objective& objective, const Dataset& data,
                              const Eigen::VectorXd& w);

// Mini-batch gradient: mean of the sampled per-sample data terms plus the
// full regularizer term, so it is unbiased for full_gradient.
Eigen::VectorXd batch_gradient(const Objective& objective, const Dataset& data,
                               const Eigen::VectorXd& w, const std::vector<int>& batch);

struct ConvexityConstants {
  double smoothness = 0;        // L = max_k L_k
  double strong_convexity = 0;  // mu = min_k mu_k
  std::vector<double> per_client_smoothness;
  std::vector<double> per_client_strong_convexity;
};

// Smoothness / strong-convexity from the per-shard Gram spectra:
//   ridge:     L_k = lambda_max(A^T A)/m_k + reg,  mu_k = lambda_min(A^T A)/m_k + reg
//   logistic:  L_k = lambda_max(A^T A)/(4 m_k) + reg,  mu_k = reg
ConvexityConstants constants(const Objective& objective, const std::vector<Dataset>& shards);

}  // namespace defed
