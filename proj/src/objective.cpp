#include "defed/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace defed {

std::string kind_name(ObjectiveKind kind) {
  return kind == ObjectiveKind::ridge ? "ridge" : "logistic";
}

ObjectiveKind kind_from_name(const std::string& name) {
  if (name == "ridge") return ObjectiveKind::ridge;
  if (name == "logistic") return ObjectiveKind::logistic;
  throw std::invalid_argument("unknown objective kind '" + name +
                              "' (expected 'ridge' or 'logistic')");
}

void check_dataset(const Objective& objective, const Dataset& data) {
  if (data.features.rows() == 0 || data.features.cols() == 0) {
    throw std::invalid_argument("dataset is empty");
  }
  if (data.labels.size() != data.features.rows()) {
    throw std::invalid_argument("dataset has " + std::to_string(data.features.rows()) +
                                " feature rows but " + std::to_string(data.labels.size()) +
                                " labels");
  }
  if (objective.kind == ObjectiveKind::logistic) {
    for (Eigen::Index i = 0; i < data.labels.size(); ++i) {
      const double b = data.labels[i];
      if (b != 0.0 && b != 1.0) {
        throw std::invalid_argument("logistic labels must be 0 or 1, found " + std::to_string(b) +
                                    " at row " + std::to_string(i));
      }
    }
  }
  if (objective.reg < 0.0) {
    throw std::invalid_argument("regularization coefficient must be >= 0");
  }
}

double softplus(double z) {
  // log(1 + e^z) without overflow: for large z it is z + log1p(e^-z).
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double loss(const Objective& objective, const Dataset& data, const Eigen::VectorXd& w) {
  const Eigen::VectorXd z = data.features * w;
  const double m = static_cast<double>(data.size());
  double total = 0.0;
  if (objective.kind == ObjectiveKind::ridge) {
    total = 0.5 * (z - data.labels).squaredNorm();
  } else {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      total += softplus(z[i]) - data.labels[i] * z[i];
    }
  }
  return total / m + 0.5 * objective.reg * w.squaredNorm();
}

namespace {

Eigen::VectorXd residual(const Objective& objective, const Eigen::VectorXd& z,
                         const Eigen::VectorXd& labels) {
  if (objective.kind == ObjectiveKind::ridge) return z - labels;
  Eigen::VectorXd r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) r[i] = sigmoid(z[i]) - labels[i];
  return r;
}

}  // namespace

Eigen::VectorXd full_gradient(const Objective& objective, const Dataset& data,
                              const Eigen::VectorXd& w) {
  const Eigen::VectorXd z = data.features * w;
  const Eigen::VectorXd r = residual(objective, z, data.labels);
  return data.features.transpose() * r / static_cast<double>(data.size()) + objective.reg * w;
}

Eigen::VectorXd batch_gradient(const Objective& objective, const Dataset& data,
                               const Eigen::VectorXd& w, const std::vector<int>& batch) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(w.size());
  for (const int i : batch) {
    if (i < 0 || i >= data.size()) {
      throw std::invalid_argument("batch_gradient: sample index " + std::to_string(i) +
                                  " out of range [0, " + std::to_string(data.size()) + ")");
    }
    const double z = data.features.row(i).dot(w);
    const double r = objective.kind == ObjectiveKind::ridge ? z - data.labels[i]
                                                            : sigmoid(z) - data.labels[i];
    grad.noalias() += data.features.row(i).transpose() * r;
  }
  grad /= static_cast<double>(batch.size());
  grad.noalias() += objective.reg * w;
  return grad;
}

ConvexityConstants constants(const Objective& objective, const std::vector<Dataset>& shards) {
  if (shards.empty()) throw std::invalid_argument("constants: no shards");
  ConvexityConstants out;
  out.per_client_smoothness.reserve(shards.size());
  out.per_client_strong_convexity.reserve(shards.size());
  for (const Dataset& shard : shards) {
    check_dataset(objective, shard);
    const Eigen::MatrixXd gram = shard.features.transpose() * shard.features;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) {
      throw std::runtime_error("constants: Gram eigendecomposition failed");
    }
    const double hi = eig.eigenvalues().maxCoeff();
    const double lo = std::max(0.0, eig.eigenvalues().minCoeff());
    const double m_k = static_cast<double>(shard.size());
    double l_k, mu_k;
    if (objective.kind == ObjectiveKind::ridge) {
      l_k = hi / m_k + objective.reg;
      mu_k = lo / m_k + objective.reg;
    } else {
      l_k = hi / (4.0 * m_k) + objective.reg;
      mu_k = objective.reg;
    }
    out.per_client_smoothness.push_back(l_k);
    out.per_client_strong_convexity.push_back(mu_k);
  }
  out.smoothness = *std::max_element(out.per_client_smoothness.begin(),
                                     out.per_client_smoothness.end());
  out.strong_convexity = *std::min_element(out.per_client_strong_convexity.begin(),
                                           out.per_client_strong_convexity.end());
  return out;
}

}  // namespace defed
