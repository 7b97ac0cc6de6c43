#include "defed/topology.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace defed {

std::string TopologyReport::to_string() const {
  std::ostringstream out;
  out << "size=" << size;
  out << " square=" << (square ? "yes" : "no");
  out << " symmetric=" << (symmetric ? "yes" : "no") << " (max asymmetry " << max_asymmetry << ")";
  out << " row_stochastic=" << (row_stochastic ? "yes" : "no") << " (max row-sum deviation "
      << max_row_sum_deviation << ")";
  out << " entries_in_range=" << (entries_in_range ? "yes" : "no") << " (min " << min_entry
      << ", max " << max_entry << ")";
  out << " connected=" << (connected ? "yes" : "no");
  out << " tolerance=" << tolerance;
  return out.str();
}

TopologyReport validate(const Eigen::MatrixXd& w, double tol) {
  TopologyReport report;
  report.tolerance = tol;
  report.size = static_cast<int>(w.rows());
  report.square = w.rows() == w.cols() && w.rows() >= 2;
  if (!report.square) return report;

  const int n = report.size;
  report.max_asymmetry = (w - w.transpose()).cwiseAbs().maxCoeff();
  report.symmetric = report.max_asymmetry <= tol;

  report.max_row_sum_deviation = (w.rowwise().sum().array() - 1.0).abs().maxCoeff();
  report.row_stochastic = report.max_row_sum_deviation <= tol;

  report.min_entry = w.minCoeff();
  report.max_entry = w.maxCoeff();
  report.entries_in_range = report.min_entry >= -tol && report.max_entry <= 1.0 + tol;

  // BFS over the support graph (self-loops carry no connectivity).
  std::vector<char> seen(n, 0);
  std::vector<int> queue = {0};
  seen[0] = 1;
  int reached = 1;
  while (!queue.empty()) {
    const int i = queue.back();
    queue.pop_back();
    for (int j = 0; j < n; ++j) {
      if (j != i && !seen[j] && w(i, j) > 0.0) {
        seen[j] = 1;
        ++reached;
        queue.push_back(j);
      }
    }
  }
  report.connected = reached == n;
  return report;
}

namespace {

// One power-iteration solve of || B ||_2 with B = W - (1/n) ones ones^T,
// iterating B^2 so paired +/- eigenvalues cannot stall convergence.
double power_norm(const Eigen::MatrixXd& w, const Eigen::VectorXd& start) {
  const int n = static_cast<int>(w.rows());
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return w * v - ones * (v.sum() / n);
  };

  Eigen::VectorXd v = start;
  v -= ones * (v.sum() / n);  // B annihilates the all-ones direction anyway
  double norm = v.norm();
  if (norm == 0.0) return 0.0;
  v /= norm;

  double theta = 0.0;  // current estimate of lambda^2
  for (int iter = 0; iter < 200000; ++iter) {
    Eigen::VectorXd bv = apply(v);
    Eigen::VectorXd b2v = apply(bv);
    const double next = v.dot(b2v);  // Rayleigh quotient of B^2
    const double b2norm = b2v.norm();
    if (b2norm <= 1e-30) return 0.0;
    b2v /= b2norm;
    const bool settled = std::abs(next - theta) <= 1e-16 + 1e-15 * std::abs(next);
    theta = next;
    v = b2v;
    if (settled && iter >= 8) break;
  }
  return std::sqrt(std::max(0.0, theta));
}

}  // namespace

double spectral_norm(const Eigen::MatrixXd& w) {
  if (w.rows() != w.cols() || w.rows() < 1) {
    throw std::invalid_argument("spectral_norm: matrix must be square and non-empty");
  }
  const int n = static_cast<int>(w.rows());
  if (n == 1) return 0.0;
  // Two deterministic starts guard against a start vector that is
  // accidentally orthogonal to the dominant eigenspace.
  Eigen::VectorXd s1(n), s2(n);
  for (int i = 0; i < n; ++i) {
    s1[i] = 1.0 + 0.25 * std::cos(1.6180339887498949 * i + 0.5);
    s2[i] = std::sin(0.7548776662466927 * i + 1.0) + 0.125 * i;
  }
  return std::max(power_norm(w, s1), power_norm(w, s2));
}

MixingMatrix::MixingMatrix(Eigen::MatrixXd w, double tol) : w_(std::move(w)) {
  const TopologyReport report = validate(w_, tol);
  if (!report.ok()) {
    throw ValidationError("invalid mixing matrix: " + report.to_string());
  }
}

MixingMatrix::MixingMatrix(const MixingMatrix& other) : w_(other.w_) {
  if (other.lambda_ready_.load(std::memory_order_acquire)) {
    lambda_value_ = other.lambda_value_;
    lambda_ready_.store(true, std::memory_order_release);
  }
}

MixingMatrix& MixingMatrix::operator=(const MixingMatrix& other) {
  if (this != &other) {
    w_ = other.w_;
    if (other.lambda_ready_.load(std::memory_order_acquire)) {
      lambda_value_ = other.lambda_value_;
      lambda_ready_.store(true, std::memory_order_release);
    } else {
      lambda_ready_.store(false, std::memory_order_release);
    }
  }
  return *this;
}

double MixingMatrix::lambda() const {
  if (!lambda_ready_.load(std::memory_order_acquire)) {
    std::lock_guard<std::mutex> lock(lambda_mutex_);
    if (!lambda_ready_.load(std::memory_order_relaxed)) {
      const double value = spectral_norm(w_);
      if (value >= 1.0) {
        throw ValidationError("mixing matrix deviation norm is " + std::to_string(value) +
                              ", expected a value in [0, 1)");
      }
      lambda_value_ = value;
      lambda_ready_.store(true, std::memory_order_release);
    }
  }
  return lambda_value_;
}

MixingMatrix build_regular_graph(int n_clients, int degree) {
  if (n_clients < 3) {
    throw std::invalid_argument("build_regular_graph: need at least 3 clients, got " +
                                std::to_string(n_clients));
  }
  if (degree % 2 != 0) {
    throw std::invalid_argument("build_regular_graph: degree must be even, got " +
                                std::to_string(degree));
  }
  if (degree < 2 || degree > n_clients - 1) {
    throw std::invalid_argument("build_regular_graph: degree must be in [2, " +
                                std::to_string(n_clients - 1) + "], got " +
                                std::to_string(degree));
  }
  const double weight = 1.0 / (degree + 1);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n_clients, n_clients);
  for (int i = 0; i < n_clients; ++i) {
    w(i, i) = weight;
    for (int s = 1; s <= degree / 2; ++s) {
      w(i, (i + s) % n_clients) = weight;
      w(i, ((i - s) % n_clients + n_clients) % n_clients) = weight;
    }
  }
  return MixingMatrix(std::move(w), kConstructedTol);
}

MixingMatrix build_complete_graph(int n_clients) {
  if (n_clients < 2) {
    throw std::invalid_argument("build_complete_graph: need at least 2 clients, got " +
                                std::to_string(n_clients));
  }
  Eigen::MatrixXd w =
      Eigen::MatrixXd::Constant(n_clients, n_clients, 1.0 / static_cast<double>(n_clients));
  return MixingMatrix(std::move(w), kConstructedTol);
}

MixingMatrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open matrix file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      try {
        size_t used = 0;
        const double value = std::stod(field, &used);
        while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used]))) ++used;
        if (used != field.size()) throw std::invalid_argument(field);
        row.push_back(value);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": non-numeric field '" + field +
                         "'");
      }
    }
    if (row.empty()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": empty row");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": ragged row (got " +
                       std::to_string(row.size()) + " fields, expected " +
                       std::to_string(rows.front().size()) + ")");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": empty matrix file");
  if (rows.size() != rows.front().size()) {
    throw ParseError(path + ": matrix is " + std::to_string(rows.size()) + "x" +
                     std::to_string(rows.front().size()) + ", expected square");
  }
  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd w(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) w(i, j) = rows[i][j];
  }
  return MixingMatrix(std::move(w), kLoadedTol);
}

void save_matrix(const std::string& path, const Eigen::MatrixXd& w) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write matrix file: " + path);
  char buffer[64];
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      std::snprintf(buffer, sizeof(buffer), "%.17g", w(i, j));
      out << buffer << (j + 1 < w.cols() ? "," : "");
    }
    out << "\n";
  }
}

}  // namespace defed
