#pragma once
#include <Eigen/Dense>
#include <atomic>
#include <mutex>
#include <stdexcept>
#include <string>

namespace defed {

// Communication topologies are symmetric row-stochastic mixing matrices.
// The quantity the convergence analysis cares about is
//   lambda = || W - (1/K) * ones * ones^T ||_2,
// the spectral norm of the deviation from perfect averaging; for a valid
// connected matrix it lies in [0, 1) and governs the gossip contraction
//   || W v - ones * mean(v) || <= lambda * || v - ones * mean(v) ||.

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kConstructedTol = 1e-12;  // matrices we build
inline constexpr double kLoadedTol = 1e-9;        // matrices read from files

struct TopologyReport {
  int size = 0;
  bool square = false;
  bool symmetric = false;
  bool row_stochastic = false;
  bool entries_in_range = false;
  bool connected = false;
  double max_asymmetry = 0;
  double max_row_sum_deviation = 0;
  double min_entry = 0;
  double max_entry = 0;
  double tolerance = 0;

  bool ok() const {
    return square && symmetric && row_stochastic && entries_in_range && connected;
  }
  std::string to_string() const;
};

// Structural validation only; never throws on an invalid matrix.
TopologyReport validate(const Eigen::MatrixXd& w, double tol = kConstructedTol);

// Spectral norm of W - (1/K) ones ones^T, computed by deterministic power
// iteration on the squared deviation matrix.  Accurate to ~1e-12 for the
// matrix sizes this artifact targets.
double spectral_norm(const Eigen::MatrixXd& w);

class MixingMatrix {
 public:
  // Validates under `tol`; throws ValidationError with the report text on
  // failure.
  explicit MixingMatrix(Eigen::MatrixXd w, double tol = kConstructedTol);

  MixingMatrix(const MixingMatrix& other);
  MixingMatrix& operator=(const MixingMatrix& other);

  int size() const { return static_cast<int>(w_.rows()); }
  const Eigen::MatrixXd& weights() const { return w_; }

  // lambda, computed on first use and cached; safe to call concurrently.
  double lambda() const;

 private:
  Eigen::MatrixXd w_;
  mutable std::mutex lambda_mutex_;
  mutable double lambda_value_ = 0;
  mutable std::atomic<bool> lambda_ready_{false};
};

// l-regular ring: client i is linked to the l/2 nearest neighbours on each
// side (indices mod K) and itself, every weight 1/(l+1).  Requires K >= 3,
// l even, 2 <= l <= K-1.  Throws std::invalid_argument otherwise.
MixingMatrix build_regular_graph(int n_clients, int degree);

// Complete graph: every entry 1/K.  Requires K >= 2.
MixingMatrix build_complete_graph(int n_clients);

// Dense numeric CSV (K rows, comma-separated, no header).  Parse failures
// throw ParseError; structural failures throw ValidationError (loaded
// matrices are validated under the looser kLoadedTol).
MixingMatrix load_matrix(const std::string& path);

void save_matrix(const std::string& path, const Eigen::MatrixXd& w);

}  // namespace defed
