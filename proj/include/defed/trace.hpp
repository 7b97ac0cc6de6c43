#pragma once
#include <string>
#include <vector>

namespace defed {

// One logged round.  Metrics are evaluated at the algorithm's reference
// iterate (the plain client average for decentralized runs, the aggregated
// global model for server runs).  Fields that need an unavailable input
// (optimum oracle, test set, bound constants) hold NaN.
struct TraceRow {
  long t = 0;
  double eta = 0;
  double consensus_error = 0;  // sum_k ||w_k - reference||^2
  double dist_to_opt = 0;      // ||reference - w*||^2
  double loss_mean_iterate = 0;
  double train_metric = 0;  // mse for ridge runs, accuracy for logistic runs
  double test_metric = 0;
  double bound_value = 0;
};

struct RunTrace {
  std::string algorithm;
  int n_clients = 0;
  uint64_t master_seed = 0;
  int n_seeds = 1;  // >1 when rows hold across-seed means
  std::vector<TraceRow> rows;
};

// trace.csv with the fixed column header
//   t,eta,consensus_error,dist_to_opt,loss_mean_iterate,train_metric,test_metric,bound_value
// and 17-significant-digit values, so equal runs produce byte-equal files.
void write_trace_csv(const std::string& path, const RunTrace& trace);
RunTrace read_trace_csv(const std::string& path);
std::string trace_csv_string(const RunTrace& trace);

// Per-round mean of the metric columns across equally shaped traces
// (accumulated in argument order).
RunTrace mean_trace(const std::vector<RunTrace>& traces);

}  // namespace defed
