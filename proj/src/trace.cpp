#include "defed/trace.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace defed {

namespace {

constexpr const char* kHeader =
    "t,eta,consensus_error,dist_to_opt,loss_mean_iterate,train_metric,test_metric,bound_value";

void append_value(std::string& out, double value) {
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  out += buffer;
}

}  // namespace

std::string trace_csv_string(const RunTrace& trace) {
  std::string out = kHeader;
  out += '\n';
  for (const TraceRow& row : trace.rows) {
    out += std::to_string(row.t);
    out += ',';
    append_value(out, row.eta);
    out += ',';
    append_value(out, row.consensus_error);
    out += ',';
    append_value(out, row.dist_to_opt);
    out += ',';
    append_value(out, row.loss_mean_iterate);
    out += ',';
    append_value(out, row.train_metric);
    out += ',';
    append_value(out, row.test_metric);
    out += ',';
    append_value(out, row.bound_value);
    out += '\n';
  }
  return out;
}

void write_trace_csv(const std::string& path, const RunTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  out << trace_csv_string(trace);
}

RunTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty trace file");
  if (line != kHeader) throw std::runtime_error(path + ": unexpected trace header '" + line + "'");
  RunTrace trace;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream fields(line);
    std::string field;
    std::vector<double> values;
    while (std::getline(fields, field, ',')) {
      try {
        values.push_back(std::stod(field));
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": non-numeric field '" +
                                 field + "'");
      }
    }
    if (values.size() != 8) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 8 fields, got " +
                               std::to_string(values.size()));
    }
    TraceRow row;
    row.t = static_cast<long>(values[0]);
    row.eta = values[1];
    row.consensus_error = values[2];
    row.dist_to_opt = values[3];
    row.loss_mean_iterate = values[4];
    row.train_metric = values[5];
    row.test_metric = values[6];
    row.bound_value = values[7];
    trace.rows.push_back(row);
  }
  return trace;
}

RunTrace mean_trace(const std::vector<RunTrace>& traces) {
  if (traces.empty()) throw std::invalid_argument("mean_trace: no traces");
  const size_t n_rows = traces.front().rows.size();
  for (const RunTrace& trace : traces) {
    if (trace.rows.size() != n_rows) {
      throw std::invalid_argument("mean_trace: traces have different lengths");
    }
  }
  RunTrace out = traces.front();
  out.n_seeds = static_cast<int>(traces.size());
  const double scale = 1.0 / static_cast<double>(traces.size());
  for (size_t r = 0; r < n_rows; ++r) {
    TraceRow& row = out.rows[r];
    row.consensus_error = 0;
    row.dist_to_opt = 0;
    row.loss_mean_iterate = 0;
    row.train_metric = 0;
    row.test_metric = 0;
    for (const RunTrace& trace : traces) {
      const TraceRow& src = trace.rows[r];
      if (src.t != row.t) throw std::invalid_argument("mean_trace: round indices disagree");
      row.consensus_error += src.consensus_error;
      row.dist_to_opt += src.dist_to_opt;
      row.loss_mean_iterate += src.loss_mean_iterate;
      row.train_metric += src.train_metric;
      row.test_metric += src.test_metric;
    }
    row.consensus_error *= scale;
    row.dist_to_opt *= scale;
    row.loss_mean_iterate *= scale;
    row.train_metric *= scale;
    row.test_metric *= scale;
  }
  return out;
}

}  // namespace defed
