#include "defed/data.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "defed/rng.hpp"
#include "defed/topology.hpp"  // ParseError

namespace defed {

Dataset generate_regression(const RegressionParams& params, uint64_t seed) {
  if (params.n_samples < 1) throw std::invalid_argument("generate_regression: n_samples < 1");
  if (!(params.hi > params.lo)) throw std::invalid_argument("generate_regression: hi <= lo");
  if (params.noise_std < 0) throw std::invalid_argument("generate_regression: noise_std < 0");
  if (params.feature_powers.empty()) {
    throw std::invalid_argument("generate_regression: empty feature map");
  }
  Rng x_rng(derive_stream(seed, 0, 0, kStreamData));
  Rng noise_rng(derive_stream(seed, 1, 0, kStreamNoise));

  Dataset data;
  data.features.resize(params.n_samples, static_cast<Eigen::Index>(params.feature_powers.size()));
  data.labels.resize(params.n_samples);
  for (int i = 0; i < params.n_samples; ++i) {
    const double x = x_rng.next_uniform(params.lo, params.hi);
    for (size_t j = 0; j < params.feature_powers.size(); ++j) {
      data.features(i, static_cast<Eigen::Index>(j)) = std::pow(x, params.feature_powers[j]);
    }
    data.labels[i] = 0.5 * std::sin(x) + 1.0 + params.noise_std * noise_rng.next_normal();
  }
  return data;
}

Dataset generate_classification(const ClassificationParams& params, uint64_t seed) {
  if (params.n_samples < 2 || params.n_samples % 2 != 0) {
    throw std::invalid_argument("generate_classification: n_samples must be even and >= 2");
  }
  if (params.dim < 1) throw std::invalid_argument("generate_classification: dim < 1");
  if (params.margin < 0) throw std::invalid_argument("generate_classification: margin < 0");

  Rng dir_rng(derive_stream(seed, 0, 0, kStreamData));
  Rng point_rng(derive_stream(seed, 1, 0, kStreamNoise));
  Rng shuffle_rng(derive_stream(seed, 2, 0, kStreamSeed));

  // Random unit direction separating the two class centres.
  Eigen::VectorXd u(params.dim);
  do {
    for (int j = 0; j < params.dim; ++j) u[j] = dir_rng.next_normal();
  } while (u.norm() < 1e-12);
  u.normalize();

  const int half = params.n_samples / 2;
  Dataset data;
  data.features.resize(params.n_samples, params.dim);
  data.labels.resize(params.n_samples);
  for (int i = 0; i < params.n_samples; ++i) {
    const int label = i < half ? 0 : 1;
    const double sign = label == 0 ? -1.0 : 1.0;
    for (int j = 0; j < params.dim; ++j) {
      data.features(i, j) = sign * params.margin * u[j] + point_rng.next_normal();
    }
    data.labels[i] = label;
  }

  // Fisher-Yates row shuffle so shards drawn from prefixes stay balanced.
  for (int i = params.n_samples - 1; i > 0; --i) {
    const int j = static_cast<int>(shuffle_rng.next_below(static_cast<uint64_t>(i) + 1));
    data.features.row(i).swap(data.features.row(j));
    std::swap(data.labels[i], data.labels[j]);
  }
  return data;
}

Dataset load_csv_dataset(const std::string& path, int label_column) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path);
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
    if (row.empty()) throw ParseError(path + ":" + std::to_string(line_no) + ": empty row");
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": empty dataset file");
  const int n_cols = static_cast<int>(rows.front().size());
  if (label_column < 0 || label_column >= n_cols) {
    throw ParseError(path + ": label column " + std::to_string(label_column) +
                     " out of range for " + std::to_string(n_cols) + " columns");
  }
  if (n_cols < 2) throw ParseError(path + ": need at least one feature column besides the label");

  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(rows.size()), n_cols - 1);
  data.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    int col = 0;
    for (int j = 0; j < n_cols; ++j) {
      if (j == label_column) {
        data.labels[static_cast<Eigen::Index>(i)] = rows[i][static_cast<size_t>(j)];
      } else {
        data.features(static_cast<Eigen::Index>(i), col++) = rows[i][static_cast<size_t>(j)];
      }
    }
  }
  return data;
}

Partition partition_uniform(const Dataset& data, int n_shards, uint64_t seed) {
  if (n_shards < 1) throw std::invalid_argument("partition_uniform: n_shards < 1");
  if (data.size() < n_shards) {
    throw std::invalid_argument("partition_uniform: fewer samples (" +
                                std::to_string(data.size()) + ") than shards (" +
                                std::to_string(n_shards) + ")");
  }
  const int m = data.size();
  std::vector<int> order(static_cast<size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_stream(seed, 0, 0, kStreamData));
  for (int i = m - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_below(static_cast<uint64_t>(i) + 1));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }

  Partition out;
  out.shards.resize(static_cast<size_t>(n_shards));
  out.indices.resize(static_cast<size_t>(n_shards));
  const int base = m / n_shards;
  const int extra = m % n_shards;  // first `extra` shards get one more sample
  int cursor = 0;
  for (int k = 0; k < n_shards; ++k) {
    const int size_k = base + (k < extra ? 1 : 0);
    auto& idx = out.indices[static_cast<size_t>(k)];
    idx.assign(order.begin() + cursor, order.begin() + cursor + size_k);
    cursor += size_k;
    Dataset& shard = out.shards[static_cast<size_t>(k)];
    shard.features.resize(size_k, data.dim());
    shard.labels.resize(size_k);
    for (int r = 0; r < size_k; ++r) {
      shard.features.row(r) = data.features.row(idx[static_cast<size_t>(r)]);
      shard.labels[r] = data.labels[idx[static_cast<size_t>(r)]];
    }
  }
  return out;
}

std::vector<double> shard_weights(const std::vector<Dataset>& shards) {
  if (shards.empty()) throw std::invalid_argument("shard_weights: no shards");
  double total = 0;
  for (const Dataset& shard : shards) total += shard.size();
  std::vector<double> weights;
  weights.reserve(shards.size());
  for (const Dataset& shard : shards) weights.push_back(shard.size() / total);
  return weights;
}

Dataset pool(const std::vector<Dataset>& shards) {
  if (shards.empty()) throw std::invalid_argument("pool: no shards");
  int total = 0;
  const int dim = shards.front().dim();
  for (const Dataset& shard : shards) {
    if (shard.dim() != dim) throw std::invalid_argument("pool: shards disagree on dimension");
    total += shard.size();
  }
  Dataset out;
  out.features.resize(total, dim);
  out.labels.resize(total);
  int cursor = 0;
  for (const Dataset& shard : shards) {
    out.features.middleRows(cursor, shard.size()) = shard.features;
    out.labels.segment(cursor, shard.size()) = shard.labels;
    cursor += shard.size();
  }
  return out;
}

}  // namespace defed
