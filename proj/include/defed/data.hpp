#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "defed/objective.hpp"

namespace defed {

// Synthetic tasks and CSV loading.  All generation is driven by the
// deterministic streams in rng.hpp, so a (params, seed) pair always yields
// the identical dataset.

struct RegressionParams {
  int n_samples = 6000;
  double lo = -6.0;
  double hi = 6.0;
  double noise_std = 0.1;
  // Polynomial feature map: column j is x^powers[j].  Default [1, x].
  std::vector<int> feature_powers = {0, 1};
};

// x ~ U[lo, hi),  y = 0.5 sin(x) + 1 + noise_std * N(0,1).
Dataset generate_regression(const RegressionParams& params, uint64_t seed);

struct ClassificationParams {
  int n_samples = 2000;  // must be even; half per class
  int dim = 2;
  double margin = 2.0;  // class c centred at (2c-1) * margin * u, u a random unit vector
};

// Two unit-variance Gaussian blobs at +/- margin * u, labels 0/1, balanced,
// rows shuffled.
Dataset generate_classification(const ClassificationParams& params, uint64_t seed);

// Numeric CSV, one row per sample, no header; `label_column` (0-based)
// holds the label, remaining columns are features in order.  Ragged rows,
// non-numeric fields, or an out-of-range label column throw ParseError.
Dataset load_csv_dataset(const std::string& path, int label_column);

struct Partition {
  std::vector<Dataset> shards;
  std::vector<std::vector<int>> indices;  // indices[k] = rows of the parent dataset
};

// Random near-equal split: shard sizes differ by at most one, every sample
// appears in exactly one shard.
Partition partition_uniform(const Dataset& data, int n_shards, uint64_t seed);

// Shard-size weights m_k / m.
std::vector<double> shard_weights(const std::vector<Dataset>& shards);

// Concatenation of shards (the dataset of record for global metrics).
Dataset pool(const std::vector<Dataset>& shards);

}  // namespace defed
