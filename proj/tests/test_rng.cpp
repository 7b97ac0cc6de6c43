#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "defed/rng.hpp"

using namespace defed;

TEST_CASE("mix64 is stable across platforms") {
  // Anchor values: any change here silently breaks every stored trace.
  CHECK(mix64(0) == 0ull);
  CHECK(mix64(1) == 6238072747940578789ull);
  CHECK(derive_stream(1, 2, 3, 4) == 10571037075555600323ull);
}

TEST_CASE("generator sequences are reproducible") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  CHECK(c.next_u64() == 15021278609987233951ull);
  CHECK(c.next_u64() == 5881210131331364753ull);
  CHECK(c.next_u64() == 18149643915985481100ull);
  Rng d(42);
  CHECK(d.next_double() == doctest::Approx(0.81430514512290986).epsilon(1e-15));
  CHECK(d.next_double() == doctest::Approx(0.31882104006166112).epsilon(1e-15));
}

TEST_CASE("distinct stream keys give distinct streams") {
  const uint64_t base = derive_stream(7, 0, 0, kStreamBatch);
  CHECK(base != derive_stream(7, 1, 0, kStreamBatch));
  CHECK(base != derive_stream(7, 0, 1, kStreamBatch));
  CHECK(base != derive_stream(7, 0, 0, kStreamSelect));
  CHECK(base != derive_stream(8, 0, 0, kStreamBatch));
}

TEST_CASE("uniform doubles live in [0,1) with the right mean") {
  Rng rng(123);
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_double();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // 4-sigma band around 1/2 for the mean of n U[0,1) draws.
  CHECK(std::abs(sum / n - 0.5) < 4.0 / std::sqrt(12.0 * n));
}

TEST_CASE("normal draws have unit variance and zero mean") {
  Rng rng(321);
  const int n = 100000;
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.next_normal();
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("bounded draws respect the bound and cover it uniformly") {
  Rng rng(555);
  CHECK(rng.next_below(1) == 0);
  std::vector<long> counts(4, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const uint64_t v = rng.next_below(4);
    REQUIRE(v < 4);
    ++counts[static_cast<size_t>(v)];
  }
  for (const long c : counts) CHECK(std::abs(c - n / 4) < 500);
}

TEST_CASE("sampling without replacement yields distinct in-range indices") {
  Rng rng(99);
  const std::vector<int> picked = sample_without_replacement(50, 12, rng);
  REQUIRE(picked.size() == 12);
  std::set<int> unique(picked.begin(), picked.end());
  CHECK(unique.size() == 12);
  for (const int i : picked) {
    CHECK(i >= 0);
    CHECK(i < 50);
  }

  // k = population gives a permutation.
  Rng rng2(99);
  const std::vector<int> all = sample_without_replacement(8, 8, rng2);
  std::set<int> cover(all.begin(), all.end());
  CHECK(cover.size() == 8);
}

TEST_CASE("every index is equally likely to be drawn first") {
  // First element of a size-1 sample is uniform over the population.
  std::vector<long> counts(5, 0);
  for (int trial = 0; trial < 20000; ++trial) {
    Rng rng(derive_stream(1234, static_cast<uint64_t>(trial), 0, kStreamSelect));
    ++counts[static_cast<size_t>(sample_without_replacement(5, 1, rng)[0])];
  }
  for (const long c : counts) CHECK(std::abs(c - 4000) < 300);
}
