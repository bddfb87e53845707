// Copyright 2026 The R2A Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "r2a/retrieval.hpp"

namespace r2a {

/// N x d index of uniform random unit rows, texts "synthetic-<i>". Rows come
/// from one SplitMix64 stream so the same (n, d, seed) is reproducible.
CorpusIndex synthetic_index(std::size_t n, std::size_t d, std::uint64_t seed, std::size_t shards = 1);

/// `count` random unit query vectors of dimension d.
RowMatrixXf synthetic_queries(std::size_t count, std::size_t d, std::uint64_t seed);

struct BenchOptions {
  std::size_t queries = 100;
  std::size_t k = 10;
  std::size_t threads = 1;
  std::size_t repeat = 1;
  std::uint64_t seed = 7;
};

struct BenchResult {
  std::size_t rows = 0;
  std::size_t dim = 0;
  BenchOptions options;
  std::vector<double> latencies_ms;  // one per timed query
  double median_ms = 0.0;
  double p99_ms = 0.0;
  double queries_per_second = 0.0;
  /// Top-k ids of every query from the last repetition, for invariance checks.
  std::vector<std::vector<std::int64_t>> last_ids;
};

/// Times topk_frame per query. With queries == 0 returns an empty result.
BenchResult run_bench(const CorpusIndex& index, const BenchOptions& opts);

nlohmann::json bench_to_json(const BenchResult& r);

}  // namespace r2a
