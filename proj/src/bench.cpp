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

#include "r2a/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "r2a/rng.hpp"

namespace r2a {

namespace {

RowMatrixXf random_unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  RowMatrixXf m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  SplitMix64 rng(seed);
  float* p = m.data();
  for (std::size_t i = 0; i < n * d; ++i) p[i] = static_cast<float>(rng.next_unit() * 2.0 - 1.0);
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r).normalize();
  return m;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  // nearest-rank
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

}  // namespace

CorpusIndex synthetic_index(std::size_t n, std::size_t d, std::uint64_t seed, std::size_t shards) {
  TextCorpus corpus;
  corpus.entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    corpus.entries.push_back({static_cast<std::int64_t>(i), "synthetic-" + std::to_string(i)});
  }
  EmbeddingMatrix m{random_unit_rows(n, d, seed), true};
  return CorpusIndex(std::move(corpus), std::move(m), make_shards(n, shards));
}

RowMatrixXf synthetic_queries(std::size_t count, std::size_t d, std::uint64_t seed) {
  return random_unit_rows(count, d, mix_seed(seed, 0x71756572ULL));
}

BenchResult run_bench(const CorpusIndex& index, const BenchOptions& opts) {
  BenchResult r;
  r.rows = index.size();
  r.dim = index.dim();
  r.options = opts;
  if (opts.queries == 0 || opts.repeat == 0 || index.empty()) return r;

  const RowMatrixXf queries = synthetic_queries(opts.queries, index.dim(), opts.seed);
  const ScanOptions scan{opts.threads};
  using clock = std::chrono::steady_clock;

  const auto wall_start = clock::now();
  for (std::size_t rep = 0; rep < opts.repeat; ++rep) {
    r.last_ids.clear();
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
      const auto t0 = clock::now();
      const auto hits = topk_frame(index, queries.row(q).transpose(), opts.k, scan);
      const auto t1 = clock::now();
      r.latencies_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      std::vector<std::int64_t> ids;
      for (const auto& h : hits) ids.push_back(h.corpus_id);
      r.last_ids.push_back(std::move(ids));
    }
  }
  const double wall_s = std::chrono::duration<double>(clock::now() - wall_start).count();

  r.median_ms = percentile(r.latencies_ms, 0.5);
  r.p99_ms = percentile(r.latencies_ms, 0.99);
  r.queries_per_second = wall_s > 0 ? static_cast<double>(r.latencies_ms.size()) / wall_s : 0.0;
  return r;
}

nlohmann::json bench_to_json(const BenchResult& r) {
  return nlohmann::json{{"rows", r.rows},
                        {"dim", r.dim},
                        {"queries", r.options.queries},
                        {"k", r.options.k},
                        {"threads", r.options.threads},
                        {"repeat", r.options.repeat},
                        {"timed_queries", r.latencies_ms.size()},
                        {"median_ms", r.median_ms},
                        {"p99_ms", r.p99_ms},
                        {"queries_per_second", r.queries_per_second}};
}

}  // namespace r2a
