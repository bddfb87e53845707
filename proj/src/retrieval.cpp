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

#include "r2a/retrieval.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "r2a/rng.hpp"

namespace r2a {

namespace {

/// Bounded heap whose front is the current worst of the kept hits.
class TopKHeap {
 public:
  explicit TopKHeap(std::size_t k) : k_(k) { hits_.reserve(k); }

  void offer(std::int64_t id, float score) {
    const Hit h{id, score, 0};
    if (hits_.size() < k_) {
      hits_.push_back(h);
      std::push_heap(hits_.begin(), hits_.end(), hit_before);
    } else if (hit_before(h, hits_.front())) {
      std::pop_heap(hits_.begin(), hits_.end(), hit_before);
      hits_.back() = h;
      std::push_heap(hits_.begin(), hits_.end(), hit_before);
    }
  }

  std::vector<Hit>& hits() noexcept { return hits_; }

 private:
  std::size_t k_;
  std::vector<Hit> hits_;
};

void scan_shard(const CorpusIndex& index, const Shard& shard, const float* q, TopKHeap& heap) {
  const std::size_t d = index.dim();
  for (std::size_t i = shard.begin; i < shard.end; ++i) {
    heap.offer(static_cast<std::int64_t>(i), lane_dot(index.row_data(i), q, d));
  }
}

VectorXf prepare_query(std::span<const float> query, std::size_t dim, bool normalized) {
  if (query.size() != dim) {
    throw ArgumentError("query dim " + std::to_string(query.size()) + " does not match index dim " +
                        std::to_string(dim));
  }
  Eigen::Map<const VectorXf> q(query.data(), static_cast<Eigen::Index>(query.size()));
  if (!q.allFinite()) throw ArgumentError("query contains NaN or infinity");
  if (normalized) return q;
  const double norm = q.cast<double>().norm();
  if (norm < 1e-12) throw ArgumentError("query has zero norm");
  return (q.cast<double>() / norm).cast<float>();
}

std::vector<Hit> topk_prepared(const CorpusIndex& index, const VectorXf& q, std::size_t k,
                               const ScanOptions& opts) {
  if (k == 0) throw ArgumentError("k must be positive");
  if (index.empty()) throw ArgumentError("index is empty");

  const auto& shards = index.shards();
  std::vector<TopKHeap> heaps;
  heaps.reserve(shards.size());
  for (std::size_t s = 0; s < shards.size(); ++s) heaps.emplace_back(std::min(k, shards[s].size()));

  std::size_t workers = opts.threads == 0 ? shards.size() : std::min(opts.threads, shards.size());
  if (workers <= 1) {
    for (std::size_t s = 0; s < shards.size(); ++s) scan_shard(index, shards[s], q.data(), heaps[s]);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < shards.size(); s += workers) {
          scan_shard(index, shards[s], q.data(), heaps[s]);
        }
      });
    }
  }

  std::vector<Hit> merged;
  for (auto& h : heaps) merged.insert(merged.end(), h.hits().begin(), h.hits().end());
  const std::size_t take = std::min(k, merged.size());
  std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(take), merged.end(),
                    hit_before);
  merged.resize(take);
  for (std::size_t r = 0; r < merged.size(); ++r) merged[r].rank = static_cast<std::int32_t>(r + 1);
  return merged;
}

}  // namespace

FrameFeatures read_frames(const std::filesystem::path& path, std::string video_id) {
  auto m = read_vectors(path);
  FrameFeatures f;
  f.video_id = std::move(video_id);
  f.frames = std::move(m.rows);
  f.normalized = m.normalized;
  return f;
}

std::vector<std::size_t> uniform_frame_indices(std::size_t total, std::size_t wanted) {
  if (wanted == 0) throw ArgumentError("number of frames to sample must be positive");
  std::vector<std::size_t> idx;
  if (wanted >= total) {
    for (std::size_t i = 0; i < total; ++i) idx.push_back(i);
    return idx;
  }
  for (std::size_t i = 0; i < wanted; ++i) idx.push_back(((2 * i + 1) * total) / (2 * wanted));
  return idx;
}

FrameFeatures sample_frames(const FrameFeatures& f, std::size_t wanted) {
  const auto idx = uniform_frame_indices(f.num_frames(), wanted);
  if (idx.size() == f.num_frames()) return f;
  FrameFeatures out;
  out.video_id = f.video_id;
  out.normalized = f.normalized;
  out.frames.resize(static_cast<Eigen::Index>(idx.size()), f.frames.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.frames.row(static_cast<Eigen::Index>(i)) = f.frames.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

std::vector<Hit> topk_frame(const CorpusIndex& index, std::span<const float> query, std::size_t k,
                            const ScanOptions& opts) {
  if (k == 0) throw ArgumentError("k must be positive");
  return topk_prepared(index, prepare_query(query, index.dim(), false), k, opts);
}

VideoRetrieval retrieve_video(const CorpusIndex& index, const FrameFeatures& frames, std::size_t k,
                              const ScanOptions& opts) {
  if (k == 0) throw ArgumentError("k must be positive");
  if (frames.num_frames() == 0) throw ArgumentError("video " + frames.video_id + " has no frames");
  if (frames.dim() != index.dim()) {
    throw ArgumentError("frame dim " + std::to_string(frames.dim()) + " does not match index dim " +
                        std::to_string(index.dim()));
  }
  VideoRetrieval out;
  out.k = k;
  out.per_frame.reserve(frames.num_frames());
  for (Eigen::Index t = 0; t < frames.frames.rows(); ++t) {
    const VectorXf row = frames.frames.row(t).transpose();
    const auto q = prepare_query(std::span<const float>(row.data(), frames.dim()), index.dim(),
                                 frames.normalized);
    out.per_frame.push_back(topk_prepared(index, q, k, opts));
  }
  return out;
}

std::vector<FrameCaption> dedup_captions(const VideoRetrieval& r, const TextCorpus& corpus) {
  std::vector<FrameCaption> out;
  std::unordered_set<std::string_view> seen;
  for (std::size_t t = 0; t < r.per_frame.size(); ++t) {
    for (const auto& hit : r.per_frame[t]) {
      const std::string& text = corpus.text(static_cast<std::size_t>(hit.corpus_id));
      if (seen.insert(text).second) out.push_back({t + 1, text});
    }
  }
  return out;
}

std::vector<std::int64_t> random_sample_ids(const TextCorpus& corpus, std::size_t k,
                                            std::uint64_t seed) {
  const std::size_t n = corpus.size();
  if (k > n) {
    throw ArgumentError("cannot sample " + std::to_string(k) + " of " + std::to_string(n) +
                        " entries without replacement");
  }
  std::vector<std::int64_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(k);
  return ids;
}

std::vector<std::string> random_sample(const TextCorpus& corpus, std::size_t k, std::uint64_t seed) {
  std::vector<std::string> out;
  for (auto id : random_sample_ids(corpus, k, seed)) {
    out.push_back(corpus.text(static_cast<std::size_t>(id)));
  }
  return out;
}

std::string retrieval_to_jsonl(const VideoRetrieval& r, const TextCorpus& corpus) {
  std::ostringstream os;
  for (std::size_t t = 0; t < r.per_frame.size(); ++t) {
    nlohmann::json hits = nlohmann::json::array();
    for (const auto& h : r.per_frame[t]) {
      hits.push_back({{"id", h.corpus_id},
                      {"score", h.score},
                      {"text", corpus.text(static_cast<std::size_t>(h.corpus_id))}});
    }
    os << nlohmann::json{{"frame", t + 1}, {"hits", std::move(hits)}}.dump() << '\n';
  }
  return os.str();
}

}  // namespace r2a
