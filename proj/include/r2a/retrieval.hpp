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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "r2a/corpus_store.hpp"

namespace r2a {

/// Per-frame visual embeddings of one video (L x d).
struct FrameFeatures {
  std::string video_id;
  RowMatrixXf frames;
  bool normalized = false;

  std::size_t num_frames() const noexcept { return static_cast<std::size_t>(frames.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(frames.cols()); }
};

/// Reads an R2AV vector file as the frames of `video_id`.
FrameFeatures read_frames(const std::filesystem::path& path, std::string video_id = {});

/// Indices floor((i + 0.5) * T / L), i = 0..L-1, of L frames sampled
/// uniformly from T. L >= T yields 0..T-1.
std::vector<std::size_t> uniform_frame_indices(std::size_t total, std::size_t wanted);

/// Keeps the rows chosen by uniform_frame_indices(num_frames(), wanted).
FrameFeatures sample_frames(const FrameFeatures& f, std::size_t wanted);

struct Hit {
  std::int64_t corpus_id = 0;
  float score = 0.0f;
  std::int32_t rank = 0;  // 1-based within its frame

  bool operator==(const Hit&) const = default;
};

/// Hit ordering used everywhere: score descending, then corpus_id ascending.
inline bool hit_before(const Hit& a, const Hit& b) noexcept {
  return a.score > b.score || (a.score == b.score && a.corpus_id < b.corpus_id);
}

struct VideoRetrieval {
  std::vector<std::vector<Hit>> per_frame;
  std::size_t k = 0;
};

struct ScanOptions {
  /// Worker threads for the shard scan; 0 = one per shard.
  std::size_t threads = 1;
};

/// Exact top-k over the index for one query vector. The query is normalized on
/// entry. Output depends only on (index data, query, k), never on the shard
/// layout or thread count.
std::vector<Hit> topk_frame(const CorpusIndex& index, std::span<const float> query,
                            std::size_t k, const ScanOptions& opts = {});

template <class Derived>
std::vector<Hit> topk_frame(const CorpusIndex& index, const Eigen::MatrixBase<Derived>& query,
                            std::size_t k, const ScanOptions& opts = {}) {
  const VectorXf q = query.template cast<float>();
  return topk_frame(index, std::span<const float>(q.data(), static_cast<std::size_t>(q.size())),
                    k, opts);
}

VideoRetrieval retrieve_video(const CorpusIndex& index, const FrameFeatures& frames,
                              std::size_t k, const ScanOptions& opts = {});

/// One caption tagged with the 1-based frame where it first appeared.
struct FrameCaption {
  std::size_t frame = 0;
  std::string text;

  bool operator==(const FrameCaption&) const = default;
};

/// Video-level dedup by exact text equality, first occurrence wins, frames in
/// order and hits in rank order.
std::vector<FrameCaption> dedup_captions(const VideoRetrieval& r, const TextCorpus& corpus);

/// k distinct corpus ids drawn uniformly without replacement (partial
/// Fisher-Yates over a SplitMix64 stream). Throws ArgumentError if k > N.
std::vector<std::int64_t> random_sample_ids(const TextCorpus& corpus, std::size_t k,
                                            std::uint64_t seed);
std::vector<std::string> random_sample(const TextCorpus& corpus, std::size_t k,
                                       std::uint64_t seed);

/// {"frame": t, "hits": [{"id": i, "score": s, "text": "..."}]} per line,
/// frames numbered from 1.
std::string retrieval_to_jsonl(const VideoRetrieval& r, const TextCorpus& corpus);

}  // namespace r2a
