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
#include <string_view>
#include <utility>
#include <vector>

#include "r2a/linalg.hpp"
#include "r2a/text.hpp"

namespace r2a {

struct CorpusEntry {
  std::int64_t id = 0;
  std::string text;

  bool operator==(const CorpusEntry&) const = default;
};

/// Ordered caption corpus. Ids are contiguous 0..N-1.
struct TextCorpus {
  std::vector<CorpusEntry> entries;
  /// Lines dropped at ingest because they were blank after trimming.
  std::size_t skipped_empty = 0;

  std::size_t size() const noexcept { return entries.size(); }
  const std::string& text(std::size_t id) const { return entries.at(id).text; }
  bool operator==(const TextCorpus& o) const { return entries == o.entries; }
};

/// N x d row-major float matrix plus the normalized flag.
struct EmbeddingMatrix {
  RowMatrixXf rows;
  bool normalized = false;

  std::size_t count() const noexcept { return static_cast<std::size_t>(rows.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(rows.cols()); }
};

/// Half-open row range [begin, end).
struct Shard {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool operator==(const Shard&) const = default;
};

/// Splits [0, n) into `count` contiguous, ascending, near-equal ranges.
/// Never yields empty shards unless n == 0 (then a single empty shard).
std::vector<Shard> make_shards(std::size_t n, std::size_t count);

/// Immutable once built; safe for concurrent readers.
class CorpusIndex {
 public:
  CorpusIndex() = default;

  /// Validates the index invariants. Normalizes `embeddings` if it is not
  /// already flagged normalized. shard_count == 0 means hardware threads.
  CorpusIndex(TextCorpus corpus, EmbeddingMatrix embeddings, std::size_t shard_count = 0);
  CorpusIndex(TextCorpus corpus, EmbeddingMatrix embeddings, std::vector<Shard> shards);

  const TextCorpus& corpus() const noexcept { return corpus_; }
  const EmbeddingMatrix& embeddings() const noexcept { return embeddings_; }
  const std::vector<Shard>& shards() const noexcept { return shards_; }

  std::size_t size() const noexcept { return corpus_.size(); }
  std::size_t dim() const noexcept { return embeddings_.dim(); }
  bool empty() const noexcept { return size() == 0; }

  const float* row_data(std::size_t i) const noexcept {
    return embeddings_.rows.data() + i * embeddings_.dim();
  }

  /// Same data, different shard layout.
  CorpusIndex with_shards(std::size_t shard_count) const;

 private:
  void validate() const;

  TextCorpus corpus_;
  EmbeddingMatrix embeddings_;
  std::vector<Shard> shards_;
};

/// Default shard count: available hardware threads (at least 1).
std::size_t default_shard_count() noexcept;

/// Trims, skips blank lines, assigns ids in order.
/// Throws DecodeError naming the 1-based line for invalid UTF-8.
TextCorpus ingest_texts(std::span<const std::string> lines);
TextCorpus ingest_text_file(const std::filesystem::path& path);

/// Divides every row by its L2 norm. Throws ArgumentError naming the row when
/// a norm is below 1e-12 or a row is non-finite.
EmbeddingMatrix normalize_rows(EmbeddingMatrix m);

/// Max over rows of | ||row|| - 1 |.
double max_norm_deviation(const EmbeddingMatrix& m);

// ---------------------------------------------------------------------------
// Persistence.
//
// Vector file, little-endian:
//   "R2AV" | u32 version | u64 N | u32 d | u32 flags (bit0 normalized) |
//   N*d f32 row-major
// Text sidecar: JSONL {"id": i, "text": "..."}.
// An index directory holds vectors.r2av, texts.jsonl and index.json (shards).

inline constexpr char kVectorMagic[4] = {'R', '2', 'A', 'V'};
inline constexpr std::uint32_t kVectorVersion = 1;
inline constexpr std::size_t kVectorHeaderBytes = 4 + 4 + 8 + 4 + 4;
inline constexpr std::uint32_t kFlagNormalized = 1u;

void write_vectors(const EmbeddingMatrix& m, const std::filesystem::path& path);
EmbeddingMatrix read_vectors(const std::filesystem::path& path);
/// True if the file starts with the vector magic.
bool has_vector_magic(const std::filesystem::path& path);

void write_texts(const TextCorpus& corpus, const std::filesystem::path& path);
TextCorpus read_texts(const std::filesystem::path& path);

void save_index(const CorpusIndex& index, const std::filesystem::path& dir);
/// shard_count == 0 keeps the persisted layout (or the default if none).
CorpusIndex load_index(const std::filesystem::path& dir, std::size_t shard_count = 0);

}  // namespace r2a
