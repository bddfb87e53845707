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

#include "r2a/corpus_store.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace r2a {

static_assert(std::endian::native == std::endian::little,
              "vector file I/O assumes a little-endian host");

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kMinRowNorm = 1e-12;

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<Shard> make_shards(std::size_t n, std::size_t count) {
  if (count == 0) count = 1;
  if (n == 0) return {Shard{0, 0}};
  count = std::min(count, n);
  std::vector<Shard> shards;
  shards.reserve(count);
  const std::size_t base = n / count;
  const std::size_t extra = n % count;
  std::size_t begin = 0;
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    shards.push_back({begin, begin + len});
    begin += len;
  }
  return shards;
}

std::size_t default_shard_count() noexcept {
  return std::max(1u, std::thread::hardware_concurrency());
}

CorpusIndex::CorpusIndex(TextCorpus corpus, EmbeddingMatrix embeddings, std::size_t shard_count)
    : corpus_(std::move(corpus)), embeddings_(std::move(embeddings)) {
  if (!embeddings_.normalized) embeddings_ = normalize_rows(std::move(embeddings_));
  shards_ = make_shards(corpus_.size(), shard_count == 0 ? default_shard_count() : shard_count);
  validate();
}

CorpusIndex::CorpusIndex(TextCorpus corpus, EmbeddingMatrix embeddings, std::vector<Shard> shards)
    : corpus_(std::move(corpus)), embeddings_(std::move(embeddings)), shards_(std::move(shards)) {
  if (!embeddings_.normalized) embeddings_ = normalize_rows(std::move(embeddings_));
  validate();
}

void CorpusIndex::validate() const {
  if (embeddings_.count() != corpus_.size()) {
    throw ArgumentError("row count mismatch: " + std::to_string(embeddings_.count()) +
                        " embeddings for " + std::to_string(corpus_.size()) + " texts");
  }
  for (std::size_t i = 0; i < corpus_.size(); ++i) {
    if (corpus_.entries[i].id != static_cast<std::int64_t>(i)) {
      throw ArgumentError("corpus ids are not contiguous at position " + std::to_string(i));
    }
  }
  if (!embeddings_.rows.allFinite()) throw ArgumentError("embeddings contain NaN or infinity");
  std::size_t expect = 0;
  for (const auto& s : shards_) {
    if (s.begin != expect || s.end < s.begin) {
      throw ArgumentError("shards do not partition the corpus rows");
    }
    expect = s.end;
  }
  if (expect != corpus_.size()) throw ArgumentError("shards do not cover all corpus rows");
}

CorpusIndex CorpusIndex::with_shards(std::size_t shard_count) const {
  return CorpusIndex(corpus_, embeddings_, make_shards(size(), shard_count));
}

// ---------------------------------------------------------------------------

TextCorpus ingest_texts(std::span<const std::string> lines) {
  TextCorpus corpus;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!is_valid_utf8(lines[i])) {
      throw DecodeError(i + 1, "invalid UTF-8 on line " + std::to_string(i + 1));
    }
    const auto t = trim(lines[i]);
    if (t.empty()) {
      ++corpus.skipped_empty;
      continue;
    }
    corpus.entries.push_back({static_cast<std::int64_t>(corpus.entries.size()), std::string(t)});
  }
  return corpus;
}

TextCorpus ingest_text_file(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  return ingest_texts(lines);
}

EmbeddingMatrix normalize_rows(EmbeddingMatrix m) {
  for (Eigen::Index r = 0; r < m.rows.rows(); ++r) {
    auto row = m.rows.row(r);
    if (!row.allFinite()) {
      throw ArgumentError("row " + std::to_string(r) + " contains NaN or infinity");
    }
    const double norm = row.cast<double>().norm();
    if (norm < kMinRowNorm) {
      throw ArgumentError("row " + std::to_string(r) + " has zero norm");
    }
    row = (row.cast<double>() / norm).cast<float>();
  }
  m.normalized = true;
  return m;
}

double max_norm_deviation(const EmbeddingMatrix& m) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < m.rows.rows(); ++r) {
    worst = std::max(worst, std::abs(m.rows.row(r).cast<double>().norm() - 1.0));
  }
  return worst;
}

// ---------------------------------------------------------------------------

void write_vectors(const EmbeddingMatrix& m, const fs::path& path) {
  std::string header;
  header.append(kVectorMagic, 4);
  put<std::uint32_t>(header, kVectorVersion);
  put<std::uint64_t>(header, m.count());
  put<std::uint32_t>(header, static_cast<std::uint32_t>(m.dim()));
  put<std::uint32_t>(header, m.normalized ? kFlagNormalized : 0u);

  auto out = open_out(path, std::ios::binary);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(m.rows.data()),
            static_cast<std::streamsize>(m.count() * m.dim() * sizeof(float)));
  if (!out) throw IoError("short write to " + path.string());
}

bool has_vector_magic(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in && std::memcmp(magic, kVectorMagic, 4) == 0;
}

EmbeddingMatrix read_vectors(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  char header[kVectorHeaderBytes];
  in.read(header, kVectorHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kVectorHeaderBytes)) {
    throw FormatError("header", path.string() + ": truncated header");
  }
  if (std::memcmp(header, kVectorMagic, 4) != 0) {
    throw FormatError("magic", path.string() + ": bad magic bytes");
  }
  const auto version = get<std::uint32_t>(header + 4);
  if (version != kVectorVersion) {
    throw FormatError("version", path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto n = get<std::uint64_t>(header + 8);
  const auto d = get<std::uint32_t>(header + 16);
  const auto flags = get<std::uint32_t>(header + 20);
  if (flags & ~kFlagNormalized) {
    throw FormatError("flags", path.string() + ": unknown flag bits");
  }

  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  const std::uint64_t payload = file_size - kVectorHeaderBytes;
  // Guard the multiplication before comparing sizes.
  if (d != 0 && n > payload / (std::uint64_t{d} * sizeof(float)) + 1) {
    throw FormatError("payload", path.string() + ": size mismatch, header declares N=" +
                                     std::to_string(n) + " d=" + std::to_string(d));
  }
  const std::uint64_t expected = n * d * sizeof(float);
  if (payload != expected) {
    throw FormatError("payload", path.string() + ": size mismatch, header declares N=" +
                                     std::to_string(n) + " d=" + std::to_string(d) + " (" +
                                     std::to_string(expected) + " bytes) but payload has " +
                                     std::to_string(payload) + " bytes");
  }

  EmbeddingMatrix m;
  m.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  m.normalized = (flags & kFlagNormalized) != 0;
  in.seekg(kVectorHeaderBytes, std::ios::beg);
  in.read(reinterpret_cast<char*>(m.rows.data()), static_cast<std::streamsize>(expected));
  if (!in) throw IoError("short read from " + path.string());
  return m;
}

void write_texts(const TextCorpus& corpus, const fs::path& path) {
  auto out = open_out(path);
  for (const auto& e : corpus.entries) {
    out << json{{"id", e.id}, {"text", e.text}}.dump() << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

TextCorpus read_texts(const fs::path& path) {
  auto in = open_in(path);
  TextCorpus corpus;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DecodeError(line_no, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("id") || !j.contains("text") || !j["id"].is_number_integer() ||
        !j["text"].is_string()) {
      throw FormatError("text", path.string() + ":" + std::to_string(line_no) +
                                    ": expected {\"id\": int, \"text\": string}");
    }
    const auto id = j["id"].get<std::int64_t>();
    if (id != static_cast<std::int64_t>(corpus.entries.size())) {
      throw FormatError("id", path.string() + ":" + std::to_string(line_no) +
                                  ": ids must be contiguous from 0");
    }
    corpus.entries.push_back({id, j["text"].get<std::string>()});
  }
  return corpus;
}

void save_index(const CorpusIndex& index, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_vectors(index.embeddings(), dir / "vectors.r2av");
  write_texts(index.corpus(), dir / "texts.jsonl");

  json shards = json::array();
  for (const auto& s : index.shards()) shards.push_back({s.begin, s.end});
  json meta{{"count", index.size()}, {"dim", index.dim()}, {"shards", shards}};
  auto out = open_out(dir / "index.json");
  out << meta.dump(2) << '\n';
}

CorpusIndex load_index(const fs::path& dir, std::size_t shard_count) {
  auto vectors = read_vectors(dir / "vectors.r2av");
  auto texts = read_texts(dir / "texts.jsonl");
  if (vectors.count() != texts.size()) {
    throw FormatError("count", dir.string() + ": vector file has " +
                                   std::to_string(vectors.count()) + " rows but sidecar has " +
                                   std::to_string(texts.size()) + " texts");
  }
  if (!vectors.normalized) {
    throw FormatError("flags", dir.string() + ": index vectors are not flagged normalized");
  }
  if (max_norm_deviation(vectors) > 1e-4) {
    throw FormatError("payload", dir.string() + ": rows flagged normalized are not unit norm");
  }

  const auto meta_path = dir / "index.json";
  if (shard_count == 0 && fs::exists(meta_path)) {
    auto in = open_in(meta_path);
    json meta;
    try {
      meta = json::parse(in);
    } catch (const json::parse_error& e) {
      throw FormatError("shards", meta_path.string() + ": " + e.what());
    }
    std::vector<Shard> shards;
    for (const auto& s : meta.at("shards")) {
      shards.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    }
    return CorpusIndex(std::move(texts), std::move(vectors), std::move(shards));
  }
  return CorpusIndex(std::move(texts), std::move(vectors), shard_count);
}

}  // namespace r2a
