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

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "r2a/answer.hpp"
#include "r2a/eval.hpp"

namespace r2a::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, const std::string& content);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);
std::string read_file(const std::filesystem::path& path);

/// Unit rows drawn from SplitMix64(seed), for property tests.
RowMatrixXf random_unit_rows(std::size_t n, std::size_t d, std::uint64_t seed);

/// Index over texts "t<i>" with the given rows.
CorpusIndex index_from_rows(const RowMatrixXf& rows, std::size_t shards = 1);

// ---------------------------------------------------------------------------
// 20-record evaluation fixture: 10 topics with three captions each plus ten
// distractor captions; video<i> has 4 frames near topic i's captions; two
// questions per video.

struct EvalFixture {
  static constexpr std::size_t kDim = 64;
  static constexpr std::size_t kFrames = 4;
  static constexpr std::size_t kK = 2;
  static constexpr double kNoise = 0.6;

  std::vector<std::string> captions;
  std::vector<std::string> answers;  // topic order
  CorpusIndex index;
  InMemoryFrameSource frames;
  std::vector<FrameFeatures> videos;
  std::vector<QARecord> records;
  CandidateSet candidates;

  PipelineConfig pipeline() const;
};

EvalFixture make_eval_fixture();

/// Writes texts.txt, embeddings.r2av, frames/video<i>.r2av, manifest.jsonl,
/// dataset.jsonl and candidates.txt, and builds index/ via save_index.
void write_eval_fixture(const EvalFixture& f, const std::filesystem::path& dir);

/// Recovers the gold answer from the topic of the earliest topic caption in the
/// prompt's hints. When `rigged(gold, question)` holds the gold answer scores 0
/// and the rest -1; otherwise the gold answer scores -2 and the rest -1.
class RiggedScorer final : public Scorer {
 public:
  using Pick = std::function<bool(const std::string& gold, const std::string& question)>;
  RiggedScorer(const EvalFixture& f, Pick rigged);

  std::vector<double> score(std::string_view prompt, std::size_t mask_count,
                            std::span<const std::string> candidates) const override;
  std::size_t count_tokens(std::string_view text) const override;
  std::string mask_surface_form() const override { return "[MASK]"; }

 private:
  const EvalFixture& f_;
  Pick rigged_;
};

// ---------------------------------------------------------------------------

/// In-process stand-in for the encoder adapter in mock mode, serving the /v1/*
/// wire protocol from the in-process mocks on a loopback port.
class FakeAdapter {
 public:
  FakeAdapter();
  ~FakeAdapter();

  std::string endpoint() const;
  /// The next `n` requests fail with `status` before being served normally.
  void fail_next(int n, int status);
  int requests() const noexcept { return requests_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::atomic<int> requests_{0};
  std::atomic<int> failures_left_{0};
  std::atomic<int> failure_status_{500};
};

/// A loopback URL with nothing listening.
std::string unreachable_endpoint();

}  // namespace r2a::testing
