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
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "r2a/answer.hpp"
#include "r2a/context.hpp"
#include "r2a/retrieval.hpp"
#include "r2a/text.hpp"

namespace r2a {

struct QARecord {
  std::string video_id;
  std::string question;
  std::string answer;
  std::optional<std::string> type;
};

/// JSONL {"video_id", "question", "answer", "type"?}.
std::vector<QARecord> load_dataset(const std::filesystem::path& path);

/// Resolves a video id to its frame features. Throws when unknown.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual FrameFeatures frames_for(const std::string& video_id) const = 0;
};

class InMemoryFrameSource final : public FrameSource {
 public:
  void add(FrameFeatures f);
  FrameFeatures frames_for(const std::string& video_id) const override;

 private:
  std::unordered_map<std::string, FrameFeatures> videos_;
};

/// Frame manifest JSONL {"video_id", "path", "num_frames"}. Relative paths
/// resolve against the manifest's directory; files are read on demand.
class ManifestFrameSource final : public FrameSource {
 public:
  explicit ManifestFrameSource(const std::filesystem::path& manifest);
  FrameFeatures frames_for(const std::string& video_id) const override;

 private:
  struct Entry {
    std::filesystem::path path;
    std::size_t num_frames = 0;
  };
  std::unordered_map<std::string, Entry> entries_;
};

enum class ContextMode { kRetrieval, kRandom };

struct PipelineConfig {
  std::size_t k = 10;
  std::string prompt_word{kDefaultPromptWord};
  std::size_t token_budget = 500;
  ContextMode mode = ContextMode::kRetrieval;
  std::uint64_t seed = 0;
  ScanOptions scan{};
  Aggregation aggregation = Aggregation::kMean;
};

struct VideoAnswer {
  AnswerResult result;
  AnswerPrompt prompt;  // after truncation
  std::vector<FrameCaption> captions;
};

/// Per-frame random captions standing in for retrieval hits (score 0), with
/// one substream per (seed, video, frame).
VideoRetrieval random_context(const TextCorpus& corpus, std::size_t num_frames, std::size_t k,
                              std::uint64_t seed, const std::string& video_id);

/// retrieve (or random-sample) -> dedup -> build_context -> build_answer_prompt
/// -> truncate_to_budget -> select_answer.
VideoAnswer answer_video(const CorpusIndex& index, const FrameFeatures& frames,
                         const std::string& question, const CandidateSet& candidates,
                         const Scorer& scorer, const PipelineConfig& cfg);

// ---------------------------------------------------------------------------

bool exact_match(std::string_view pred, std::string_view gold, bool strict = false);

struct TypeStats {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::optional<double> accuracy() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(total);
  }
  bool operator==(const TypeStats&) const = default;
};

struct ItemResult {
  std::string video_id;
  std::string question;
  std::string prediction;
  std::string gold;
  std::optional<std::string> type;
  bool correct = false;
  bool operator==(const ItemResult&) const = default;
};

struct RecordError {
  std::size_t index = 0;  // position in the input records
  std::string video_id;
  std::string message;
  bool operator==(const RecordError&) const = default;
};

struct EvalReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::map<std::string, TypeStats> per_type;
  std::vector<ItemResult> per_item;
  std::vector<RecordError> errors;

  /// nullopt when total == 0.
  std::optional<double> accuracy() const {
    return TypeStats{total, correct}.accuracy();
  }
};

struct EvalOptions {
  bool strict = false;        // skip answer normalization
  bool fail_fast = false;     // rethrow the first per-record error
  bool keep_items = true;     // fill per_item
  std::size_t threads = 1;    // records evaluated concurrently
};

EvalReport evaluate(std::span<const QARecord> records, const CorpusIndex& index,
                    const FrameSource& frames, const CandidateSet& candidates, const Scorer& scorer,
                    const PipelineConfig& cfg, const EvalOptions& opts = {});

/// Tallies totals and per-type counts from per-item outcomes.
EvalReport tally(std::vector<ItemResult> items, std::vector<RecordError> errors = {});

nlohmann::json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

struct RunDelta {
  double overall = 0.0;                   // accuracy(a) - accuracy(b)
  std::map<std::string, double> per_type;  // same, per answer type
  std::size_t flipped = 0;                 // items whose correctness differs
};

/// Requires per-item data for the same record multiset in both reports.
RunDelta compare_runs(const EvalReport& a, const EvalReport& b);
nlohmann::json delta_to_json(const RunDelta& d);

}  // namespace r2a
