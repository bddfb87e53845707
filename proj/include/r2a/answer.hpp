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

#include <chrono>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "r2a/context.hpp"
#include "r2a/linalg.hpp"

namespace r2a {

// ---------------------------------------------------------------------------
// Backend contracts.

/// Masked-LM scorer. Implementations must tolerate concurrent calls.
class Scorer {
 public:
  virtual ~Scorer() = default;

  /// One finite log-probability per candidate for filling the `mask_count`
  /// masks of `prompt` (already rendered with mask_surface_form()). For
  /// mask_count > 1 the value is the mean per-token log-probability.
  virtual std::vector<double> score(std::string_view prompt, std::size_t mask_count,
                                    std::span<const std::string> candidates) const = 0;

  virtual std::size_t count_tokens(std::string_view text) const = 0;
  virtual std::string mask_surface_form() const = 0;
};

/// Text and frame encoders, used when building an index or frame files
/// without precomputed embeddings.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingMatrix embed_texts(std::span<const std::string> texts) const = 0;
  virtual EmbeddingMatrix embed_frames(const std::string& video_id, const std::string& frames_path,
                                       std::size_t num_frames) const = 0;
};

// ---------------------------------------------------------------------------
// Hermetic mocks.

/// Deterministic unit vector for `text`: SplitMix64 seeded with FNV-1a-64 of
/// the UTF-8 bytes, u = next/2^64 * 2 - 1 per component, L2-normalized in
/// double precision.
VectorXf mock_embed(std::string_view text, std::size_t dim);

inline constexpr std::size_t kMockScoreDim = 64;

/// log((cos(mock_embed(prompt), mock_embed(c)) + 1) / 2 + 1e-9) per candidate.
std::vector<double> mock_score(std::string_view prompt, std::span<const std::string> candidates);

class MockScorer final : public Scorer {
 public:
  std::vector<double> score(std::string_view prompt, std::size_t mask_count,
                            std::span<const std::string> candidates) const override;
  std::size_t count_tokens(std::string_view text) const override;
  std::string mask_surface_form() const override { return "[MASK]"; }
};

/// Content-aware stand-in for a masked LM: each candidate's log-probability
/// is its Laplace-smoothed share of whole-word occurrences in the prompt text
/// after the mask. Lets hermetic runs show whether retrieved context matters.
class LexicalScorer final : public Scorer {
 public:
  std::vector<double> score(std::string_view prompt, std::size_t mask_count,
                            std::span<const std::string> candidates) const override;
  std::size_t count_tokens(std::string_view text) const override;
  std::string mask_surface_form() const override { return "[MASK]"; }
};

class MockEmbedder final : public Embedder {
 public:
  explicit MockEmbedder(std::size_t dim) : dim_(dim) {}
  EmbeddingMatrix embed_texts(std::span<const std::string> texts) const override;
  /// Row t (0-based) is mock_embed(video_id + ":" + t).
  EmbeddingMatrix embed_frames(const std::string& video_id, const std::string& frames_path,
                               std::size_t num_frames) const override;

 private:
  std::size_t dim_;
};

// ---------------------------------------------------------------------------
// HTTP bridge to the encoder adapter service.

struct HttpOptions {
  std::string endpoint;  // e.g. "http://127.0.0.1:8700"
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::milliseconds timeout{30000};
  std::string mask_surface = "[MASK]";
};

/// JSON over HTTP client for the /v1/* adapter protocol. Every request is
/// idempotent; transport failures and 5xx/429 responses are retried with
/// exponential backoff. Throws TransportError when the service cannot be
/// reached and BackendError for other non-2xx responses.
class HttpClient {
 public:
  explicit HttpClient(HttpOptions opts);

  std::string post(const std::string& path, const std::string& body) const;
  std::string get(const std::string& path) const;
  const HttpOptions& options() const noexcept { return opts_; }

 private:
  template <class Fn>
  std::string with_retries(const std::string& path, Fn&& call) const;

  HttpOptions opts_;
  std::string scheme_host_port_;
};

class HttpScorer final : public Scorer {
 public:
  explicit HttpScorer(HttpOptions opts) : client_(std::move(opts)) {}
  std::vector<double> score(std::string_view prompt, std::size_t mask_count,
                            std::span<const std::string> candidates) const override;
  std::size_t count_tokens(std::string_view text) const override;
  std::string mask_surface_form() const override { return client_.options().mask_surface; }

  /// GET /health, returning the "backend" field.
  std::string health() const;

 private:
  HttpClient client_;
};

class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(HttpOptions opts) : client_(std::move(opts)) {}
  EmbeddingMatrix embed_texts(std::span<const std::string> texts) const override;
  EmbeddingMatrix embed_frames(const std::string& video_id, const std::string& frames_path,
                               std::size_t num_frames) const override;

 private:
  HttpClient client_;
};

/// "mock", "lexical" or "http:URL".
std::unique_ptr<Scorer> make_scorer(std::string_view spec);
/// "mock", "mock:DIM" or "http:URL".
std::unique_ptr<Embedder> make_embedder(std::string_view spec, std::size_t default_dim = 64);

// ---------------------------------------------------------------------------
// Answer selection.

/// Distinct, non-empty answers (distinct after normalize_answer).
class CandidateSet {
 public:
  CandidateSet() = default;
  explicit CandidateSet(std::vector<std::string> answers);

  static CandidateSet from_file(const std::filesystem::path& path);

  const std::vector<std::string>& answers() const noexcept { return answers_; }
  std::size_t size() const noexcept { return answers_.size(); }
  bool empty() const noexcept { return answers_.empty(); }

 private:
  std::vector<std::string> answers_;
};

enum class Aggregation { kMean, kSum };

struct AnswerResult {
  std::string answer;
  double log_prob = 0.0;
  /// Candidate order preserved.
  std::vector<std::pair<std::string, double>> all_scores;
  /// The single-mask prompt as sent to the scorer.
  std::string prompt;
};

/// Argmax over candidates of the scorer's log-probability. Candidates are
/// grouped by token count m; each group is scored in one call against the
/// prompt re-rendered with m masks. Ties go to the earlier candidate.
AnswerResult select_answer(const AnswerPrompt& prompt, const CandidateSet& candidates,
                           const Scorer& scorer, Aggregation aggregation = Aggregation::kMean);

}  // namespace r2a
