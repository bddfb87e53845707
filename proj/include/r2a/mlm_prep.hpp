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
#include <span>
#include <string>
#include <vector>

#include "r2a/context.hpp"
#include "r2a/linalg.hpp"
#include "r2a/retrieval.hpp"

namespace r2a {

using TokenId = std::int32_t;

struct MaskingConfig {
  double mask_ratio = 0.5;
  double p_mask = 0.8;
  double p_random = 0.1;
  double p_keep = 0.1;
  std::uint64_t seed = 0;
  std::int64_t vocab_size = 0;
  TokenId mask_token_id = 0;

  /// Throws ArgumentError on out-of-range ratios or branch probabilities that
  /// do not sum to 1 within 1e-9.
  void validate() const;
};

enum class MaskBranch : std::uint8_t { kMask = 0, kRandom = 1, kKeep = 2 };

struct MaskedSequence {
  std::vector<TokenId> input_tokens;
  std::vector<std::size_t> label_positions;  // strictly increasing
  std::vector<TokenId> labels;               // original ids at label_positions
  std::vector<MaskBranch> branches;          // which replacement fired, per label

  std::size_t num_labels() const noexcept { return labels.size(); }
  bool operator==(const MaskedSequence&) const = default;
};

/// Per position, in order, from SplitMix64(cfg.seed): one draw selects the
/// position (u < mask_ratio); a selected position takes a second draw for the
/// branch (mask / random / keep by cumulative p_mask, p_random) and, on the
/// random branch, a third draw for the token, next_below(vocab_size).
MaskedSequence mask_tokens(std::span<const TokenId> tokens, const MaskingConfig& cfg);

/// d x d_lm visual-to-text projection.
using ProjectionMatrix = RowMatrixXf;

/// Row t of the result is frames_t * W. Accumulates in `Accum` precision and
/// stores in the frames' scalar type.
template <class Accum = double, class DerivedF, class DerivedW>
RowMatrix<typename DerivedF::Scalar> apply_projection(const Eigen::MatrixBase<DerivedF>& frames,
                                                      const Eigen::MatrixBase<DerivedW>& w) {
  using Scalar = typename DerivedF::Scalar;
  if (frames.cols() != w.rows()) {
    throw ArgumentError("apply_projection: frame dim " + std::to_string(frames.cols()) +
                        " does not match projection rows " + std::to_string(w.rows()));
  }
  if (!w.allFinite()) throw ArgumentError("apply_projection: projection has non-finite entries");
  const RowMatrix<Accum> acc = frames.template cast<Accum>() * w.template cast<Accum>();
  return acc.template cast<Scalar>();
}

RowMatrixXf apply_projection(const FrameFeatures& frames, const ProjectionMatrix& w);

struct TrainingExample {
  std::string video_id;
  RowMatrixXf video_prompts;  // L x d_lm
  VideoContext context;
  MaskedSequence caption_tokens;
};

TrainingExample assemble_training_example(const FrameFeatures& frames, const ProjectionMatrix& w,
                                          VideoContext context, std::span<const TokenId> caption_tokens,
                                          const MaskingConfig& cfg);

/// One JSONL line; p_vid is base64 of little-endian float32, row-major.
std::string training_example_to_json(const TrainingExample& ex);
TrainingExample training_example_from_json(std::string_view line);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace r2a
