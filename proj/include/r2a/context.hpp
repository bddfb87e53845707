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
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "r2a/retrieval.hpp"

namespace r2a {

inline constexpr std::string_view kDefaultPromptWord = "Hints:";

/// Placeholder stored in rendered prompts until a scorer supplies its own mask
/// surface form (see AnswerPrompt::render).
inline constexpr std::string_view kMaskSentinel = "<<MASK>>";

/// "Firstly," / "Then," / "After that," / "Finally," for a 1-based frame
/// position out of `total` frames.
std::string_view temporal_connective(std::size_t position, std::size_t total);

struct ContextSegment {
  std::size_t frame = 0;
  std::string connective;
  std::string caption;  // already sentence-terminated

  bool operator==(const ContextSegment&) const = default;
};

struct VideoContext {
  std::vector<ContextSegment> segments;
  std::size_t total_frames = 0;
  std::string rendered;

  bool empty() const noexcept { return segments.empty(); }
  bool operator==(const VideoContext&) const = default;
};

/// Prefixes each caption with its frame's connective. Frame indices must be
/// non-decreasing and within 1..total_frames.
VideoContext build_context(std::span<const FrameCaption> captions, std::size_t total_frames);

struct AnswerPrompt {
  std::string question;
  std::string prompt_word{kDefaultPromptWord};
  VideoContext context;
  std::size_t mask_count = 1;
  /// Rendered with kMaskSentinel in every mask slot.
  std::string rendered;

  /// The prompt with each sentinel replaced by `mask_surface`.
  std::string render(std::string_view mask_surface) const;

  bool operator==(const AnswerPrompt&) const = default;
};

/// "Question: {q} Answer: {masks}. {prompt_word} {context}".
AnswerPrompt build_answer_prompt(std::string question, VideoContext context,
                                 std::string prompt_word = std::string(kDefaultPromptWord),
                                 std::size_t mask_count = 1);

using TokenCounter = std::function<std::size_t(std::string_view)>;

/// Drops whole captions from the end of the context until the prompt,
/// rendered with `mask_surface`, fits in `budget` tokens. When anything is
/// dropped the connectives of the survivors are recomputed so the last
/// surviving frame reads "Finally,". Throws BudgetError if even the
/// caption-free prompt is over budget.
AnswerPrompt truncate_to_budget(const AnswerPrompt& prompt, std::size_t budget,
                                const TokenCounter& count_tokens,
                                std::string_view mask_surface = "[MASK]");

}  // namespace r2a
