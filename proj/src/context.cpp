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

#include "r2a/context.hpp"

namespace r2a {

namespace {

bool has_terminal_punctuation(std::string_view s) {
  if (s.empty()) return false;
  const char c = s.back();
  return c == '.' || c == '!' || c == '?';
}

std::string terminate_sentence(std::string_view caption) {
  std::string out(trim(caption));
  if (!has_terminal_punctuation(out)) out.push_back('.');
  return out;
}

std::string render_context(const std::vector<ContextSegment>& segments) {
  std::string out;
  for (const auto& seg : segments) {
    if (!out.empty()) out.push_back(' ');
    out += seg.connective;
    out.push_back(' ');
    out += seg.caption;
  }
  return out;
}

std::string render_prompt(const AnswerPrompt& p) {
  std::string out = "Question: ";
  out += p.question;
  out += " Answer:";
  for (std::size_t i = 0; i < p.mask_count; ++i) {
    out.push_back(' ');
    out += kMaskSentinel;
  }
  out += ". ";
  out += p.prompt_word;
  if (!p.context.rendered.empty()) {
    out.push_back(' ');
    out += p.context.rendered;
  }
  return out;
}

}  // namespace

std::string_view temporal_connective(std::size_t position, std::size_t total) {
  if (total == 0 || position == 0 || position > total) {
    throw ArgumentError("temporal_connective: position " + std::to_string(position) +
                        " out of range 1.." + std::to_string(total));
  }
  if (position == 1) return "Firstly,";
  if (position == total) return "Finally,";
  if (total >= 3 && position == total - 1) return "After that,";
  return "Then,";
}

VideoContext build_context(std::span<const FrameCaption> captions, std::size_t total_frames) {
  VideoContext ctx;
  ctx.total_frames = total_frames;
  std::size_t prev = 0;
  for (const auto& c : captions) {
    if (c.frame < 1 || c.frame > total_frames) {
      throw ArgumentError("build_context: frame " + std::to_string(c.frame) + " outside 1.." +
                          std::to_string(total_frames));
    }
    if (c.frame < prev) throw ArgumentError("build_context: frame indices must be non-decreasing");
    prev = c.frame;
    ctx.segments.push_back({c.frame, std::string(temporal_connective(c.frame, total_frames)),
                            terminate_sentence(c.text)});
  }
  ctx.rendered = render_context(ctx.segments);
  return ctx;
}

std::string AnswerPrompt::render(std::string_view mask_surface) const {
  std::string out;
  out.reserve(rendered.size());
  std::size_t pos = 0;
  for (;;) {
    const auto hit = rendered.find(kMaskSentinel, pos);
    if (hit == std::string::npos) break;
    out.append(rendered, pos, hit - pos);
    out += mask_surface;
    pos = hit + kMaskSentinel.size();
  }
  out.append(rendered, pos, std::string::npos);
  return out;
}

AnswerPrompt build_answer_prompt(std::string question, VideoContext context,
                                 std::string prompt_word, std::size_t mask_count) {
  if (trim(question).empty()) throw ArgumentError("question must be non-empty");
  if (mask_count == 0) throw ArgumentError("mask_count must be positive");
  AnswerPrompt p;
  p.question = std::move(question);
  p.prompt_word = std::move(prompt_word);
  p.context = std::move(context);
  p.mask_count = mask_count;
  p.rendered = render_prompt(p);
  return p;
}

AnswerPrompt truncate_to_budget(const AnswerPrompt& prompt, std::size_t budget,
                                const TokenCounter& count_tokens, std::string_view mask_surface) {
  if (count_tokens(prompt.render(mask_surface)) <= budget) return prompt;

  AnswerPrompt bare = build_answer_prompt(prompt.question, VideoContext{{}, prompt.context.total_frames, ""},
                                          prompt.prompt_word, prompt.mask_count);
  if (count_tokens(bare.render(mask_surface)) > budget) {
    throw BudgetError("question alone needs " +
                      std::to_string(count_tokens(bare.render(mask_surface))) +
                      " tokens, budget is " + std::to_string(budget));
  }

  std::vector<FrameCaption> kept;
  kept.reserve(prompt.context.segments.size());
  for (const auto& s : prompt.context.segments) kept.push_back({s.frame, s.caption});

  while (!kept.empty()) {
    kept.pop_back();
    if (kept.empty()) break;
    AnswerPrompt candidate = build_answer_prompt(
        prompt.question, build_context(kept, kept.back().frame), prompt.prompt_word,
        prompt.mask_count);
    if (count_tokens(candidate.render(mask_surface)) <= budget) return candidate;
  }
  return bare;
}

}  // namespace r2a
