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

#include "r2a/mlm_prep.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>
#include <openssl/evp.h>

#include "r2a/rng.hpp"

namespace r2a {

using nlohmann::json;

void MaskingConfig::validate() const {
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) {
    throw ArgumentError("mask_ratio must lie in [0, 1]");
  }
  if (p_mask < 0.0 || p_random < 0.0 || p_keep < 0.0 ||
      std::abs(p_mask + p_random + p_keep - 1.0) > 1e-9) {
    throw ArgumentError("replacement probabilities must be non-negative and sum to 1");
  }
  if (vocab_size <= 0) throw ArgumentError("vocab_size must be positive");
}

MaskedSequence mask_tokens(std::span<const TokenId> tokens, const MaskingConfig& cfg) {
  if (tokens.empty()) throw ArgumentError("mask_tokens: empty input");
  cfg.validate();
  for (auto t : tokens) {
    if (t < 0 || t >= cfg.vocab_size) {
      throw ArgumentError("mask_tokens: token id " + std::to_string(t) + " outside vocabulary");
    }
  }

  MaskedSequence out;
  out.input_tokens.assign(tokens.begin(), tokens.end());
  SplitMix64 rng(cfg.seed);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!(rng.next_unit() < cfg.mask_ratio)) continue;
    out.label_positions.push_back(i);
    out.labels.push_back(tokens[i]);
    const double branch = rng.next_unit();
    if (branch < cfg.p_mask) {
      out.input_tokens[i] = cfg.mask_token_id;
      out.branches.push_back(MaskBranch::kMask);
    } else if (branch < cfg.p_mask + cfg.p_random) {
      out.input_tokens[i] = static_cast<TokenId>(rng.next_below(static_cast<std::uint64_t>(cfg.vocab_size)));
      out.branches.push_back(MaskBranch::kRandom);
    } else {
      out.branches.push_back(MaskBranch::kKeep);
    }
  }
  return out;
}

RowMatrixXf apply_projection(const FrameFeatures& frames, const ProjectionMatrix& w) {
  return apply_projection<double>(frames.frames, w);
}

TrainingExample assemble_training_example(const FrameFeatures& frames, const ProjectionMatrix& w,
                                          VideoContext context, std::span<const TokenId> caption_tokens,
                                          const MaskingConfig& cfg) {
  TrainingExample ex;
  ex.video_id = frames.video_id;
  ex.video_prompts = apply_projection(frames, w);
  ex.context = std::move(context);
  ex.caption_tokens = mask_tokens(caption_tokens, cfg);
  return ex;
}

// ---------------------------------------------------------------------------

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ArgumentError("base64: length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ArgumentError("base64: invalid input");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

namespace {

const char* branch_name(MaskBranch b) {
  switch (b) {
    case MaskBranch::kMask: return "mask";
    case MaskBranch::kRandom: return "random";
    case MaskBranch::kKeep: return "keep";
  }
  return "mask";
}

MaskBranch branch_from(const std::string& s) {
  if (s == "mask") return MaskBranch::kMask;
  if (s == "random") return MaskBranch::kRandom;
  if (s == "keep") return MaskBranch::kKeep;
  throw ArgumentError("unknown mask branch '" + s + "'");
}

}  // namespace

std::string training_example_to_json(const TrainingExample& ex) {
  const auto& p = ex.video_prompts;
  std::span<const std::uint8_t> raw(reinterpret_cast<const std::uint8_t*>(p.data()),
                                    static_cast<std::size_t>(p.size()) * sizeof(float));
  json segments = json::array();
  for (const auto& s : ex.context.segments) {
    segments.push_back({{"frame", s.frame}, {"connective", s.connective}, {"caption", s.caption}});
  }
  json branches = json::array();
  for (auto b : ex.caption_tokens.branches) branches.push_back(branch_name(b));

  json j;
  j["video_id"] = ex.video_id;
  j["p_vid"] = {{"rows", p.rows()}, {"cols", p.cols()}, {"dtype", "f32le"}, {"data", base64_encode(raw)}};
  j["context"] = {{"total_frames", ex.context.total_frames},
                  {"segments", std::move(segments)},
                  {"rendered", ex.context.rendered}};
  j["caption_tokens"] = {{"input_tokens", ex.caption_tokens.input_tokens},
                         {"label_positions", ex.caption_tokens.label_positions},
                         {"labels", ex.caption_tokens.labels},
                         {"branches", std::move(branches)}};
  return j.dump();
}

TrainingExample training_example_from_json(std::string_view line) {
  try {
    const json j = json::parse(line);
    TrainingExample ex;
    ex.video_id = j.at("video_id").get<std::string>();
    const auto& p = j.at("p_vid");
    const auto rows = p.at("rows").get<Eigen::Index>();
    const auto cols = p.at("cols").get<Eigen::Index>();
    const auto bytes = base64_decode(p.at("data").get<std::string>());
    if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(float)) {
      throw FormatError("p_vid", "p_vid payload does not match rows x cols");
    }
    ex.video_prompts.resize(rows, cols);
    std::memcpy(ex.video_prompts.data(), bytes.data(), bytes.size());

    const auto& c = j.at("context");
    ex.context.total_frames = c.at("total_frames").get<std::size_t>();
    ex.context.rendered = c.at("rendered").get<std::string>();
    for (const auto& s : c.at("segments")) {
      ex.context.segments.push_back({s.at("frame").get<std::size_t>(),
                                     s.at("connective").get<std::string>(),
                                     s.at("caption").get<std::string>()});
    }
    const auto& t = j.at("caption_tokens");
    ex.caption_tokens.input_tokens = t.at("input_tokens").get<std::vector<TokenId>>();
    ex.caption_tokens.label_positions = t.at("label_positions").get<std::vector<std::size_t>>();
    ex.caption_tokens.labels = t.at("labels").get<std::vector<TokenId>>();
    for (const auto& b : t.at("branches")) {
      ex.caption_tokens.branches.push_back(branch_from(b.get<std::string>()));
    }
    return ex;
  } catch (const json::exception& e) {
    throw FormatError("training_example", std::string("malformed training example: ") + e.what());
  }
}

}  // namespace r2a
