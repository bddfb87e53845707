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

#include "r2a/answer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

#include "r2a/rng.hpp"

namespace r2a {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Mocks

VectorXf mock_embed(std::string_view text, std::size_t dim) {
  if (dim == 0) throw ArgumentError("mock_embed: dim must be >= 1");
  SplitMix64 rng(fnv1a64(text));
  Vector<double> v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.next_unit() * 2.0 - 1.0;
  const double norm = v.norm();
  // All-zero draws are practically impossible; fall back to e1 for totality.
  if (norm == 0.0) {
    VectorXf e = VectorXf::Zero(v.size());
    e[0] = 1.0f;
    return e;
  }
  return (v / norm).cast<float>();
}

std::vector<double> mock_score(std::string_view prompt, std::span<const std::string> candidates) {
  if (candidates.empty()) throw ArgumentError("mock_score: no candidates");
  const Vector<double> p = mock_embed(prompt, kMockScoreDim).cast<double>();
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    const Vector<double> e = mock_embed(c, kMockScoreDim).cast<double>();
    const double s = p.dot(e) / (p.norm() * e.norm());
    out.push_back(std::log((s + 1.0) / 2.0 + 1e-9));
  }
  return out;
}

std::vector<double> MockScorer::score(std::string_view prompt, std::size_t /*mask_count*/,
                                      std::span<const std::string> candidates) const {
  return mock_score(prompt, candidates);
}

std::size_t MockScorer::count_tokens(std::string_view text) const {
  return whitespace_token_count(text);
}

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::size_t count_phrase(std::string_view haystack, std::string_view phrase) {
  if (phrase.empty()) return 0;
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(phrase); pos != std::string_view::npos;
       pos = haystack.find(phrase, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
    const std::size_t end = pos + phrase.size();
    const bool right_ok = end == haystack.size() || !is_word_char(haystack[end]);
    if (left_ok && right_ok) ++n;
  }
  return n;
}

}  // namespace

std::vector<double> LexicalScorer::score(std::string_view prompt, std::size_t /*mask_count*/,
                                         std::span<const std::string> candidates) const {
  if (candidates.empty()) throw ArgumentError("lexical scorer: no candidates");
  const std::string mask = mask_surface_form();
  const auto at = prompt.rfind(mask);
  const std::string hints =
      normalize_answer(at == std::string_view::npos ? prompt : prompt.substr(at + mask.size()));
  std::vector<double> counts;
  double total = 0.0;
  for (const auto& c : candidates) {
    counts.push_back(static_cast<double>(count_phrase(hints, normalize_answer(c))));
    total += counts.back();
  }
  const double denom = total + static_cast<double>(candidates.size());
  for (auto& c : counts) c = std::log((c + 1.0) / denom);
  return counts;
}

std::size_t LexicalScorer::count_tokens(std::string_view text) const {
  return whitespace_token_count(text);
}

EmbeddingMatrix MockEmbedder::embed_texts(std::span<const std::string> texts) const {
  EmbeddingMatrix m;
  m.rows.resize(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < texts.size(); ++i) {
    m.rows.row(static_cast<Eigen::Index>(i)) = mock_embed(texts[i], dim_).transpose();
  }
  m.normalized = true;
  return m;
}

EmbeddingMatrix MockEmbedder::embed_frames(const std::string& video_id,
                                           const std::string& /*frames_path*/,
                                           std::size_t num_frames) const {
  std::vector<std::string> keys;
  keys.reserve(num_frames);
  for (std::size_t t = 0; t < num_frames; ++t) keys.push_back(video_id + ":" + std::to_string(t));
  return embed_texts(keys);
}

// ---------------------------------------------------------------------------
// HTTP

HttpClient::HttpClient(HttpOptions opts) : opts_(std::move(opts)) {
  scheme_host_port_ = opts_.endpoint;
  while (!scheme_host_port_.empty() && scheme_host_port_.back() == '/') scheme_host_port_.pop_back();
  if (scheme_host_port_.empty()) throw ArgumentError("http endpoint is empty");
  if (scheme_host_port_.find("://") == std::string::npos) {
    scheme_host_port_ = "http://" + scheme_host_port_;
  }
}

template <class Fn>
std::string HttpClient::with_retries(const std::string& path, Fn&& call) const {
  auto backoff = opts_.initial_backoff;
  std::string last_error;
  for (int attempt = 0;; ++attempt) {
    httplib::Client cli(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opts_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());

    httplib::Result res = call(cli);
    bool retryable = false;
    if (!res) {
      last_error = "transport error on " + path + ": " + httplib::to_string(res.error());
      retryable = true;
    } else if (res->status >= 200 && res->status < 300) {
      return res->body;
    } else {
      retryable = res->status >= 500 || res->status == 429;
      const std::string excerpt = res->body.substr(0, 200);
      if (!retryable || attempt >= opts_.max_retries) {
        throw BackendError(res->status, path + " returned HTTP " + std::to_string(res->status) +
                                            ": " + excerpt);
      }
      last_error = excerpt;
    }
    if (!retryable || attempt >= opts_.max_retries) break;
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
  throw TransportError(last_error);
}

std::string HttpClient::post(const std::string& path, const std::string& body) const {
  return with_retries(path, [&](httplib::Client& cli) {
    return cli.Post(path, body, "application/json");
  });
}

std::string HttpClient::get(const std::string& path) const {
  return with_retries(path, [&](httplib::Client& cli) { return cli.Get(path); });
}

namespace {

json parse_response(const std::string& path, const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw BackendError(200, path + ": malformed JSON response: " + e.what());
  }
}

EmbeddingMatrix embeddings_from_json(const std::string& path, const json& j) {
  try {
    const auto& rows = j.at("embeddings");
    const std::size_t dim = j.at("dim").get<std::size_t>();
    EmbeddingMatrix m;
    m.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != dim) throw BackendError(200, path + ": embedding row has wrong dim");
      for (std::size_t c = 0; c < dim; ++c) {
        m.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c].get<float>();
      }
    }
    m.normalized = true;
    return m;
  } catch (const json::exception& e) {
    throw BackendError(200, path + ": unexpected response shape: " + e.what());
  }
}

}  // namespace

std::vector<double> HttpScorer::score(std::string_view prompt, std::size_t mask_count,
                                      std::span<const std::string> candidates) const {
  const json req{{"prompt", prompt},
                 {"mask_count", mask_count},
                 {"candidates", std::vector<std::string>(candidates.begin(), candidates.end())}};
  const json res = parse_response("/v1/score", client_.post("/v1/score", req.dump()));
  std::vector<double> out;
  try {
    out = res.at("log_probs").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw BackendError(200, std::string("/v1/score: unexpected response shape: ") + e.what());
  }
  if (out.size() != candidates.size()) {
    throw BackendError(200, "/v1/score returned " + std::to_string(out.size()) + " scores for " +
                                std::to_string(candidates.size()) + " candidates");
  }
  for (double v : out) {
    if (!std::isfinite(v)) throw BackendError(200, "/v1/score returned a non-finite score");
  }
  return out;
}

std::size_t HttpScorer::count_tokens(std::string_view text) const {
  const json res = parse_response("/v1/count_tokens",
                                  client_.post("/v1/count_tokens", json{{"text", text}}.dump()));
  try {
    return res.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw BackendError(200, std::string("/v1/count_tokens: unexpected response shape: ") + e.what());
  }
}

std::string HttpScorer::health() const {
  const json res = parse_response("/health", client_.get("/health"));
  if (res.value("status", "") != "ok") throw BackendError(200, "/health: status is not ok");
  return res.value("backend", "");
}

EmbeddingMatrix HttpEmbedder::embed_texts(std::span<const std::string> texts) const {
  const json req{{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  return embeddings_from_json("/v1/embed_text",
                              parse_response("/v1/embed_text", client_.post("/v1/embed_text", req.dump())));
}

EmbeddingMatrix HttpEmbedder::embed_frames(const std::string& video_id, const std::string& frames_path,
                                           std::size_t num_frames) const {
  const json req{{"video_id", video_id}, {"frames_path", frames_path}, {"num_frames", num_frames}};
  return embeddings_from_json(
      "/v1/embed_frames",
      parse_response("/v1/embed_frames", client_.post("/v1/embed_frames", req.dump())));
}

std::unique_ptr<Scorer> make_scorer(std::string_view spec) {
  if (spec == "mock") return std::make_unique<MockScorer>();
  if (spec == "lexical") return std::make_unique<LexicalScorer>();
  if (spec.starts_with("http:") || spec.starts_with("https:")) {
    std::string url(spec.starts_with("http:") && !spec.starts_with("http://") ? spec.substr(5) : spec);
    return std::make_unique<HttpScorer>(HttpOptions{.endpoint = url});
  }
  throw ArgumentError("unknown scorer '" + std::string(spec) + "' (expected mock, lexical or http:URL)");
}

std::unique_ptr<Embedder> make_embedder(std::string_view spec, std::size_t default_dim) {
  if (spec == "mock") return std::make_unique<MockEmbedder>(default_dim);
  if (spec.starts_with("mock:")) {
    const std::string dim(spec.substr(5));
    std::size_t parsed = 0;
    try {
      parsed = std::stoul(dim);
    } catch (const std::exception&) {
      throw ArgumentError("bad mock dimension '" + dim + "'");
    }
    if (parsed == 0) throw ArgumentError("mock dimension must be >= 1");
    return std::make_unique<MockEmbedder>(parsed);
  }
  if (spec.starts_with("http:") || spec.starts_with("https:")) {
    std::string url(spec.starts_with("http:") && !spec.starts_with("http://") ? spec.substr(5) : spec);
    return std::make_unique<HttpEmbedder>(HttpOptions{.endpoint = url});
  }
  throw ArgumentError("unknown embedder '" + std::string(spec) + "' (expected mock[:DIM] or http:URL)");
}

// ---------------------------------------------------------------------------
// Selection

CandidateSet::CandidateSet(std::vector<std::string> answers) {
  std::unordered_set<std::string> seen;
  for (auto& a : answers) {
    const auto t = trim(a);
    if (t.empty()) throw ArgumentError("candidate answers must be non-empty");
    if (!seen.insert(normalize_answer(t)).second) {
      throw ArgumentError("duplicate candidate answer '" + std::string(t) + "'");
    }
    answers_.emplace_back(t);
  }
}

CandidateSet CandidateSet::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> answers;
  for (std::string line; std::getline(in, line);) {
    if (!trim(line).empty()) answers.push_back(line);
  }
  return CandidateSet(std::move(answers));
}

AnswerResult select_answer(const AnswerPrompt& prompt, const CandidateSet& candidates,
                           const Scorer& scorer, Aggregation aggregation) {
  if (candidates.empty()) throw ArgumentError("select_answer: empty candidate set");
  const auto& answers = candidates.answers();
  const std::string mask = scorer.mask_surface_form();

  // mask count -> candidate positions
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    groups[std::max<std::size_t>(1, scorer.count_tokens(answers[i]))].push_back(i);
  }

  std::vector<double> scores(answers.size(), 0.0);
  for (const auto& [m, members] : groups) {
    const AnswerPrompt p = m == prompt.mask_count
                               ? prompt
                               : build_answer_prompt(prompt.question, prompt.context,
                                                     prompt.prompt_word, m);
    std::vector<std::string> batch;
    batch.reserve(members.size());
    for (auto i : members) batch.push_back(answers[i]);
    const auto got = scorer.score(p.render(mask), m, batch);
    if (got.size() != batch.size()) {
      throw BackendError(200, "scorer returned " + std::to_string(got.size()) + " scores for " +
                                  std::to_string(batch.size()) + " candidates");
    }
    for (std::size_t j = 0; j < members.size(); ++j) {
      if (!std::isfinite(got[j])) throw BackendError(200, "scorer returned a non-finite score");
      scores[members[j]] = aggregation == Aggregation::kSum ? got[j] * static_cast<double>(m) : got[j];
    }
  }

  AnswerResult result;
  std::size_t best = 0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    result.all_scores.emplace_back(answers[i], scores[i]);
    if (scores[i] > scores[best]) best = i;
  }
  result.answer = answers[best];
  result.log_prob = scores[best];
  const AnswerPrompt single = prompt.mask_count == 1
                                  ? prompt
                                  : build_answer_prompt(prompt.question, prompt.context,
                                                        prompt.prompt_word, 1);
  result.prompt = single.render(mask);
  return result;
}

}  // namespace r2a
