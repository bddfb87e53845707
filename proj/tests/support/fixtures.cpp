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


#include "support/fixtures.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

#include "r2a/rng.hpp"

namespace r2a::testing {

namespace fs = std::filesystem;
using nlohmann::json;

TempDir::TempDir() {
  std::random_device rd;
  const auto base = fs::temp_directory_path();
  for (;;) {
    path_ = base / ("r2a-test-" + std::to_string(rd()) + std::to_string(rd()));
    if (fs::create_directory(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  write_file(path, s);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RowMatrixXf random_unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  RowMatrixXf m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  SplitMix64 rng(seed);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Vector<double> v(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[c] = rng.next_unit() * 2.0 - 1.0;
    m.row(r) = (v / v.norm()).cast<float>().transpose();
  }
  return m;
}

CorpusIndex index_from_rows(const RowMatrixXf& rows, std::size_t shards) {
  std::vector<std::string> texts;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) texts.push_back("t" + std::to_string(i));
  const auto n = static_cast<std::size_t>(rows.rows());
  return CorpusIndex(ingest_texts(texts), EmbeddingMatrix{rows, true}, make_shards(n, shards));
}

// ---------------------------------------------------------------------------

namespace {

struct Topic {
  const char* answer;
  const char* captions[3];
};

constexpr Topic kTopics[] = {
    {"piano", {"a man is playing piano", "a pianist plays piano in a concert hall",
               "hands press the keys of a piano"}},
    {"car", {"two men are driving a car", "a red car drives down the street",
             "a car parks in front of a house"}},
    {"dog", {"a dog runs across the park", "a small dog chases a ball", "a woman walks her dog"}},
    {"soccer", {"players kick a soccer ball", "a soccer match in a stadium",
                "a boy practices soccer in the yard"}},
    {"guitar", {"a girl strums a guitar", "a man tunes his guitar", "a band plays guitar on stage"}},
    {"horse", {"a horse gallops in a field", "a rider brushes a horse", "a horse jumps over a fence"}},
    {"kitchen", {"a chef cooks in a kitchen", "a woman cleans the kitchen",
                 "people eat dinner in the kitchen"}},
    {"beach", {"waves crash on the beach", "children build a sandcastle on the beach",
               "a couple walks along the beach"}},
    {"snow", {"a skier glides through snow", "kids throw snow at each other",
              "a truck clears snow from the road"}},
    {"bicycle", {"a boy rides a bicycle", "a cyclist repairs a bicycle tire",
                 "a bicycle race on a mountain road"}},
};

constexpr const char* kDistractors[] = {
    "a person talks to the camera", "a crowd cheers loudly",          "a man smiles",
    "text appears on the screen",   "a woman is speaking",            "someone opens a door",
    "the camera pans across a room", "a group of people are laughing", "a man sits on a chair",
    "lights flash in the dark"};

constexpr std::pair<const char*, const char*> kQuestions[] = {
    {"what is in the video?", "what"}, {"what is the video about?", "topic"}};

}  // namespace

PipelineConfig EvalFixture::pipeline() const {
  PipelineConfig cfg;
  cfg.k = kK;
  cfg.token_budget = 500;
  cfg.seed = 17;
  return cfg;
}

EvalFixture make_eval_fixture() {
  EvalFixture f;
  for (const auto& t : kTopics) {
    f.answers.emplace_back(t.answer);
    for (const char* c : t.captions) f.captions.emplace_back(c);
  }
  for (const char* d : kDistractors) f.captions.emplace_back(d);

  MockEmbedder embedder(EvalFixture::kDim);
  f.index = CorpusIndex(ingest_texts(f.captions), embedder.embed_texts(f.captions), std::size_t{1});
  f.candidates = CandidateSet(f.answers);

  for (std::size_t i = 0; i < std::size(kTopics); ++i) {
    Vector<double> centroid = Vector<double>::Zero(EvalFixture::kDim);
    for (const char* c : kTopics[i].captions) centroid += mock_embed(c, EvalFixture::kDim).cast<double>();
    centroid /= centroid.norm();

    FrameFeatures v;
    v.video_id = "video" + std::to_string(i);
    v.normalized = true;
    v.frames.resize(EvalFixture::kFrames, EvalFixture::kDim);
    for (std::size_t t = 0; t < EvalFixture::kFrames; ++t) {
      const std::string key = "noise/" + v.video_id + "/" + std::to_string(t);
      const Vector<double> x =
          centroid + EvalFixture::kNoise * mock_embed(key, EvalFixture::kDim).cast<double>();
      v.frames.row(static_cast<Eigen::Index>(t)) = (x / x.norm()).cast<float>().transpose();
    }
    f.frames.add(v);
    f.videos.push_back(v);
    for (const auto& [q, type] : kQuestions) f.records.push_back({v.video_id, q, kTopics[i].answer, type});
  }
  return f;
}

void write_eval_fixture(const EvalFixture& f, const fs::path& dir) {
  fs::create_directories(dir / "frames");
  write_lines(dir / "texts.txt", f.captions);
  write_vectors(f.index.embeddings(), dir / "embeddings.r2av");
  save_index(f.index, dir / "index");
  std::vector<std::string> manifest;
  for (const auto& v : f.videos) {
    const std::string rel = "frames/" + v.video_id + ".r2av";
    write_vectors(EmbeddingMatrix{v.frames, v.normalized}, dir / rel);
    manifest.push_back(json{{"video_id", v.video_id}, {"path", rel}, {"num_frames", v.num_frames()}}.dump());
  }
  write_lines(dir / "manifest.jsonl", manifest);
  std::vector<std::string> dataset;
  for (const auto& r : f.records) {
    dataset.push_back(
        json{{"video_id", r.video_id}, {"question", r.question}, {"answer", r.answer}, {"type", *r.type}}
            .dump());
  }
  write_lines(dir / "dataset.jsonl", dataset);
  write_lines(dir / "candidates.txt", f.answers);
}

RiggedScorer::RiggedScorer(const EvalFixture& f, Pick rigged) : f_(f), rigged_(std::move(rigged)) {}

std::vector<double> RiggedScorer::score(std::string_view prompt, std::size_t /*mask_count*/,
                                        std::span<const std::string> candidates) const {
  const auto q_begin = prompt.find("Question: ") + 10;
  const std::string question(prompt.substr(q_begin, prompt.find(" Answer:") - q_begin));
  const std::string_view hints = prompt.substr(prompt.find(" Answer:"));
  std::size_t best_pos = std::string_view::npos;
  std::string gold;
  for (std::size_t t = 0; t < std::size(kTopics); ++t) {
    for (const char* c : kTopics[t].captions) {
      const auto pos = hints.find(c);
      if (pos < best_pos) {
        best_pos = pos;
        gold = kTopics[t].answer;
      }
    }
  }
  const bool rig = rigged_(gold, question);
  std::vector<double> out;
  for (const auto& c : candidates) out.push_back(c == gold ? (rig ? 0.0 : -2.0) : -1.0);
  return out;
}

std::size_t RiggedScorer::count_tokens(std::string_view text) const {
  return whitespace_token_count(text);
}

// ---------------------------------------------------------------------------

struct FakeAdapter::Impl {
  httplib::Server server;
  int port = 0;
  std::thread thread;
};

FakeAdapter::FakeAdapter() : impl_(std::make_unique<Impl>()) {
  auto& srv = impl_->server;
  srv.set_pre_routing_handler([this](const httplib::Request&, httplib::Response& res) {
    ++requests_;
    if (failures_left_.load() > 0) {
      --failures_left_;
      res.status = failure_status_.load();
      res.set_content(R"({"error":"injected failure"})", "application/json");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });
  auto reply = [](httplib::Response& res, const json& j) {
    res.set_content(j.dump(), "application/json");
  };
  auto bad_request = [](httplib::Response& res, const std::string& what) {
    res.status = 400;
    res.set_content(json{{"error", what}}.dump(), "application/json");
  };
  srv.Get("/health", [reply](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"status", "ok"}, {"backend", "mock"}});
  });
  srv.Post("/v1/score", [reply, bad_request](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto j = json::parse(req.body);
      const auto cands = j.at("candidates").get<std::vector<std::string>>();
      reply(res, {{"log_probs", mock_score(j.at("prompt").get<std::string>(), cands)}});
    } catch (const std::exception& e) {
      bad_request(res, e.what());
    }
  });
  srv.Post("/v1/count_tokens", [reply, bad_request](const httplib::Request& req, httplib::Response& res) {
    try {
      reply(res, {{"count", whitespace_token_count(json::parse(req.body).at("text").get<std::string>())}});
    } catch (const std::exception& e) {
      bad_request(res, e.what());
    }
  });
  auto rows_json = [](const EmbeddingMatrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows.rows(); ++r) {
      rows.push_back(std::vector<float>(m.rows.row(r).begin(), m.rows.row(r).end()));
    }
    return json{{"dim", m.dim()}, {"embeddings", std::move(rows)}};
  };
  srv.Post("/v1/embed_text", [=](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto texts = json::parse(req.body).at("texts").get<std::vector<std::string>>();
      reply(res, rows_json(MockEmbedder(64).embed_texts(texts)));
    } catch (const std::exception& e) {
      bad_request(res, e.what());
    }
  });
  srv.Post("/v1/embed_frames", [=](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto j = json::parse(req.body);
      reply(res, rows_json(MockEmbedder(64).embed_frames(j.at("video_id").get<std::string>(),
                                                         j.at("frames_path").get<std::string>(),
                                                         j.at("num_frames").get<std::size_t>())));
    } catch (const std::exception& e) {
      bad_request(res, e.what());
    }
  });
  impl_->port = srv.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw std::runtime_error("fake adapter: cannot bind");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

FakeAdapter::~FakeAdapter() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string FakeAdapter::endpoint() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

void FakeAdapter::fail_next(int n, int status) {
  failure_status_ = status;
  failures_left_ = n;
}

std::string unreachable_endpoint() { return "http://127.0.0.1:1"; }

}  // namespace r2a::testing
