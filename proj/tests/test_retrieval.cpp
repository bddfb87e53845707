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


#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "r2a/errors.hpp"
#include "r2a/retrieval.hpp"
#include "r2a/rng.hpp"
#include "support/fixtures.hpp"

namespace r2a {
namespace {

/// Full sort of every row by (score desc, id asc), scores in double.
std::vector<std::pair<std::int64_t, double>> brute_force(const RowMatrixXf& rows, const VectorXf& q,
                                                         std::size_t k) {
  const Vector<double> qd = q.cast<double>() / q.cast<double>().norm();
  std::vector<std::pair<std::int64_t, double>> all;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    all.push_back({i, rows.row(i).cast<double>().dot(qd.transpose())});
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second > b.second || (a.second == b.second && a.first < b.first);
  });
  all.resize(std::min(k, all.size()));
  return all;
}

TEST_CASE("lane_dot agrees with a double-precision dot") {
  for (std::size_t n : {1, 7, 16, 33, 64, 255}) {
    const auto rows = testing::random_unit_rows(2, n, n);
    const float got = lane_dot(rows.row(0).data(), rows.row(1).data(), n);
    const double want = rows.row(0).cast<double>().dot(rows.row(1).cast<double>());
    CHECK(got == doctest::Approx(want).epsilon(1e-5));
  }
}

TEST_CASE("cosine similarity") {
  const VectorXf a{{3.0f, 4.0f}};
  const VectorXf b{{4.0f, 3.0f}};
  CHECK(similarity(a, b) == doctest::Approx(24.0 / 25.0));
  CHECK(similarity(a, a) == doctest::Approx(1.0));
  CHECK(similarity(a, VectorXf{{-3.0f, -4.0f}}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(similarity(a, VectorXf::Ones(3)), ArgumentError);
  CHECK_THROWS_AS(similarity(a, VectorXf::Zero(2)), ArgumentError);
}

TEST_CASE("topk matches the brute-force oracle on random instances") {
  SplitMix64 pick(2024);
  for (int trial = 0; trial < 24; ++trial) {
    const std::size_t n = std::array<std::size_t, 3>{37, 200, 1500}[pick.next_below(3)];
    const std::size_t d = std::array<std::size_t, 2>{8, 64}[pick.next_below(2)];
    const std::size_t k = std::array<std::size_t, 3>{1, 10, 50}[pick.next_below(3)];
    const auto rows = testing::random_unit_rows(n, d, pick.next());
    const auto idx = testing::index_from_rows(rows, 1 + pick.next_below(4));
    const VectorXf q = testing::random_unit_rows(1, d, pick.next()).row(0).transpose() * 3.0f;

    const auto got = topk_frame(idx, q, k);
    const auto want = brute_force(rows, q, k);
    REQUIRE(got.size() == want.size());
    for (std::size_t r = 0; r < got.size(); ++r) {
      CHECK(got[r].corpus_id == want[r].first);
      CHECK(std::abs(got[r].score - want[r].second) <= 1e-5);
      CHECK(got[r].rank == static_cast<std::int32_t>(r + 1));
    }
  }
}

TEST_CASE("an indexed row retrieves itself first with score 1") {
  const auto rows = testing::random_unit_rows(30, 16, 77);
  const auto idx = testing::index_from_rows(rows, 4);
  const VectorXf q = rows.row(5).transpose();
  const auto hits = topk_frame(idx, q, 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].corpus_id == 5);
  CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("k larger than the corpus returns every row") {
  const auto idx = testing::index_from_rows(testing::random_unit_rows(6, 4, 1), 2);
  const VectorXf q = VectorXf::Ones(4);
  const auto hits = topk_frame(idx, q, 100);
  CHECK(hits.size() == 6);
  std::set<std::int64_t> ids;
  for (const auto& h : hits) ids.insert(h.corpus_id);
  CHECK(ids.size() == 6);
  CHECK(std::is_sorted(hits.begin(), hits.end(), hit_before));
}

TEST_CASE("ties break toward the smaller corpus id") {
  RowMatrixXf rows(4, 2);
  rows << 0, 1, 1, 0, 0, 1, 1, 0;
  const auto idx = testing::index_from_rows(rows, 2);
  const auto hits = topk_frame(idx, VectorXf{{1.0f, 0.0f}}, 3);
  CHECK(hits[0].corpus_id == 1);
  CHECK(hits[1].corpus_id == 3);
  CHECK(hits[2].corpus_id == 0);
}

TEST_CASE("bad queries are rejected") {
  const auto idx = testing::index_from_rows(testing::random_unit_rows(5, 4, 2));
  CHECK_THROWS_AS(topk_frame(idx, VectorXf::Ones(4), 0), ArgumentError);
  CHECK_THROWS_AS(topk_frame(idx, VectorXf::Ones(3), 1), ArgumentError);
  CHECK_THROWS_AS(topk_frame(idx, VectorXf::Zero(4), 1), ArgumentError);
  VectorXf nan = VectorXf::Ones(4);
  nan[2] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(topk_frame(idx, nan, 1), ArgumentError);
  CHECK_THROWS_AS(topk_frame(CorpusIndex(), VectorXf::Ones(4), 1), ArgumentError);

  FrameFeatures f{"v", RowMatrixXf::Ones(2, 3), false};
  CHECK_THROWS_AS(retrieve_video(idx, f, 1), ArgumentError);
}

TEST_CASE("output is independent of shard layout and thread count") {
  const auto rows = testing::random_unit_rows(3000, 32, 11);
  FrameFeatures frames{"v", testing::random_unit_rows(5, 32, 12), true};
  const auto base = testing::index_from_rows(rows, 1);
  const auto want = retrieval_to_jsonl(retrieve_video(base, frames, 10), base.corpus());
  for (std::size_t shards : {2, 3, 4, 7, 8}) {
    const auto idx = base.with_shards(shards);
    for (std::size_t threads : {1, 2, 8, 0}) {
      CHECK(retrieval_to_jsonl(retrieve_video(idx, frames, 10, ScanOptions{threads}), idx.corpus()) ==
            want);
    }
  }
}

TEST_CASE("normalized frames skip renormalization without changing results") {
  const auto rows = testing::random_unit_rows(100, 8, 4);
  const auto idx = testing::index_from_rows(rows);
  const RowMatrixXf raw = testing::random_unit_rows(3, 8, 5) * 2.5f;
  FrameFeatures unnorm{"v", raw, false};
  FrameFeatures norm{"v", raw.rowwise().normalized(), true};
  const auto a = retrieve_video(idx, unnorm, 5);
  const auto b = retrieve_video(idx, norm, 5);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t r = 0; r < 5; ++r) {
      CHECK(a.per_frame[t][r].corpus_id == b.per_frame[t][r].corpus_id);
    }
  }
}

TEST_CASE("dedup keeps first occurrences in frame and rank order") {
  const std::vector<std::string> texts{"a", "b", "a", "c", "b", "d"};
  const auto corpus = ingest_texts(texts);
  VideoRetrieval r;
  r.k = 3;
  r.per_frame = {{{1, .9f, 1}, {0, .8f, 2}, {2, .7f, 3}},
                 {{3, .9f, 1}, {4, .8f, 2}, {0, .1f, 3}},
                 {{5, .5f, 1}, {3, .4f, 2}, {2, .3f, 3}}};

  // insertion-ordered set oracle
  std::vector<FrameCaption> want;
  std::vector<std::string> order;
  for (std::size_t t = 0; t < r.per_frame.size(); ++t) {
    for (const auto& h : r.per_frame[t]) {
      const auto& s = texts[static_cast<std::size_t>(h.corpus_id)];
      if (std::find(order.begin(), order.end(), s) == order.end()) {
        order.push_back(s);
        want.push_back({t + 1, s});
      }
    }
  }
  const auto got = dedup_captions(r, corpus);
  CHECK(got == want);
  CHECK(got == std::vector<FrameCaption>{{1, "b"}, {1, "a"}, {2, "c"}, {3, "d"}});
}

TEST_CASE("dedup output has unique texts on random retrievals") {
  std::vector<std::string> texts;
  for (int i = 0; i < 40; ++i) texts.push_back("cap" + std::to_string(i % 13));
  const auto corpus = ingest_texts(texts);
  const auto idx = CorpusIndex(corpus, EmbeddingMatrix{testing::random_unit_rows(40, 6, 8), true},
                               std::size_t{3});
  FrameFeatures frames{"v", testing::random_unit_rows(10, 6, 9), true};
  const auto caps = dedup_captions(retrieve_video(idx, frames, 7), corpus);
  std::unordered_set<std::string> seen;
  std::size_t prev = 0;
  for (const auto& c : caps) {
    CHECK(seen.insert(c.text).second);
    CHECK(c.frame >= prev);
    prev = c.frame;
  }
}

TEST_CASE("random sampling is distinct, seeded and bounded") {
  std::vector<std::string> texts;
  for (int i = 0; i < 10; ++i) texts.push_back("t" + std::to_string(i));
  const auto corpus = ingest_texts(texts);
  CHECK(random_sample_ids(corpus, 3, 5) == std::vector<std::int64_t>{3, 7, 0});
  CHECK(random_sample(corpus, 3, 5) == std::vector<std::string>{"t3", "t7", "t0"});
  CHECK(random_sample_ids(corpus, 10, 1).size() == 10);
  CHECK(random_sample_ids(corpus, 0, 1).empty());
  CHECK_THROWS_AS(random_sample_ids(corpus, 11, 1), ArgumentError);

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto ids = random_sample_ids(corpus, 6, seed);
    CHECK(std::set<std::int64_t>(ids.begin(), ids.end()).size() == 6);
    CHECK(ids == random_sample_ids(corpus, 6, seed));
  }
}

TEST_CASE("uniform frame indices use centre offsets") {
  std::vector<std::size_t> identity(10);
  std::iota(identity.begin(), identity.end(), 0);
  CHECK(uniform_frame_indices(10, 10) == identity);
  CHECK(uniform_frame_indices(100, 10) ==
        std::vector<std::size_t>{5, 15, 25, 35, 45, 55, 65, 75, 85, 95});
  CHECK(uniform_frame_indices(3, 10) == std::vector<std::size_t>{0, 1, 2});
  CHECK(uniform_frame_indices(7, 2) == std::vector<std::size_t>{1, 5});
  CHECK_THROWS_AS(uniform_frame_indices(5, 0), ArgumentError);

  FrameFeatures f{"v", RowMatrixXf(20, 2), false};
  for (Eigen::Index i = 0; i < 20; ++i) f.frames.row(i) << static_cast<float>(i), 1.0f;
  const auto s = sample_frames(f, 4);
  REQUIRE(s.num_frames() == 4);
  CHECK(s.frames(0, 0) == 2.0f);
  CHECK(s.frames(3, 0) == 17.0f);
  CHECK(s.video_id == "v");
}

TEST_CASE("retrieval jsonl has one line per frame") {
  const std::vector<std::string> texts{"x \"q\"", "y"};
  const auto idx = CorpusIndex(ingest_texts(texts), EmbeddingMatrix{RowMatrixXf{{1, 0}, {0, 1}}, true},
                               std::size_t{1});
  FrameFeatures f{"v", RowMatrixXf{{1, 0}, {0, 1}}, true};
  const auto out = retrieval_to_jsonl(retrieve_video(idx, f, 1), idx.corpus());
  CHECK(out ==
        "{\"frame\":1,\"hits\":[{\"id\":0,\"score\":1.0,\"text\":\"x \\\"q\\\"\"}]}\n"
        "{\"frame\":2,\"hits\":[{\"id\":1,\"score\":1.0,\"text\":\"y\"}]}\n");
}

}  // namespace
}  // namespace r2a
