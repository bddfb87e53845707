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

#include "r2a/eval.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "r2a/rng.hpp"

namespace r2a {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string require_string(const json& j, const char* key, const fs::path& path, std::size_t line) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw FormatError(key, path.string() + ":" + std::to_string(line) + ": missing string field \"" +
                               key + "\"");
  }
  return j[key].get<std::string>();
}

template <class Fn>
void for_each_jsonl(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DecodeError(line_no, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    fn(j, line_no);
  }
}

}  // namespace

std::vector<QARecord> load_dataset(const fs::path& path) {
  std::vector<QARecord> out;
  for_each_jsonl(path, [&](const json& j, std::size_t line) {
    QARecord r;
    r.video_id = require_string(j, "video_id", path, line);
    r.question = require_string(j, "question", path, line);
    r.answer = require_string(j, "answer", path, line);
    if (j.contains("type") && !j["type"].is_null()) r.type = require_string(j, "type", path, line);
    if (trim(r.video_id).empty() || trim(r.question).empty()) {
      throw FormatError("question", path.string() + ":" + std::to_string(line) +
                                        ": video_id and question must be non-empty");
    }
    out.push_back(std::move(r));
  });
  return out;
}

void InMemoryFrameSource::add(FrameFeatures f) {
  auto id = f.video_id;
  videos_.insert_or_assign(std::move(id), std::move(f));
}

FrameFeatures InMemoryFrameSource::frames_for(const std::string& video_id) const {
  const auto it = videos_.find(video_id);
  if (it == videos_.end()) throw ArgumentError("no frame features for video '" + video_id + "'");
  return it->second;
}

ManifestFrameSource::ManifestFrameSource(const fs::path& manifest) {
  const fs::path base = manifest.parent_path();
  for_each_jsonl(manifest, [&](const json& j, std::size_t line) {
    const std::string id = require_string(j, "video_id", manifest, line);
    fs::path p = require_string(j, "path", manifest, line);
    if (p.is_relative()) p = base / p;
    if (!j.contains("num_frames") || !j["num_frames"].is_number_unsigned()) {
      throw FormatError("num_frames", manifest.string() + ":" + std::to_string(line) +
                                          ": missing integer field \"num_frames\"");
    }
    entries_[id] = Entry{p, j["num_frames"].get<std::size_t>()};
  });
}

FrameFeatures ManifestFrameSource::frames_for(const std::string& video_id) const {
  const auto it = entries_.find(video_id);
  if (it == entries_.end()) throw ArgumentError("video '" + video_id + "' is not in the frame manifest");
  auto f = read_frames(it->second.path, video_id);
  if (f.num_frames() != it->second.num_frames) {
    throw FormatError("num_frames", it->second.path.string() + " holds " +
                                        std::to_string(f.num_frames()) + " frames, manifest says " +
                                        std::to_string(it->second.num_frames));
  }
  return f;
}

// ---------------------------------------------------------------------------

VideoRetrieval random_context(const TextCorpus& corpus, std::size_t num_frames, std::size_t k,
                              std::uint64_t seed, const std::string& video_id) {
  VideoRetrieval r;
  r.k = k;
  const std::uint64_t video_seed = mix_seed(seed, fnv1a64(video_id));
  for (std::size_t t = 0; t < num_frames; ++t) {
    std::vector<Hit> hits;
    const auto ids = random_sample_ids(corpus, std::min(k, corpus.size()), mix_seed(video_seed, t));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      hits.push_back({ids[i], 0.0f, static_cast<std::int32_t>(i + 1)});
    }
    r.per_frame.push_back(std::move(hits));
  }
  return r;
}

VideoAnswer answer_video(const CorpusIndex& index, const FrameFeatures& frames,
                         const std::string& question, const CandidateSet& candidates,
                         const Scorer& scorer, const PipelineConfig& cfg) {
  const std::size_t num_frames = frames.num_frames();
  const VideoRetrieval r =
      cfg.mode == ContextMode::kRetrieval
          ? retrieve_video(index, frames, cfg.k, cfg.scan)
          : random_context(index.corpus(), num_frames, cfg.k, cfg.seed, frames.video_id);

  VideoAnswer out;
  out.captions = dedup_captions(r, index.corpus());

  std::size_t max_masks = 1;
  for (const auto& c : candidates.answers()) max_masks = std::max(max_masks, scorer.count_tokens(c));

  const AnswerPrompt full = build_answer_prompt(question, build_context(out.captions, num_frames),
                                                cfg.prompt_word, max_masks);
  out.prompt = truncate_to_budget(
      full, cfg.token_budget, [&](std::string_view t) { return scorer.count_tokens(t); },
      scorer.mask_surface_form());
  out.result = select_answer(out.prompt, candidates, scorer, cfg.aggregation);
  return out;
}

bool exact_match(std::string_view pred, std::string_view gold, bool strict) {
  if (strict) return pred == gold;
  return normalize_answer(pred) == normalize_answer(gold);
}

EvalReport tally(std::vector<ItemResult> items, std::vector<RecordError> errors) {
  EvalReport r;
  for (const auto& it : items) {
    ++r.total;
    if (it.correct) ++r.correct;
    if (it.type) {
      auto& s = r.per_type[*it.type];
      ++s.total;
      if (it.correct) ++s.correct;
    }
  }
  r.per_item = std::move(items);
  r.errors = std::move(errors);
  return r;
}

EvalReport evaluate(std::span<const QARecord> records, const CorpusIndex& index,
                    const FrameSource& frames, const CandidateSet& candidates, const Scorer& scorer,
                    const PipelineConfig& cfg, const EvalOptions& opts) {
  std::vector<ItemResult> items(records.size());
  std::vector<std::optional<RecordError>> errors(records.size());

  auto run_one = [&](std::size_t i) {
    const QARecord& rec = records[i];
    ItemResult& item = items[i];
    item.video_id = rec.video_id;
    item.question = rec.question;
    item.gold = rec.answer;
    item.type = rec.type;
    try {
      const auto f = frames.frames_for(rec.video_id);
      const auto va = answer_video(index, f, rec.question, candidates, scorer, cfg);
      item.prediction = va.result.answer;
      item.correct = exact_match(item.prediction, item.gold, opts.strict);
    } catch (const TransportError&) {
      throw;
    } catch (const BackendError&) {
      throw;
    } catch (const Error& e) {
      if (opts.fail_fast) throw;
      errors[i] = RecordError{i, rec.video_id, e.what()};
    }
  };

  const std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(1, opts.threads), records.size());
  if (workers <= 1 || opts.fail_fast) {
    for (std::size_t i = 0; i < records.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex failure_mu;
    std::exception_ptr failure;
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t i; (i = next.fetch_add(1)) < records.size();) {
            try {
              run_one(i);
            } catch (...) {
              std::lock_guard lock(failure_mu);
              if (!failure) failure = std::current_exception();
              next = records.size();
            }
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<RecordError> collected;
  for (auto& e : errors) {
    if (e) {
      std::cerr << "r2a: record " << e->index << " (" << e->video_id << "): " << e->message << '\n';
      collected.push_back(std::move(*e));
    }
  }
  EvalReport report = tally(std::move(items), std::move(collected));
  if (!opts.keep_items) report.per_item.clear();
  return report;
}

// ---------------------------------------------------------------------------

namespace {

json accuracy_json(std::optional<double> a) { return a ? json(*a) : json(nullptr); }

}  // namespace

json report_to_json(const EvalReport& r) {
  json per_type = json::object();
  for (const auto& [type, s] : r.per_type) {
    per_type[type] = {{"total", s.total}, {"correct", s.correct}, {"accuracy", accuracy_json(s.accuracy())}};
  }
  json items = json::array();
  for (const auto& it : r.per_item) {
    json j{{"video_id", it.video_id},
           {"question", it.question},
           {"prediction", it.prediction},
           {"gold", it.gold},
           {"correct", it.correct}};
    j["type"] = it.type ? json(*it.type) : json(nullptr);
    items.push_back(std::move(j));
  }
  json errors = json::array();
  for (const auto& e : r.errors) {
    errors.push_back({{"index", e.index}, {"video_id", e.video_id}, {"message", e.message}});
  }
  return json{{"total", r.total},
              {"correct", r.correct},
              {"accuracy", accuracy_json(r.accuracy())},
              {"per_type", std::move(per_type)},
              {"per_item", std::move(items)},
              {"errors", std::move(errors)}};
}

EvalReport report_from_json(const json& j) {
  try {
    EvalReport r;
    r.total = j.at("total").get<std::size_t>();
    r.correct = j.at("correct").get<std::size_t>();
    for (const auto& [type, s] : j.at("per_type").items()) {
      r.per_type[type] = {s.at("total").get<std::size_t>(), s.at("correct").get<std::size_t>()};
    }
    for (const auto& it : j.value("per_item", json::array())) {
      ItemResult item;
      item.video_id = it.at("video_id").get<std::string>();
      item.question = it.at("question").get<std::string>();
      item.prediction = it.at("prediction").get<std::string>();
      item.gold = it.at("gold").get<std::string>();
      item.correct = it.at("correct").get<bool>();
      if (it.contains("type") && !it["type"].is_null()) item.type = it["type"].get<std::string>();
      r.per_item.push_back(std::move(item));
    }
    for (const auto& e : j.value("errors", json::array())) {
      r.errors.push_back({e.at("index").get<std::size_t>(), e.at("video_id").get<std::string>(),
                          e.at("message").get<std::string>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError("report", std::string("malformed eval report: ") + e.what());
  }
}

RunDelta compare_runs(const EvalReport& a, const EvalReport& b) {
  if (a.per_item.size() != a.total || b.per_item.size() != b.total) {
    throw ArgumentError("compare_runs: both reports need per-item results");
  }
  if (a.total != b.total) throw ArgumentError("compare_runs: reports cover different record sets");

  using Key = std::tuple<std::string, std::string, std::string>;
  auto keyed = [](const EvalReport& r) {
    std::vector<std::pair<Key, bool>> v;
    for (const auto& it : r.per_item) v.push_back({{it.video_id, it.question, it.gold}, it.correct});
    std::stable_sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    return v;
  };
  const auto ka = keyed(a);
  const auto kb = keyed(b);

  RunDelta d;
  for (std::size_t i = 0; i < ka.size(); ++i) {
    if (ka[i].first != kb[i].first) {
      throw ArgumentError("compare_runs: reports cover different record sets");
    }
    if (ka[i].second != kb[i].second) ++d.flipped;
  }
  d.overall = a.accuracy().value_or(0.0) - b.accuracy().value_or(0.0);
  for (const auto& [type, s] : a.per_type) {
    const auto it = b.per_type.find(type);
    const double other = it == b.per_type.end() ? 0.0 : it->second.accuracy().value_or(0.0);
    d.per_type[type] = s.accuracy().value_or(0.0) - other;
  }
  for (const auto& [type, s] : b.per_type) {
    if (!a.per_type.contains(type)) d.per_type[type] = -s.accuracy().value_or(0.0);
  }
  return d;
}

json delta_to_json(const RunDelta& d) {
  return json{{"overall", d.overall}, {"per_type", d.per_type}, {"flipped", d.flipped}};
}

}  // namespace r2a
