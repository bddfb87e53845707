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


#include "r2a/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "r2a/answer.hpp"
#include "r2a/bench.hpp"
#include "r2a/corpus_store.hpp"
#include "r2a/errors.hpp"
#include "r2a/eval.hpp"
#include "r2a/retrieval.hpp"

namespace r2a {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunConfig {
  std::size_t k = 10;
  std::size_t num_frames = 10;
  std::string prompt_word{kDefaultPromptWord};
  std::size_t token_budget = 500;
  std::string scorer = "mock";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string aggregation = "mean";
  std::string baseline = "retrieval";
};

constexpr std::size_t kMinTokenBudget = 16;

void add_k(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("-k,--k", c.k, "Captions retrieved per frame")
      ->envname("R2A_K")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_threads(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--threads", c.threads, "Worker threads (0 = one per shard)")
      ->envname("R2A_THREADS")
      ->capture_default_str();
}

void add_pipeline(CLI::App* cmd, RunConfig& c) {
  add_k(cmd, c);
  add_threads(cmd, c);
  cmd->add_option("--num-frames", c.num_frames, "Frames sampled per video")
      ->envname("R2A_NUM_FRAMES")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--prompt-word", c.prompt_word, "Word introducing the context")
      ->envname("R2A_PROMPT_WORD")
      ->capture_default_str();
  cmd->add_option("--budget", c.token_budget, "Maximum prompt length in scorer tokens")
      ->envname("R2A_TOKEN_BUDGET")
      ->check(CLI::Range(kMinTokenBudget, std::numeric_limits<std::size_t>::max()))
      ->capture_default_str();
  cmd->add_option("--scorer", c.scorer, "mock, lexical or http:URL")
      ->envname("R2A_SCORER")
      ->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed for the random baseline")
      ->envname("R2A_SEED")
      ->capture_default_str();
  cmd->add_option("--aggregation", c.aggregation, "Multi-token score aggregation")
      ->envname("R2A_AGGREGATION")
      ->check(CLI::IsMember({"mean", "sum"}))
      ->capture_default_str();
  cmd->add_option("--baseline", c.baseline, "Context source")
      ->envname("R2A_BASELINE")
      ->check(CLI::IsMember({"retrieval", "random"}))
      ->capture_default_str();
}

PipelineConfig pipeline_config(const RunConfig& c) {
  PipelineConfig p;
  p.k = c.k;
  p.prompt_word = c.prompt_word;
  p.token_budget = c.token_budget;
  p.mode = c.baseline == "random" ? ContextMode::kRandom : ContextMode::kRetrieval;
  p.seed = c.seed;
  p.scan.threads = c.threads;
  p.aggregation = c.aggregation == "sum" ? Aggregation::kSum : Aggregation::kMean;
  return p;
}

/// R2AV, or JSONL with one JSON array of floats per line.
EmbeddingMatrix read_embeddings(const fs::path& path) {
  if (has_vector_magic(path)) return read_vectors(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<float>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      rows.push_back(json::parse(line).get<std::vector<float>>());
    } catch (const json::exception& e) {
      throw DecodeError(line_no, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (rows.back().size() != rows.front().size()) {
      throw FormatError("dim", path.string() + ":" + std::to_string(line_no) + ": expected " +
                                   std::to_string(rows.front().size()) + " values");
    }
  }
  EmbeddingMatrix m;
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  m.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      m.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

json shards_json(const std::vector<Shard>& shards) {
  json s = json::array();
  for (const auto& sh : shards) s.push_back({sh.begin, sh.end});
  return s;
}

/// Subsamples every video of an underlying source to a fixed frame count.
class SampledFrameSource final : public FrameSource {
 public:
  SampledFrameSource(const FrameSource& base, std::size_t wanted) : base_(base), wanted_(wanted) {}
  FrameFeatures frames_for(const std::string& video_id) const override {
    return sample_frames(base_.frames_for(video_id), wanted_);
  }

 private:
  const FrameSource& base_;
  std::size_t wanted_;
};

FrameFeatures load_frames(const std::string& path, const std::string& video_id,
                          std::size_t wanted) {
  const std::string id = video_id.empty() ? fs::path(path).stem().string() : video_id;
  return sample_frames(read_frames(path, id), wanted);
}

/// CLI11 skips environment values that fail an option's checks. Replays them so
/// they raise a validation error instead of silently keeping the default.
void reject_invalid_env(const CLI::App& cmd) {
  for (const CLI::Option* opt : cmd.get_options()) {
    const std::string name = opt->get_envname();
    if (name.empty() || opt->count() > 0) continue;
    const char* value = std::getenv(name.c_str());
    if (value == nullptr || *value == '\0') continue;
    auto* mut = const_cast<CLI::Option*>(opt);
    try {
      mut->add_result(std::string(value));
      mut->run_callback();
    } catch (const CLI::ParseError& e) {
      throw ArgumentError(name + ": " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------

struct BuildIndexArgs {
  std::string texts, embeddings, embed_with, out;
  std::size_t shards = 1;
  std::size_t dim = 64;
};

int cmd_build_index(const BuildIndexArgs& a, std::ostream& out, std::ostream& err) {
  TextCorpus corpus = ingest_text_file(a.texts);
  if (corpus.skipped_empty > 0) err << "skipped " << corpus.skipped_empty << " blank lines\n";
  EmbeddingMatrix m;
  if (!a.embeddings.empty()) {
    m = read_embeddings(a.embeddings);
  } else {
    std::vector<std::string> texts;
    texts.reserve(corpus.size());
    for (const auto& e : corpus.entries) texts.push_back(e.text);
    m = make_embedder(a.embed_with, a.dim)->embed_texts(texts);
  }
  if (m.count() != corpus.size()) {
    throw ArgumentError("row count mismatch: " + std::to_string(m.count()) + " embedding rows for " +
                        std::to_string(corpus.size()) + " captions");
  }
  const std::size_t n = corpus.size();
  CorpusIndex index(std::move(corpus), std::move(m), make_shards(n, a.shards));
  save_index(index, a.out);
  out << json{{"count", index.size()}, {"dim", index.dim()}, {"shards", shards_json(index.shards())},
              {"out", a.out}}
             .dump()
      << '\n';
  return kExitOk;
}

struct RetrieveArgs {
  std::string index, frames, video_id, format = "jsonl";
};

int cmd_retrieve(const RetrieveArgs& a, const RunConfig& c, std::ostream& out) {
  const CorpusIndex index = load_index(a.index);
  const FrameFeatures frames = load_frames(a.frames, a.video_id, c.num_frames);
  const auto r = retrieve_video(index, frames, c.k, ScanOptions{c.threads});
  out << retrieval_to_jsonl(r, index.corpus());
  return kExitOk;
}

struct AnswerArgs {
  std::string index, frames, video_id, question, candidates;
};

int cmd_answer(const AnswerArgs& a, const RunConfig& c, std::ostream& out) {
  const CorpusIndex index = load_index(a.index);
  const FrameFeatures frames = load_frames(a.frames, a.video_id, c.num_frames);
  const CandidateSet candidates = CandidateSet::from_file(a.candidates);
  const auto scorer = make_scorer(c.scorer);
  const VideoAnswer va =
      answer_video(index, frames, a.question, candidates, *scorer, pipeline_config(c));
  json scores = json::array();
  for (const auto& [cand, lp] : va.result.all_scores) {
    scores.push_back({{"candidate", cand}, {"log_prob", lp}});
  }
  out << va.result.answer << '\n';
  out << json{{"answer", va.result.answer},
              {"log_prob", va.result.log_prob},
              {"scores", std::move(scores)},
              {"prompt", va.result.prompt},
              {"captions", va.prompt.context.segments.size()}}
             .dump()
      << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string dataset, manifest, index, candidates, report, compare;
  bool strict = false;
  bool fail_fast = false;
};

int cmd_eval(const EvalArgs& a, const RunConfig& c, std::ostream& out) {
  const auto records = load_dataset(a.dataset);
  const CorpusIndex index = load_index(a.index);
  const ManifestFrameSource manifest(a.manifest);
  const SampledFrameSource frames(manifest, c.num_frames);
  const CandidateSet candidates = CandidateSet::from_file(a.candidates);
  const auto scorer = make_scorer(c.scorer);

  EvalOptions opts;
  opts.strict = a.strict;
  opts.fail_fast = a.fail_fast;
  const EvalReport report =
      evaluate(records, index, frames, candidates, *scorer, pipeline_config(c), opts);
  const json report_json = report_to_json(report);
  if (!a.report.empty()) {
    std::ofstream f(a.report);
    if (!f) throw IoError("cannot write " + a.report);
    f << report_json.dump(2) << '\n';
    if (!f) throw IoError("short write to " + a.report);
  }

  json summary{{"accuracy", report_json["accuracy"]},
               {"total", report.total},
               {"correct", report.correct},
               {"errors", report.errors.size()}};
  if (!a.compare.empty()) {
    std::ifstream f(a.compare);
    if (!f) throw IoError("cannot open " + a.compare);
    json other;
    try {
      other = json::parse(f);
    } catch (const json::exception& e) {
      throw FormatError("report", a.compare + ": " + e.what());
    }
    summary["delta"] = delta_to_json(compare_runs(report, report_from_json(other)));
  }
  out << summary.dump() << '\n';
  return kExitOk;
}

struct BenchArgs {
  std::string index;
  std::size_t synthetic = 0;
  std::size_t dim = 256;
  std::size_t shards = 0;
  BenchOptions opts;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  if (a.opts.queries == 0 || a.opts.repeat == 0) {
    BenchResult empty;
    empty.options = a.opts;
    out << bench_to_json(empty).dump() << '\n';
    return kExitOk;
  }
  const std::size_t shards = a.shards == 0 ? std::max<std::size_t>(a.opts.threads, 1) : a.shards;
  const CorpusIndex index = a.index.empty()
                                ? synthetic_index(a.synthetic, a.dim, a.opts.seed, shards)
                                : load_index(a.index, a.shards);
  out << bench_to_json(run_bench(index, a.opts)).dump() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Retrieval-augmented zero-shot video question answering", "r2a"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "r2a 1.0.0");

  RunConfig cfg;

  BuildIndexArgs bi;
  auto* build = app.add_subcommand("build-index", "Embed (or load) captions and write an index");
  build->add_option("--texts", bi.texts, "Caption file, one per line")
      ->required()
      ->check(CLI::ExistingFile);
  auto* emb = build->add_option("--embeddings", bi.embeddings, "R2AV or JSONL embedding rows")
                  ->check(CLI::ExistingFile);
  auto* ew = build->add_option("--embed-with", bi.embed_with, "Embedder: mock, mock:DIM or http:URL")
                 ->envname("R2A_EMBED_WITH");
  emb->excludes(ew);
  ew->excludes(emb);
  build->add_option("--out", bi.out, "Output index directory")->required();
  build->add_option("--shards", bi.shards, "Shard count (0 = hardware threads)")
      ->envname("R2A_SHARDS")
      ->capture_default_str();
  build->add_option("--dim", bi.dim, "Embedding dim for the mock embedder")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  RetrieveArgs rv;
  auto* retrieve = app.add_subcommand("retrieve", "Top-k captions per frame as JSONL");
  retrieve->add_option("--index", rv.index, "Index directory")->required()->envname("R2A_INDEX");
  retrieve->add_option("--frames", rv.frames, "R2AV frame features")->required();
  retrieve->add_option("--video-id", rv.video_id, "Video id (default: frame file stem)");
  retrieve->add_option("--format", rv.format, "Output format")
      ->check(CLI::IsMember({"jsonl"}))
      ->capture_default_str();
  add_k(retrieve, cfg);
  add_threads(retrieve, cfg);
  retrieve->add_option("--num-frames", cfg.num_frames, "Frames sampled per video")
      ->envname("R2A_NUM_FRAMES")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  AnswerArgs an;
  auto* answer = app.add_subcommand("answer", "Answer one question about one video");
  answer->add_option("--index", an.index, "Index directory")->required()->envname("R2A_INDEX");
  answer->add_option("--frames", an.frames, "R2AV frame features")->required();
  answer->add_option("--video-id", an.video_id, "Video id (default: frame file stem)");
  answer->add_option("--question", an.question, "Question text")->required();
  answer->add_option("--candidates", an.candidates, "Answer vocabulary, one per line")->required();
  add_pipeline(answer, cfg);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Exact-match top-1 accuracy over a dataset");
  eval->add_option("--dataset", ev.dataset, "QA JSONL")->required();
  eval->add_option("--frames-manifest", ev.manifest, "Frame manifest JSONL")->required();
  eval->add_option("--index", ev.index, "Index directory")->required()->envname("R2A_INDEX");
  eval->add_option("--candidates", ev.candidates, "Answer vocabulary, one per line")->required();
  eval->add_option("--report", ev.report, "Write the full report JSON here");
  eval->add_option("--compare", ev.compare, "Report JSON to diff this run against");
  eval->add_flag("--strict", ev.strict, "Compare answers without normalization");
  eval->add_flag("--fail-fast", ev.fail_fast, "Stop at the first failing record");
  add_pipeline(eval, cfg);

  BenchArgs bn;
  auto* bench = app.add_subcommand("bench", "Retrieval latency and throughput");
  auto* bidx = bench->add_option("--index", bn.index, "Index directory");
  auto* bsyn = bench->add_option("--synthetic", bn.synthetic, "Rows of a synthetic index")
                   ->check(CLI::PositiveNumber);
  bidx->excludes(bsyn);
  bsyn->excludes(bidx);
  bench->add_option("--dim", bn.dim, "Synthetic index dim")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_option("--shards", bn.shards, "Shard count (0 = persisted or one per thread)")
      ->capture_default_str();
  bench->add_option("--queries", bn.opts.queries, "Timed queries per repetition")
      ->capture_default_str();
  bench->add_option("-k,--k", bn.opts.k, "Hits per query")
      ->envname("R2A_K")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_option("--threads", bn.opts.threads, "Worker threads")
      ->envname("R2A_THREADS")
      ->capture_default_str();
  bench->add_option("--repeat", bn.opts.repeat, "Repetitions")->capture_default_str();
  bench->add_option("--seed", bn.opts.seed, "Seed for synthetic data")
      ->envname("R2A_SEED")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    for (const CLI::App* sub : app.get_subcommands()) reject_invalid_env(*sub);
    if (*build) {
      if (bi.embeddings.empty() && bi.embed_with.empty()) {
        throw ArgumentError("one of --embeddings or --embed-with is required");
      }
      return cmd_build_index(bi, out, err);
    }
    if (*retrieve) return cmd_retrieve(rv, cfg, out);
    if (*answer) return cmd_answer(an, cfg, out);
    if (*eval) return cmd_eval(ev, cfg, out);
    if (*bench) {
      if (bn.index.empty() && bn.synthetic == 0 && bn.opts.queries != 0) {
        throw ArgumentError("one of --index or --synthetic is required");
      }
      return cmd_bench(bn, out);
    }
  } catch (const TransportError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBackend;
  } catch (const BackendError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBackend;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitValidation;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"r2a"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace r2a
