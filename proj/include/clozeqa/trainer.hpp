#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clozeqa/checkpoint.hpp"
#include "clozeqa/config.hpp"
#include "clozeqa/dataset.hpp"
#include "clozeqa/knowledge.hpp"
#include "clozeqa/model.hpp"
#include "clozeqa/prompt.hpp"
#include "clozeqa/span.hpp"
#include "clozeqa/trie.hpp"

namespace clozeqa {

// Everything about an example that does not depend on model parameters.
struct PreparedExample {
  EqaExample example;
  PromptTemplate prompt;
  AssembledInput input;
  KnowledgeRows knowledge;
  std::vector<SpanCandidate> candidates;  // filtered negatives pool (gold excluded)
  std::vector<TokenId> answer;
};

PreparedExample prepare_example(const EqaExample& ex, const TrainConfig& config,
                                const Vocab& vocab, const KnowledgeTable& kb, int max_len,
                                std::vector<std::string>* warnings = nullptr);

struct ExampleLoss {
  ag::Var objective;  // l_mlm + lambda * l_scl
  double l_mlm = 0.0;
  double l_scl = 0.0;
  std::optional<ContrastiveBatch> batch;  // absent when lambda == 0
};

// Counts calls into negative sampling, so the lambda = 0 path can be checked.
struct SamplingCounter {
  long calls = 0;
};

ExampleLoss example_loss(const Model& model, const PreparedExample& p, const TrainConfig& config,
                         SamplingCounter* counter = nullptr);

// Contrastive batch with scores filled in, for inspection.
ContrastiveBatch contrastive_batch(const Model& model, const PreparedExample& p,
                                   const TrainConfig& config);

struct EpochLog {
  int epoch = 0;
  double l_mlm = 0.0;
  double l_scl = 0.0;
  double l_objective = 0.0;
  double l_total = 0.0;
  std::optional<double> dev_f1;
  std::optional<double> train_f1;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> history;
  long steps = 0;
  long negative_sampling_calls = 0;
  int epochs_run = 0;
  int selected_epoch = 0;
  std::vector<std::string> warnings;
};

// Runs the few-shot protocol on split.train (model selection on split.dev).
// A non-finite loss aborts with NumericError carrying a step dump; when
// `dump_dir` is set the dump is also written there.
TrainResult train(const TrainConfig& config, const FewShotSplit& split, const Vocab& vocab,
                  const KnowledgeTable& kb,
                  const std::optional<std::filesystem::path>& dump_dir = std::nullopt);

Checkpoint make_checkpoint(const TrainResult& r, const TrainConfig& config, const Vocab& vocab,
                           const KnowledgeTable& kb);

struct Prediction {
  DecodeResult decoded;
  std::vector<TokenId> answer;
  Span span;
  double score = 0.0;
};

Prediction predict(const Model& model, const PreparedExample& p, const TrainConfig& config);

struct EvalRow {
  std::string id;
  std::string question;
  std::string predicted;
  std::string gold;
  Span predicted_span;
  Span gold_span;
  double score = 0.0;
  double f1 = 0.0;
  bool degraded = false;

  bool operator==(const EvalRow&) const = default;
};

struct EvalReport {
  double f1 = 0.0;
  double f1_std = 0.0;
  std::map<int, double> window_accuracy;
  int examples = 0;
  int degraded = 0;
  int seeds = 1;
  std::vector<EvalRow> per_example;

  bool operator==(const EvalReport&) const = default;
};

inline const std::vector<int> kWindowSizes = {1, 3, 5};

EvalReport evaluate(const Model& model, const std::vector<EqaExample>& examples,
                    const TrainConfig& config, const Vocab& vocab, const KnowledgeTable& kb);

// Mean F1 with population standard deviation across runs; windows averaged.
EvalReport aggregate_seeds(const std::vector<EvalReport>& runs);

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);
std::string summary_line(const EvalReport& r);

struct SpanEmbeddingRow {
  std::string label;  // "gold" or "neg<i>"
  Span span;
  Vector vector;
};

std::vector<SpanEmbeddingRow> dump_span_embeddings(const Model& model, const EqaExample& ex,
                                                   const TrainConfig& config, const Vocab& vocab,
                                                   const KnowledgeTable& kb);
std::string span_embeddings_tsv(const std::vector<SpanEmbeddingRow>& rows);

// The knowledge table used for a run: the given file, or the synthetic one
// derived from the vocabulary when KPE is on, or an empty table.
KnowledgeTable resolve_knowledge(const TrainConfig& config, const Vocab& vocab,
                                 const std::optional<std::filesystem::path>& kb_path);

}  // namespace clozeqa
