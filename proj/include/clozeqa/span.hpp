#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clozeqa/autograd.hpp"
#include "clozeqa/dataset.hpp"
#include "clozeqa/model.hpp"
#include "clozeqa/tensor.hpp"

namespace clozeqa {

// Shared by the contrastive loss and the decoder: how a span's per-mask
// predictions are combined into one score.
enum class ScoreMode { SumProb, SumLogProb };

ScoreMode parse_score_mode(const std::string& name);
const char* score_mode_name(ScoreMode m);

struct SpanCandidate {
  Span span;
  Vector boundary_repr;  // [G row at start ; G row at end], 2h
  double similarity = 0.0;
  bool is_gold = false;
};

// Every span of length 1..max_len, grouped by length, then by start.
std::vector<SpanCandidate> enumerate_spans(const Passage& passage, int max_len);

enum class FilterRule { BoundaryStopword, BoundaryPunctuation, CrossesSentence, GoldExclusion };

const char* filter_rule_name(FilterRule r);

struct FilterConfig {
  bool boundary_stopword = true;
  bool boundary_punctuation = true;
  bool sentence_boundary = true;
};

struct FilterResult {
  std::vector<SpanCandidate> kept;
  std::vector<std::pair<Span, FilterRule>> removed;
};

// Drops spans that start or end on a stopword or punctuation token, contain
// sentence-final punctuation, or equal the gold span. The gold check always
// runs; the others follow `rules`.
FilterResult filter_spans(const std::vector<SpanCandidate>& cands, const Passage& passage,
                          Span gold, const FilterConfig& rules = {});

enum class DistKernel { InverseDistance, Constant };

// Position weights 1 / (1 + |start - gold.start|) normalized to sum to 1 over
// `cands` (all 1 for the constant kernel).
std::vector<double> distance_weights(const std::vector<SpanCandidate>& cands, Span gold,
                                     DistKernel kernel = DistKernel::InverseDistance);

// Cosine between the mean G rows of the two spans (0 when either mean is zero).
double mean_cosine(Span a, Span b, const Matrix& g);

// dist_weight * cosine. `g` holds one row per passage token.
double sim(const SpanCandidate& candidate, Span gold, const Matrix& g, double dist_weight);

Vector boundary_repr(Span s, const Matrix& g);

struct ContrastiveBatch {
  SpanCandidate gold;
  std::vector<SpanCandidate> negatives;  // sorted by similarity, best first
  int requested = 0;
  int shortfall = 0;
  double gold_score = 0.0;
  std::vector<double> negative_scores;
};

// Top-S survivors by sim; ties go to the smaller start, then the shorter span.
ContrastiveBatch sample_negatives(const std::vector<SpanCandidate>& cands, Span gold, int s,
                                  const Matrix& g,
                                  DistKernel kernel = DistKernel::InverseDistance);

// Z = sum_j Pr(token_j at mask j) + Pr([END] at mask |span|+1) when the span
// is shorter than l_mask, accumulated left to right. Log-probabilities are
// summed instead under ScoreMode::SumLogProb.
double span_score(const std::vector<TokenId>& tokens, const MlmOutput& mlm,
                  const std::vector<int>& mask_positions, ScoreMode mode = ScoreMode::SumProb);

ag::Var span_score(const std::vector<TokenId>& tokens, const ag::Var& log_probs,
                   const std::vector<int>& mask_positions, ScoreMode mode = ScoreMode::SumProb);

// -(1/(S+1)) log(e^Z / (e^Z + sum_i e^{Z'_i})), max-shifted.
double scl_loss(double gold_score, std::span<const double> negative_scores);
double scl_loss(const ContrastiveBatch& batch);
// `scores` is (S+1) x 1 with the gold score first.
ag::Var scl_loss(const ag::Var& scores);

// Mean NLL of the answer tokens at masks 1..|a| and [END] at mask |a|+1.
double mlm_loss(const MlmOutput& mlm, const std::vector<int>& mask_positions,
                const std::vector<TokenId>& answer);
ag::Var mlm_loss(const ag::Var& log_probs, const std::vector<int>& mask_positions,
                 const std::vector<TokenId>& answer);

struct LossReport {
  double l_mlm = 0.0;
  double l_scl = 0.0;
  double l_objective = 0.0;  // l_mlm + lambda * l_scl, the differentiated quantity
  double param_norm = 0.0;   // ||Theta||_2
  double l_total = 0.0;      // l_objective + gamma * ||Theta||
  double lambda = 0.0;
  double gamma = 0.0;
};

// The gamma term is applied by the optimizer as decoupled weight decay; it
// is reported here, not differentiated.
LossReport total_loss(double l_mlm, double l_scl, double lambda, double gamma,
                      double param_norm = 0.0);

}  // namespace clozeqa
