#include "clozeqa/span.hpp"

#include <algorithm>
#include <cmath>

#include "clozeqa/error.hpp"
#include "clozeqa/lexicon.hpp"

namespace clozeqa {

ScoreMode parse_score_mode(const std::string& name) {
  if (name == "sum_prob") return ScoreMode::SumProb;
  if (name == "sum_log_prob") return ScoreMode::SumLogProb;
  throw ConfigError("unknown score mode: " + name);
}

const char* score_mode_name(ScoreMode m) {
  return m == ScoreMode::SumProb ? "sum_prob" : "sum_log_prob";
}

const char* filter_rule_name(FilterRule r) {
  switch (r) {
    case FilterRule::BoundaryStopword: return "boundary_stopword";
    case FilterRule::BoundaryPunctuation: return "boundary_punctuation";
    case FilterRule::CrossesSentence: return "crosses_sentence";
    case FilterRule::GoldExclusion: return "gold_exclusion";
  }
  return "?";
}

std::vector<SpanCandidate> enumerate_spans(const Passage& passage, int max_len) {
  if (max_len < 1) throw ContractError("enumerate_spans: max_len must be >= 1");
  std::vector<SpanCandidate> out;
  const int n = passage.size();
  for (int w = 1; w <= std::min(max_len, n); ++w) {
    for (int k = 1; k + w - 1 <= n; ++k) {
      SpanCandidate c;
      c.span = {k, k + w - 1};
      out.push_back(std::move(c));
    }
  }
  return out;
}

FilterResult filter_spans(const std::vector<SpanCandidate>& cands, const Passage& passage,
                          Span gold, const FilterConfig& rules) {
  FilterResult r;
  for (const auto& c : cands) {
    const auto& first = passage.surface(c.span.start);
    const auto& last = passage.surface(c.span.end);
    if (c.span == gold) {
      r.removed.push_back({c.span, FilterRule::GoldExclusion});
      continue;
    }
    if (rules.boundary_punctuation &&
        (lexicon::is_punctuation(first) || lexicon::is_punctuation(last))) {
      r.removed.push_back({c.span, FilterRule::BoundaryPunctuation});
      continue;
    }
    if (rules.boundary_stopword && (lexicon::is_stopword(first) || lexicon::is_stopword(last))) {
      r.removed.push_back({c.span, FilterRule::BoundaryStopword});
      continue;
    }
    if (rules.sentence_boundary) {
      bool crosses = false;
      for (int p = c.span.start; p <= c.span.end && !crosses; ++p) {
        crosses = lexicon::is_sentence_boundary(passage.surface(p));
      }
      if (crosses) {
        r.removed.push_back({c.span, FilterRule::CrossesSentence});
        continue;
      }
    }
    r.kept.push_back(c);
  }
  return r;
}

std::vector<double> distance_weights(const std::vector<SpanCandidate>& cands, Span gold,
                                     DistKernel kernel) {
  std::vector<double> w(cands.size(), 1.0);
  if (kernel == DistKernel::Constant || cands.empty()) return w;
  double total = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    w[i] = 1.0 / (1.0 + std::abs(cands[i].span.start - gold.start));
    total += w[i];
  }
  for (auto& x : w) x /= total;
  return w;
}

namespace {

RowVector span_mean(Span s, const Matrix& g) {
  if (s.start < 1 || s.end > g.rows() || s.start > s.end) {
    throw ContractError("span outside passage representation");
  }
  return g.middleRows(s.start - 1, s.length()).colwise().mean();
}

}  // namespace

double mean_cosine(Span a, Span b, const Matrix& g) {
  const RowVector ma = span_mean(a, g);
  const RowVector mb = span_mean(b, g);
  const double na = ma.norm();
  const double nb = mb.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return ma.dot(mb) / (na * nb);
}

double sim(const SpanCandidate& candidate, Span gold, const Matrix& g, double dist_weight) {
  return dist_weight * mean_cosine(gold, candidate.span, g);
}

Vector boundary_repr(Span s, const Matrix& g) {
  const auto h = g.cols();
  Vector v(2 * h);
  v.head(h) = g.row(s.start - 1).transpose();
  v.tail(h) = g.row(s.end - 1).transpose();
  return v;
}

ContrastiveBatch sample_negatives(const std::vector<SpanCandidate>& cands, Span gold, int s,
                                  const Matrix& g, DistKernel kernel) {
  if (s < 0) throw ContractError("sample_negatives: S must be >= 0");
  ContrastiveBatch b;
  b.requested = s;
  b.gold.span = gold;
  b.gold.is_gold = true;
  b.gold.similarity = 1.0;
  b.gold.boundary_repr = boundary_repr(gold, g);

  std::vector<SpanCandidate> pool;
  for (const auto& c : cands) {
    if (!(c.span == gold)) pool.push_back(c);
  }
  const auto weights = distance_weights(pool, gold, kernel);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i].similarity = sim(pool[i], gold, g, weights[i]);
  std::sort(pool.begin(), pool.end(), [](const SpanCandidate& x, const SpanCandidate& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    if (x.span.start != y.span.start) return x.span.start < y.span.start;
    return x.span.length() < y.span.length();
  });
  const auto take = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(s));
  for (std::size_t i = 0; i < take; ++i) {
    pool[i].boundary_repr = boundary_repr(pool[i].span, g);
    b.negatives.push_back(std::move(pool[i]));
  }
  b.shortfall = s - static_cast<int>(take);
  return b;
}

namespace {

void check_span_fits(std::size_t len, const std::vector<int>& masks) {
  if (len == 0) throw ContractError("span_score: empty span");
  if (len > masks.size()) {
    throw ContractError("span_score: span of " + std::to_string(len) + " tokens exceeds l_mask " +
                        std::to_string(masks.size()));
  }
}

std::vector<std::pair<int, int>> score_cells(const std::vector<TokenId>& tokens,
                                             const std::vector<int>& masks) {
  std::vector<std::pair<int, int>> cells;
  for (std::size_t j = 0; j < tokens.size(); ++j) cells.push_back({masks[j], tokens[j]});
  if (tokens.size() < masks.size()) cells.push_back({masks[tokens.size()], special::kEnd});
  return cells;
}

}  // namespace

double span_score(const std::vector<TokenId>& tokens, const MlmOutput& mlm,
                  const std::vector<int>& mask_positions, ScoreMode mode) {
  check_span_fits(tokens.size(), mask_positions);
  double z = 0.0;
  for (const auto& [pos, tok] : score_cells(tokens, mask_positions)) {
    z += mode == ScoreMode::SumProb ? mlm.prob(pos, tok) : mlm.log_prob(pos, tok);
  }
  return z;
}

ag::Var span_score(const std::vector<TokenId>& tokens, const ag::Var& log_probs,
                   const std::vector<int>& mask_positions, ScoreMode mode) {
  check_span_fits(tokens.size(), mask_positions);
  const auto picked = ag::pick(log_probs, score_cells(tokens, mask_positions));
  return ag::sum(mode == ScoreMode::SumProb ? ag::exp(picked) : picked);
}

double scl_loss(double gold_score, std::span<const double> negative_scores) {
  if (negative_scores.empty()) return 0.0;
  double mx = gold_score;
  for (double z : negative_scores) mx = std::max(mx, z);
  double s = std::exp(gold_score - mx);
  for (double z : negative_scores) s += std::exp(z - mx);
  const double log_ratio = (gold_score - mx) - std::log(s);
  return -log_ratio / static_cast<double>(negative_scores.size() + 1);
}

double scl_loss(const ContrastiveBatch& batch) {
  return scl_loss(batch.gold_score, batch.negative_scores);
}

ag::Var scl_loss(const ag::Var& scores) {
  const auto n = scores.rows();
  if (n <= 1) return ag::scalar_constant(0.0);
  const auto gold = ag::slice_rows(scores, 0, 1);
  return ag::scale(ag::sub(ag::logsumexp(scores), gold), 1.0 / static_cast<double>(n));
}

namespace {

std::vector<std::pair<int, int>> mlm_cells(const std::vector<int>& masks,
                                           const std::vector<TokenId>& answer) {
  if (answer.empty()) throw ContractError("mlm_loss: empty answer");
  if (answer.size() + 1 > masks.size()) {
    throw ContractError("mlm_loss: answer of " + std::to_string(answer.size()) +
                        " tokens needs l_mask >= " + std::to_string(answer.size() + 1));
  }
  std::vector<std::pair<int, int>> cells;
  for (std::size_t j = 0; j < answer.size(); ++j) cells.push_back({masks[j], answer[j]});
  cells.push_back({masks[answer.size()], special::kEnd});
  return cells;
}

}  // namespace

double mlm_loss(const MlmOutput& mlm, const std::vector<int>& mask_positions,
                const std::vector<TokenId>& answer) {
  const auto cells = mlm_cells(mask_positions, answer);
  double s = 0.0;
  for (const auto& [pos, tok] : cells) s -= mlm.log_prob(pos, tok);
  return s / static_cast<double>(cells.size());
}

ag::Var mlm_loss(const ag::Var& log_probs, const std::vector<int>& mask_positions,
                 const std::vector<TokenId>& answer) {
  return ag::scale(ag::mean(ag::pick(log_probs, mlm_cells(mask_positions, answer))), -1.0);
}

LossReport total_loss(double l_mlm, double l_scl, double lambda, double gamma, double param_norm) {
  if (!std::isfinite(l_mlm) || !std::isfinite(l_scl) || !std::isfinite(param_norm)) {
    throw NumericError("total_loss: non-finite component (mlm=" + std::to_string(l_mlm) +
                       ", scl=" + std::to_string(l_scl) + ")");
  }
  LossReport r;
  r.l_mlm = l_mlm;
  r.l_scl = l_scl;
  r.lambda = lambda;
  r.gamma = gamma;
  r.param_norm = param_norm;
  r.l_objective = l_mlm + lambda * l_scl;
  r.l_total = r.l_objective + gamma * param_norm;
  return r;
}

}  // namespace clozeqa
