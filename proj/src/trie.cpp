#include "clozeqa/trie.hpp"

#include <algorithm>

#include "clozeqa/error.hpp"

namespace clozeqa {

PrefixTree PrefixTree::build(const Passage& passage, int max_depth) {
  if (max_depth < 1) throw ContractError("build_trie: max_depth must be >= 1");
  PrefixTree t;
  t.max_depth_ = max_depth;
  t.nodes_.emplace_back();
  const int n = passage.size();
  for (int start = 1; start <= n; ++start) {
    int cur = kRoot;
    for (int pos = start; pos <= n && pos - start < max_depth; ++pos) {
      const TokenId tok = passage.at(pos);
      auto it = t.nodes_[static_cast<std::size_t>(cur)].children.find(tok);
      int next = 0;
      if (it == t.nodes_[static_cast<std::size_t>(cur)].children.end()) {
        next = static_cast<int>(t.nodes_.size());
        Node child;
        child.token = tok;
        child.depth = t.nodes_[static_cast<std::size_t>(cur)].depth + 1;
        t.nodes_.push_back(std::move(child));
        t.nodes_[static_cast<std::size_t>(cur)].children.emplace(tok, next);
      } else {
        next = it->second;
      }
      auto& starts = t.nodes_[static_cast<std::size_t>(next)].starts;
      if (starts.empty() || starts.back() != start) starts.push_back(start);
      cur = next;
    }
  }
  return t;
}

int PrefixTree::find(const std::vector<TokenId>& path) const {
  int cur = kRoot;
  for (TokenId tok : path) {
    const auto& children = nodes_[static_cast<std::size_t>(cur)].children;
    auto it = children.find(tok);
    if (it == children.end()) return -1;
    cur = it->second;
  }
  return cur;
}

std::vector<TokenId> PrefixTree::continuations_at(int node_index) const {
  if (node_index < 0 || static_cast<std::size_t>(node_index) >= nodes_.size()) {
    throw ContractError("continuations_at: node index out of range");
  }
  const Node& nd = node(node_index);
  std::vector<TokenId> out;
  out.reserve(nd.children.size() + 1);
  for (const auto& [tok, child] : nd.children) out.push_back(tok);
  if (nd.terminal()) out.push_back(special::kEnd);
  return out;
}

std::vector<TokenId> PrefixTree::legal_continuations(const std::vector<TokenId>& path) const {
  const int idx = find(path);
  if (idx < 0) throw ContractError("legal_continuations: path is not in the prefix tree");
  return continuations_at(idx);
}

bool ranks_before(const DecodedAnswer& a, const DecodedAnswer& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.earliest_start != b.earliest_start) return a.earliest_start < b.earliest_start;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

namespace {

struct Hypothesis {
  DecodedAnswer answer;
  int node = PrefixTree::kRoot;
};

double step_score(const MlmOutput& mlm, int position, TokenId tok, ScoreMode mode) {
  return mode == ScoreMode::SumProb ? mlm.prob(position, tok) : mlm.log_prob(position, tok);
}

}  // namespace

DecodeResult decode(const MlmOutput& mlm, const PrefixTree& trie,
                    const std::vector<int>& mask_positions, int beam_width, ScoreMode mode) {
  if (beam_width < 1) throw ContractError("decode: beam_width must be >= 1");
  if (mask_positions.size() < 2) throw ContractError("decode: need l_mask >= 2");

  std::vector<Hypothesis> beam(1);
  std::vector<DecodedAnswer> finished;
  for (std::size_t t = 0; t < mask_positions.size() && !beam.empty(); ++t) {
    const int pos = mask_positions[t];
    std::vector<Hypothesis> expansions;
    for (const auto& h : beam) {
      for (TokenId tok : trie.continuations_at(h.node)) {
        Hypothesis e;
        e.answer.tokens = h.answer.tokens;
        e.answer.score = h.answer.score + step_score(mlm, pos, tok, mode);
        if (tok == special::kEnd) {
          e.node = h.node;
          e.answer.finished = true;
          e.answer.earliest_start = h.answer.earliest_start;
        } else {
          e.node = trie.node(h.node).children.at(tok);
          e.answer.tokens.push_back(tok);
          e.answer.earliest_start = trie.node(e.node).starts.front();
        }
        expansions.push_back(std::move(e));
      }
    }
    std::sort(expansions.begin(), expansions.end(), [](const Hypothesis& a, const Hypothesis& b) {
      if (ranks_before(a.answer, b.answer)) return true;
      if (ranks_before(b.answer, a.answer)) return false;
      return a.answer.finished && !b.answer.finished;
    });
    if (expansions.size() > static_cast<std::size_t>(beam_width)) {
      expansions.resize(static_cast<std::size_t>(beam_width));
    }
    std::vector<Hypothesis> next;
    for (auto& e : expansions) {
      if (e.answer.finished) {
        finished.push_back(std::move(e.answer));
      } else {
        next.push_back(std::move(e));
      }
    }
    beam = std::move(next);
  }

  DecodeResult r;
  if (finished.empty()) {
    r.degraded = true;
    for (auto& h : beam) r.ranked.push_back(std::move(h.answer));
  } else {
    r.ranked = std::move(finished);
  }
  std::sort(r.ranked.begin(), r.ranked.end(), ranks_before);
  return r;
}

Span answer_to_span(const std::vector<TokenId>& answer, const Passage& passage) {
  const int n = passage.size();
  const int len = static_cast<int>(answer.size());
  if (len >= 1) {
    for (int k = 1; k + len - 1 <= n; ++k) {
      bool match = true;
      for (int j = 0; j < len && match; ++j) match = passage.at(k + j) == answer[static_cast<std::size_t>(j)];
      if (match) return {k, k + len - 1};
    }
  }
  throw ContractError("answer_to_span: decoded answer is not a passage substring");
}

}  // namespace clozeqa
