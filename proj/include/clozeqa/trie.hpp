#pragma once

#include <map>
#include <vector>

#include "clozeqa/dataset.hpp"
#include "clozeqa/model.hpp"
#include "clozeqa/span.hpp"

namespace clozeqa {

// Token trie over every passage substring of length <= max_depth. Every
// node below the root spells a substring, so [END] is legal after any
// non-empty path.
class PrefixTree {
 public:
  struct Node {
    TokenId token = special::kPad;
    int depth = 0;
    std::map<TokenId, int> children;
    std::vector<int> starts;  // 1-based passage starts realizing this path, ascending
    bool terminal() const { return depth >= 1; }
  };

  // O(n * max_depth).
  static PrefixTree build(const Passage& passage, int max_depth);

  int max_depth() const { return max_depth_; }
  std::size_t node_count() const { return nodes_.size(); }
  const Node& node(int index) const { return nodes_[static_cast<std::size_t>(index)]; }
  static constexpr int kRoot = 0;

  // Node index for the path, or -1.
  int find(const std::vector<TokenId>& path) const;
  bool contains(const std::vector<TokenId>& path) const { return find(path) >= 0; }

  // Children of the path's node in id order, followed by [END] for a
  // non-empty path. Throws ContractError when the path is not in the trie.
  std::vector<TokenId> legal_continuations(const std::vector<TokenId>& path) const;
  std::vector<TokenId> continuations_at(int node_index) const;

 private:
  std::vector<Node> nodes_;
  int max_depth_ = 0;
};

struct DecodedAnswer {
  std::vector<TokenId> tokens;
  double score = 0.0;
  int earliest_start = 0;  // 1-based
  bool finished = false;

  Span span() const {
    return {earliest_start, earliest_start + static_cast<int>(tokens.size()) - 1};
  }
};

struct DecodeResult {
  std::vector<DecodedAnswer> ranked;  // best first
  bool degraded = false;              // no hypothesis reached [END]

  const DecodedAnswer& best() const { return ranked.front(); }
};

// Orders answers by score (descending), then earlier start, then shorter
// length, then token ids.
bool ranks_before(const DecodedAnswer& a, const DecodedAnswer& b);

// Position-by-position beam search over the template's mask slots. At each
// slot the open hypotheses expand only into legal trie continuations, the
// best `beam_width` expansions survive, and those ending in [END] are moved
// to a finished list that is never pruned. The final ranking is over the
// finished list; a hypothesis's score is the span score of its tokens.
DecodeResult decode(const MlmOutput& mlm, const PrefixTree& trie,
                    const std::vector<int>& mask_positions, int beam_width,
                    ScoreMode mode = ScoreMode::SumProb);

// Earliest occurrence of `answer` in the passage. A miss means the decoder
// produced a non-substring and throws ContractError.
Span answer_to_span(const std::vector<TokenId>& answer, const Passage& passage);

}  // namespace clozeqa
