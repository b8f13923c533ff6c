#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "clozeqa/dataset.hpp"
#include "clozeqa/vocab.hpp"

namespace clozeqa {

class KnowledgeTable;

enum class RuleId { R1, R2, R3, R4, Fallback };

const char* rule_name(RuleId rule);

struct RewrittenQuery {
  std::string text;  // rendered prompt, masks spelled "[MASK]"
  RuleId rule = RuleId::Fallback;
};

// Rewrites a question into a declarative cloze with exactly l_mask masks.
//
//   R1  <s> be/done ... ?   masks replace the wh-phrase in place
//                           (<s> in what/who/whose/whom/which/how)
//   R2  where be/done ... ? ... be/done at the place of [MASK] ...
//   R3  when be/done ... ?  ... be/done at the time of [MASK] ...
//   R4  why be/done ... ?   the reason why ... is that [MASK] ...
//   otherwise:              query followed by the masks
//
// Rules are tried in that order. Trailing sentence punctuation is dropped
// before rewriting and a period appended after; the fallback keeps the
// query verbatim.
RewrittenQuery rewrite_query(std::string_view question, int l_mask);

struct PromptTemplate {
  std::vector<TokenId> tokens;
  std::vector<std::string> surfaces;
  std::vector<int> mask_positions;      // 0-based into tokens, contiguous
  std::vector<int> selected_positions;  // 0-based into tokens, disjoint from masks
  RuleId rule = RuleId::Fallback;
  std::string text;

  int size() const { return static_cast<int>(tokens.size()); }
  int l_mask() const { return static_cast<int>(mask_positions.size()); }
};

PromptTemplate build_prompt(std::string_view question, int l_mask, const Vocab& vocab);
// Token-id entry point: the ids are joined back into (lowercased) text first.
PromptTemplate build_prompt(const std::vector<TokenId>& query, int l_mask, const Vocab& vocab);

// Throws ContractError when a PromptTemplate invariant is broken.
void validate(const PromptTemplate& t);

enum class SelectionPolicy { KbLinked, ContentWords, AllNonMask };

SelectionPolicy parse_selection_policy(const std::string& name);
const char* selection_policy_name(SelectionPolicy p);

// Populates selected_positions. An empty kb_linked selection falls back to
// content words and appends a note to *warnings.
PromptTemplate select_prompt_tokens(PromptTemplate t, const KnowledgeTable& kb,
                                    SelectionPolicy policy,
                                    std::vector<std::string>* warnings = nullptr);

enum class Segment { Cls, Prompt, Sep, Passage };

// [CLS] prompt [SEP] passage [SEP]; all indices 0-based into input_ids.
struct AssembledInput {
  std::vector<TokenId> input_ids;
  std::vector<Segment> segments;
  std::vector<int> prompt_mask_positions;
  std::vector<int> selected_positions;  // absolute
  int prompt_begin = 1;
  int prompt_length = 0;
  int passage_begin = 0;  // inclusive
  int passage_end = 0;    // inclusive

  int size() const { return static_cast<int>(input_ids.size()); }
  int passage_length() const { return passage_end - passage_begin + 1; }
};

// Throws ContractError naming `example_id` when the sequence would exceed
// max_len; nothing is truncated silently.
AssembledInput assemble_input(const PromptTemplate& t, const Passage& passage, int max_len,
                              std::string_view example_id = {});

}  // namespace clozeqa
