#pragma once

#include <string>
#include <string_view>

// Small closed word lists and the suffix-rule lemmatizer shared by the
// prompt rules, the span filter and knowledge lookup.
namespace clozeqa::lexicon {

std::string to_lower(std::string_view s);

bool is_stopword(std::string_view lowered);

// Single-character punctuation token (as produced by the tokenizer).
bool is_punctuation(std::string_view token);

// '.', '!' or '?'.
bool is_sentence_boundary(std::string_view token);

// Auxiliary verbs used as "be/done" by the query rewriting rules.
bool is_auxiliary(std::string_view lowered);

// Lowercases, drops a possessive marker, then applies the first matching
// inflection rule:
//   ies -> y     (len > 4)        "companies" -> "company"
//   sses -> ss                    "classes" -> "class"
//   (x|ch|sh)es -> (x|ch|sh)      "boxes" -> "box"
//   s -> ''      (len > 3, not ss/us/is)   "exports" -> "export"
// Everything else is returned lowercased.
std::string lemma(std::string_view token);

}  // namespace clozeqa::lexicon
