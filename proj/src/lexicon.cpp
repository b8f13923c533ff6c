#include "clozeqa/lexicon.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace clozeqa::lexicon {

namespace {

constexpr std::array<std::string_view, 64> kStopwords = {
    "a",     "an",    "the",   "of",    "in",    "on",    "at",    "to",
    "for",   "from",  "by",    "with",  "and",   "or",    "but",   "as",
    "is",    "are",   "was",   "were",  "be",    "been",  "being", "did",
    "do",    "does",  "has",   "have",  "had",   "it",    "its",   "he",
    "she",   "his",   "her",   "they",  "their", "them",  "this",  "that",
    "these", "those", "which", "who",   "whom",  "whose", "what",  "where",
    "when",  "why",   "how",   "into",  "than",  "then",  "there", "so",
    "not",   "no",    "if",    "while", "after", "before", "about", "also"};

constexpr std::array<std::string_view, 12> kAuxiliaries = {
    "is", "are", "was", "were", "be", "been", "did", "do", "does", "has", "have", "had"};

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_stopword(std::string_view lowered) {
  return std::find(kStopwords.begin(), kStopwords.end(), lowered) != kStopwords.end();
}

bool is_punctuation(std::string_view token) {
  return token.size() == 1 && std::ispunct(static_cast<unsigned char>(token[0]));
}

bool is_sentence_boundary(std::string_view token) {
  return token == "." || token == "!" || token == "?";
}

bool is_auxiliary(std::string_view lowered) {
  return std::find(kAuxiliaries.begin(), kAuxiliaries.end(), lowered) != kAuxiliaries.end();
}

std::string lemma(std::string_view token) {
  std::string w = to_lower(token);
  if (ends_with(w, "'s")) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "'")) {
    w.pop_back();
  }
  if (w.size() > 4 && ends_with(w, "ies")) {
    return w.substr(0, w.size() - 3) + "y";
  }
  if (ends_with(w, "sses")) return w.substr(0, w.size() - 2);
  if (ends_with(w, "xes") || ends_with(w, "ches") || ends_with(w, "shes")) {
    return w.substr(0, w.size() - 2);
  }
  if (w.size() > 3 && ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") &&
      !ends_with(w, "is")) {
    w.pop_back();
  }
  return w;
}

}  // namespace clozeqa::lexicon
