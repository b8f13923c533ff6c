#include "clozeqa/prompt.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

#include "clozeqa/error.hpp"
#include "clozeqa/knowledge.hpp"
#include "clozeqa/lexicon.hpp"

namespace clozeqa {

const char* rule_name(RuleId rule) {
  switch (rule) {
    case RuleId::R1: return "R1";
    case RuleId::R2: return "R2";
    case RuleId::R3: return "R3";
    case RuleId::R4: return "R4";
    case RuleId::Fallback: return "FALLBACK";
  }
  return "?";
}

namespace {

constexpr std::array<std::string_view, 6> kRule1Wh = {"what", "who", "whose", "whom", "which", "how"};
// wh-words that may take one noun before the auxiliary ("what year was ...").
constexpr std::array<std::string_view, 3> kDeterminerWh = {"what", "which", "whose"};
constexpr std::array<std::string_view, 3> kOtherWh = {"where", "when", "why"};

template <std::size_t N>
bool in(const std::array<std::string_view, N>& list, std::string_view w) {
  return std::find(list.begin(), list.end(), w) != list.end();
}

struct Word {
  std::string text;  // as written
  std::string key;   // lowercased, surrounding punctuation stripped
};

std::string strip_key(std::string_view w) {
  std::size_t b = 0;
  std::size_t e = w.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(w[b]))) ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(w[e - 1]))) --e;
  return lexicon::to_lower(w.substr(b, e - b));
}

std::vector<Word> split_ws(std::string_view s) {
  std::vector<Word> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) out.push_back({w, strip_key(w)});
  return out;
}

bool is_clause_break(const std::string& w) {
  return !w.empty() && (w.back() == ',' || w.back() == ';' || w.back() == ':');
}

// Index of the last word of the clause beginning at `from`.
std::size_t clause_end(const std::vector<Word>& words, std::size_t from) {
  for (std::size_t i = from; i < words.size(); ++i) {
    if (is_clause_break(words[i].text)) return i;
  }
  return words.size() - 1;
}

std::string capitalize(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

// Splits trailing clause punctuation off a word: "(RAF)," -> {"(RAF)", ","}.
std::pair<std::string, std::string> split_break(const std::string& w) {
  if (is_clause_break(w)) return {w.substr(0, w.size() - 1), w.substr(w.size() - 1)};
  return {w, ""};
}

class Builder {
 public:
  void word(std::string w) {
    if (!w.empty()) out_.push_back(std::move(w));
  }
  void words(const std::vector<Word>& ws, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e && i < ws.size(); ++i) word(ws[i].text);
  }
  void masks(int n, const std::string& suffix) {
    for (int i = 0; i < n; ++i) out_.push_back(i + 1 == n ? "[MASK]" + suffix : "[MASK]");
  }
  std::string finish(bool append_period) {
    std::string s;
    for (std::size_t i = 0; i < out_.size(); ++i) {
      if (i > 0) s += ' ';
      s += out_[i];
    }
    if (append_period) {
      const char last = s.empty() ? ' ' : s.back();
      if (last != '.' && last != '!' && last != '?') s += '.';
    }
    return s;
  }
  void capitalize_first() {
    if (!out_.empty()) out_[0] = capitalize(out_[0]);
  }

 private:
  std::vector<std::string> out_;
};

bool clause_has_aux(const std::vector<Word>& w, std::size_t b, std::size_t e) {
  for (std::size_t i = b; i <= e && i < w.size(); ++i) {
    if (lexicon::is_auxiliary(w[i].key)) return true;
  }
  return false;
}

bool try_rule1(const std::vector<Word>& w, int l_mask, std::string& out) {
  if (w.empty()) return false;
  // Fronted wh-word directly followed by an auxiliary.
  if (in(kRule1Wh, w[0].key) && w.size() > 1 && lexicon::is_auxiliary(w[1].key)) {
    Builder b;
    b.masks(l_mask, "");
    b.words(w, 1, w.size());
    out = b.finish(true);
    return true;
  }
  // Fronted "what/which/whose <noun>" followed by an auxiliary.
  if (in(kDeterminerWh, w[0].key) && w.size() > 2 && !lexicon::is_auxiliary(w[1].key) &&
      !is_clause_break(w[1].text) && lexicon::is_auxiliary(w[2].key)) {
    Builder b;
    b.masks(l_mask, "");
    b.words(w, 2, w.size());
    out = b.finish(true);
    return true;
  }
  // In-situ wh-phrase after an auxiliary: "... is written by someone born in what year".
  if (in(kRule1Wh, w[0].key) || in(kOtherWh, w[0].key)) return false;
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (!in(kRule1Wh, w[i].key)) continue;
    if (!clause_has_aux(w, 0, i - 1)) return false;
    const std::size_t e = clause_end(w, i);
    const auto [last, punct] = split_break(w[e].text);
    Builder b;
    b.words(w, 0, i);
    b.masks(l_mask, punct);
    b.words(w, e + 1, w.size());
    out = b.finish(true);
    return true;
  }
  return false;
}

// Shared shape of R2 and R3: "where/when" + clause -> clause + phrase + masks.
bool try_place_time(const std::vector<Word>& w, std::string_view wh, const char* phrase,
                    int l_mask, std::string& out) {
  if (w.size() < 2 || w[0].key != wh) return false;
  if (lexicon::is_auxiliary(w[1].key)) {
    // Inverted: "where is X" -> "X is at the place of".
    if (w.size() < 3) return false;
    const std::size_t e = clause_end(w, 2);
    const auto [last, punct] = split_break(w[e].text);
    Builder b;
    b.words(w, 2, e);
    b.word(last);
    b.capitalize_first();
    b.word(lexicon::to_lower(w[1].text));
    b.word(phrase);
    b.masks(l_mask, punct);
    b.words(w, e + 1, w.size());
    out = b.finish(true);
    return true;
  }
  // Declarative clause: "when X was introduced, ..." -> "X was introduced at the time of".
  const std::size_t e = clause_end(w, 1);
  if (!clause_has_aux(w, 1, e)) return false;
  const auto [last, punct] = split_break(w[e].text);
  Builder b;
  b.words(w, 1, e);
  b.word(last);
  b.capitalize_first();
  b.word(phrase);
  b.masks(l_mask, punct);
  b.words(w, e + 1, w.size());
  out = b.finish(true);
  return true;
}

bool try_rule4(const std::vector<Word>& w, int l_mask, std::string& out) {
  if (w.size() < 2 || w[0].key != "why") return false;
  const std::size_t e = clause_end(w, 1);
  if (!clause_has_aux(w, 1, e)) return false;
  const auto [last, punct] = split_break(w[e].text);
  Builder b;
  b.word("The reason why");
  b.words(w, 1, e);
  b.word(last);
  b.word("is that");
  b.masks(l_mask, punct);
  b.words(w, e + 1, w.size());
  out = b.finish(true);
  return true;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

RewrittenQuery rewrite_query(std::string_view question, int l_mask) {
  if (l_mask < 1) throw ContractError("rewrite_query: l_mask must be >= 1");
  const std::string original = trim(question);
  std::string body = original;
  while (!body.empty() && (body.back() == '?' || body.back() == '.' || body.back() == '!' ||
                           std::isspace(static_cast<unsigned char>(body.back())))) {
    body.pop_back();
  }
  const auto words = split_ws(body);

  RewrittenQuery r;
  if (try_rule1(words, l_mask, r.text)) {
    r.rule = RuleId::R1;
  } else if (try_place_time(words, "where", "at the place of", l_mask, r.text)) {
    r.rule = RuleId::R2;
  } else if (try_place_time(words, "when", "at the time of", l_mask, r.text)) {
    r.rule = RuleId::R3;
  } else if (try_rule4(words, l_mask, r.text)) {
    r.rule = RuleId::R4;
  } else {
    Builder b;
    if (!original.empty()) b.word(original);
    b.masks(l_mask, "");
    r.text = b.finish(true);
    r.rule = RuleId::Fallback;
  }
  return r;
}

void validate(const PromptTemplate& t) {
  const int m = t.size();
  if (t.mask_positions.empty()) throw ContractError("prompt: no mask positions");
  for (std::size_t i = 0; i < t.mask_positions.size(); ++i) {
    const int p = t.mask_positions[i];
    if (p < 0 || p >= m || t.tokens[static_cast<std::size_t>(p)] != special::kMask) {
      throw ContractError("prompt: mask position does not hold [MASK]");
    }
    if (i > 0 && p != t.mask_positions[i - 1] + 1) {
      throw ContractError("prompt: mask positions are not contiguous");
    }
  }
  if (static_cast<int>(t.selected_positions.size()) >= m) {
    throw ContractError("prompt: too many selected tokens");
  }
  for (int s : t.selected_positions) {
    if (s < 0 || s >= m) throw ContractError("prompt: selected position out of range");
    if (std::find(t.mask_positions.begin(), t.mask_positions.end(), s) != t.mask_positions.end()) {
      throw ContractError("prompt: selected position overlaps a mask");
    }
  }
}

PromptTemplate build_prompt(std::string_view question, int l_mask, const Vocab& vocab) {
  const auto rewritten = rewrite_query(question, l_mask);
  auto tok = vocab.tokenize(rewritten.text);
  PromptTemplate t;
  t.tokens = std::move(tok.ids);
  t.surfaces = std::move(tok.surfaces);
  t.rule = rewritten.rule;
  t.text = rewritten.text;
  for (int i = 0; i < t.size(); ++i) {
    if (t.tokens[static_cast<std::size_t>(i)] == special::kMask) t.mask_positions.push_back(i);
  }
  if (t.l_mask() != l_mask) {
    // A literal "[MASK]" inside the question would break the invariant.
    throw ContractError("build_prompt: question already contains a [MASK] token");
  }
  validate(t);
  return t;
}

PromptTemplate build_prompt(const std::vector<TokenId>& query, int l_mask, const Vocab& vocab) {
  if (query.empty()) throw ContractError("build_prompt: empty query");
  return build_prompt(vocab.join(query), l_mask, vocab);
}

SelectionPolicy parse_selection_policy(const std::string& name) {
  if (name == "kb_linked") return SelectionPolicy::KbLinked;
  if (name == "content_words") return SelectionPolicy::ContentWords;
  if (name == "all_non_mask") return SelectionPolicy::AllNonMask;
  throw ConfigError("unknown selection policy: " + name);
}

const char* selection_policy_name(SelectionPolicy p) {
  switch (p) {
    case SelectionPolicy::KbLinked: return "kb_linked";
    case SelectionPolicy::ContentWords: return "content_words";
    case SelectionPolicy::AllNonMask: return "all_non_mask";
  }
  return "?";
}

namespace {

bool is_special(TokenId id) { return id < special::kCount && id != special::kUnk; }

std::vector<int> content_positions(const PromptTemplate& t) {
  std::vector<int> out;
  for (int i = 0; i < t.size(); ++i) {
    const auto& s = t.surfaces[static_cast<std::size_t>(i)];
    if (is_special(t.tokens[static_cast<std::size_t>(i)])) continue;
    if (lexicon::is_punctuation(s) || lexicon::is_stopword(s)) continue;
    out.push_back(i);
  }
  return out;
}

}  // namespace

PromptTemplate select_prompt_tokens(PromptTemplate t, const KnowledgeTable& kb,
                                    SelectionPolicy policy, std::vector<std::string>* warnings) {
  t.selected_positions.clear();
  switch (policy) {
    case SelectionPolicy::AllNonMask:
      for (int i = 0; i < t.size(); ++i) {
        if (t.tokens[static_cast<std::size_t>(i)] != special::kMask) t.selected_positions.push_back(i);
      }
      break;
    case SelectionPolicy::ContentWords:
      t.selected_positions = content_positions(t);
      break;
    case SelectionPolicy::KbLinked:
      for (int i : content_positions(t)) {
        if (kb.has_lemma(lexicon::lemma(t.surfaces[static_cast<std::size_t>(i)]))) {
          t.selected_positions.push_back(i);
        }
      }
      if (t.selected_positions.empty()) {
        if (warnings) warnings->push_back("kb_linked selected no prompt tokens; using content_words");
        t.selected_positions = content_positions(t);
      }
      break;
  }
  validate(t);
  return t;
}

AssembledInput assemble_input(const PromptTemplate& t, const Passage& passage, int max_len,
                              std::string_view example_id) {
  const int needed = t.size() + passage.size() + 3;
  if (needed > max_len) {
    throw ContractError("assemble_input: example '" + std::string(example_id) + "' needs " +
                        std::to_string(needed) + " positions, max_len is " +
                        std::to_string(max_len));
  }
  if (passage.size() < 1) throw ContractError("assemble_input: empty passage");
  AssembledInput in;
  in.input_ids.reserve(static_cast<std::size_t>(needed));
  in.input_ids.push_back(special::kCls);
  in.segments.push_back(Segment::Cls);
  for (TokenId id : t.tokens) {
    in.input_ids.push_back(id);
    in.segments.push_back(Segment::Prompt);
  }
  in.input_ids.push_back(special::kSep);
  in.segments.push_back(Segment::Sep);
  in.passage_begin = static_cast<int>(in.input_ids.size());
  for (TokenId id : passage.tokens) {
    in.input_ids.push_back(id);
    in.segments.push_back(Segment::Passage);
  }
  in.passage_end = static_cast<int>(in.input_ids.size()) - 1;
  in.input_ids.push_back(special::kSep);
  in.segments.push_back(Segment::Sep);
  in.prompt_begin = 1;
  in.prompt_length = t.size();
  for (int p : t.mask_positions) in.prompt_mask_positions.push_back(p + 1);
  for (int p : t.selected_positions) in.selected_positions.push_back(p + 1);
  return in;
}

}  // namespace clozeqa
