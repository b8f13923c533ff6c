#include "clozeqa/vocab.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "clozeqa/error.hpp"

namespace clozeqa {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

const std::vector<std::string>& special_token_strings() {
  static const std::vector<std::string> kSpecials = {"[PAD]", "[UNK]", "[CLS]",
                                                     "[SEP]", "[MASK]", "[END]"};
  return kSpecials;
}

std::vector<RawToken> split_words(std::string_view text) {
  std::vector<RawToken> out;
  const auto& specials = special_token_strings();
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '[') {
      bool matched = false;
      for (const auto& s : specials) {
        if (text.substr(i, s.size()) == s) {
          out.push_back({s, {i, i + s.size()}});
          i += s.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    if (!is_word_char(c)) {
      out.push_back({std::string(1, static_cast<char>(c)), {i, i + 1}});
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size()) {
      const auto cj = static_cast<unsigned char>(text[j]);
      if (is_word_char(cj)) {
        ++j;
      } else if ((cj == '\'' || cj == '-') && j + 1 < text.size() &&
                 is_word_char(static_cast<unsigned char>(text[j + 1]))) {
        j += 2;
      } else {
        break;
      }
    }
    std::string word(text.substr(i, j - i));
    for (auto& ch : word) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    out.push_back({std::move(word), {i, j}});
    i = j;
  }
  return out;
}

Vocab::Vocab() {
  for (const auto& s : special_token_strings()) add(s);
}

Vocab Vocab::from_tokens(const std::vector<std::string>& non_special) {
  Vocab v;
  for (const auto& t : non_special) {
    if (!v.contains(t)) v.add(t);
  }
  return v;
}

void Vocab::add(std::string token) {
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? special::kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ContractError("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenizedText Vocab::tokenize(std::string_view text) const {
  TokenizedText out;
  for (auto& raw : split_words(text)) {
    out.ids.push_back(id(raw.text));
    out.offsets.push_back(raw.offsets);
    out.surfaces.push_back(std::move(raw.text));
  }
  return out;
}

std::string Vocab::detokenize(const TokenizedText& t) const {
  std::string out;
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    if (i > 0 && t.offsets[i].begin > t.offsets[i - 1].end) out += ' ';
    out += t.ids[i] == special::kUnk && i < t.surfaces.size() ? t.surfaces[i] : token(t.ids[i]);
  }
  return out;
}

std::string Vocab::join(const std::vector<TokenId>& ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

std::string Vocab::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocab Vocab::deserialize(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  const auto& specials = special_token_strings();
  if (lines.size() < specials.size()) throw DataError("vocab: missing special tokens");
  for (std::size_t i = 0; i < specials.size(); ++i) {
    if (lines[i] != specials[i]) {
      throw DataError("vocab: special token " + specials[i] + " expected on line " +
                      std::to_string(i + 1) + ", found " + lines[i]);
    }
  }
  Vocab v;
  for (std::size_t i = specials.size(); i < lines.size(); ++i) {
    if (v.contains(lines[i])) throw DataError("vocab: duplicate token " + lines[i]);
    v.add(lines[i]);
  }
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocab " + path.string());
  out << serialize();
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocab " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

Vocab build_vocab(const std::vector<std::string>& corpus) {
  if (corpus.empty()) throw ConfigError("build_vocab: empty corpus");
  std::vector<std::string> words;
  for (const auto& text : corpus) {
    for (auto& raw : split_words(text)) words.push_back(std::move(raw.text));
  }
  return Vocab::from_tokens(words);
}

}  // namespace clozeqa
