#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace clozeqa {

using TokenId = std::int32_t;

// Fixed ids of the special tokens; they occupy the first six slots of every
// vocabulary in this order.
namespace special {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kCls = 2;
inline constexpr TokenId kSep = 3;
inline constexpr TokenId kMask = 4;
inline constexpr TokenId kEnd = 5;
inline constexpr int kCount = 6;
}  // namespace special

// Character range [begin, end) of a token inside its source text.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const CharSpan&) const = default;
};

// Output of the word tokenizer before id lookup.
struct RawToken {
  std::string text;  // lowercased surface (specials keep their bracket form)
  CharSpan offsets;
};

struct TokenizedText {
  std::vector<TokenId> ids;
  std::vector<std::string> surfaces;
  std::vector<CharSpan> offsets;
};

// Lowercased word tokenizer: runs of alphanumerics (and UTF-8 bytes) form a
// word, with apostrophes and hyphens kept when they join two word
// characters; every other non-space character is its own token. Literal
// special tokens such as "[MASK]" are recognized verbatim.
std::vector<RawToken> split_words(std::string_view text);

class Vocab {
 public:
  Vocab();

  static Vocab from_tokens(const std::vector<std::string>& non_special);

  // Returns kUnk when absent.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenizedText tokenize(std::string_view text) const;

  // Rebuilds text from tokens; a single space is inserted wherever the
  // source offsets show a gap, so tokenize -> detokenize recovers the input
  // up to case folding and whitespace collapsing.
  std::string detokenize(const TokenizedText& t) const;
  std::string join(const std::vector<TokenId>& ids) const;

  // One token per line, specials first.
  std::string serialize() const;
  static Vocab deserialize(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

const std::vector<std::string>& special_token_strings();

// All lowercased surface forms of the corpus in first-occurrence order plus
// the six specials. Throws ConfigError on an empty corpus.
Vocab build_vocab(const std::vector<std::string>& corpus);

}  // namespace clozeqa
