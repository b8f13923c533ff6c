#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clozeqa/vocab.hpp"

namespace clozeqa {

// Passage positions are 1-based and inclusive: 1 <= start <= end <= n.
struct Span {
  int start = 1;
  int end = 1;
  int length() const { return end - start + 1; }
  bool operator==(const Span&) const = default;
};

struct Passage {
  std::vector<TokenId> tokens;
  std::vector<std::string> surfaces;  // lowercased, parallel to tokens
  std::string raw;
  std::vector<CharSpan> char_offsets;

  int size() const { return static_cast<int>(tokens.size()); }
  // 1-based access.
  TokenId at(int pos) const { return tokens[static_cast<std::size_t>(pos - 1)]; }
  const std::string& surface(int pos) const { return surfaces[static_cast<std::size_t>(pos - 1)]; }
  std::vector<TokenId> slice(Span s) const;
  std::vector<std::string> surface_slice(Span s) const;
};

Passage make_passage(std::string raw, const Vocab& vocab);

struct EqaExample {
  std::string id;
  Passage passage;
  std::string question;        // raw text, needed by the prompt rules
  std::vector<TokenId> query;  // tokenized question
  Span answer;

  std::vector<TokenId> answer_tokens() const { return passage.slice(answer); }
  std::vector<std::string> answer_surfaces() const { return passage.surface_slice(answer); }
};

// Throws ContractError when an invariant is broken.
void validate(const EqaExample& ex);

struct RawAnswer {
  std::string text;
  long long char_start = -1;  // -1: locate by first occurrence
};

struct RawQuestion {
  std::string id;
  std::string question;
  std::vector<RawAnswer> answers;
};

struct RawRecord {
  std::string context;
  std::vector<RawQuestion> qas;
};

enum class DatasetFormat { MrqaJson, SquadJson };

DatasetFormat parse_dataset_format(const std::string& name);

struct LoadStats {
  std::size_t questions = 0;
  std::size_t loaded = 0;
  std::size_t dropped_unaligned = 0;
  std::vector<std::string> warnings;
};

// mrqa_json: JSON lines (or a JSON array) of {context, qas: [{question,
// answers: [{text, char_start}]}]}. squad_json: the nested SQuAD layout
// {data: [{paragraphs: [{context, qas: [{question, answers: [{text,
// answer_start}]}]}]}]}.
std::vector<RawRecord> read_records(const std::filesystem::path& path, DatasetFormat format,
                                    LoadStats* stats = nullptr);

// All contexts and questions, for vocabulary construction.
std::vector<std::string> corpus_texts(const std::vector<RawRecord>& records);

// Aligns the first listed answer of every question to a token span; records
// whose answer does not fall on token boundaries are dropped and counted.
std::vector<EqaExample> align_records(const std::vector<RawRecord>& records, const Vocab& vocab,
                                      LoadStats& stats);

std::vector<EqaExample> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                     const Vocab& vocab, LoadStats* stats = nullptr);

// Writes records in the mrqa_json line format.
void write_records(const std::filesystem::path& path, const std::vector<RawRecord>& records);

struct FewShotSplit {
  std::vector<EqaExample> train;
  std::vector<EqaExample> dev;
  std::uint64_t seed = 0;
};

// Uniform sampling without replacement: a seeded permutation whose first K
// entries form the training set and next K the development set.
FewShotSplit sample_few_shot(const std::vector<EqaExample>& dataset, int k, std::uint64_t seed);

}  // namespace clozeqa
