#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clozeqa/dataset.hpp"

namespace clozeqa {

// Template-built biographies: a subject and a distractor person, each with a
// birthplace, birth year, employer, profession and invention. Every question
// is answerable by a token-aligned passage span.
struct SyntheticOptions {
  int passages = 64;
  int questions_per_passage = 1;
  std::uint64_t seed = 7;
};

enum class SyntheticQuestion {
  WhereBorn,       // Where was P born?
  WhenBorn,        // When was P born?
  WhatInvent,      // What did P invent?
  WhichCompany,    // Which company did P work for?
  WhyLeave,        // Why did P leave C?
  BornInWhich,     // P was born in which city?
  WhoFounded,      // Who founded C?
  WhatProfession,  // What was the profession of P?
};

inline constexpr int kSyntheticQuestionKinds = 8;

std::vector<RawRecord> generate_synthetic_records(const SyntheticOptions& options);

// Question strings only, cycling through every kind, with varied entities.
std::vector<std::string> synthetic_question_corpus(int n, std::uint64_t seed);

}  // namespace clozeqa
