#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "clozeqa/dataset.hpp"
#include "clozeqa/synthetic.hpp"
#include "clozeqa/vocab.hpp"

namespace testing {

inline std::filesystem::path data_path(const std::string& rel) {
  return std::filesystem::path(CLOZEQA_TEST_DATA) / rel;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("clozeqa_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

struct RuleRow {
  std::string rule;
  int l_mask = 0;
  std::string query;
  std::string prompt;
};

inline std::vector<RuleRow> rule_table() {
  std::ifstream in(data_path("golden/rule_table.tsv"));
  std::vector<RuleRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    RuleRow r;
    std::string lm;
    std::getline(ss, r.rule, '\t');
    std::getline(ss, lm, '\t');
    std::getline(ss, r.query, '\t');
    std::getline(ss, r.prompt, '\t');
    r.l_mask = std::stoi(lm);
    rows.push_back(r);
  }
  return rows;
}

struct SyntheticData {
  std::vector<clozeqa::RawRecord> records;
  clozeqa::Vocab vocab;
  std::vector<clozeqa::EqaExample> examples;
};

inline SyntheticData synthetic_data(int passages = 64, int per_passage = 1, std::uint64_t seed = 7) {
  SyntheticData d;
  d.records = clozeqa::generate_synthetic_records({passages, per_passage, seed});
  d.vocab = clozeqa::build_vocab(clozeqa::corpus_texts(d.records));
  clozeqa::LoadStats stats;
  d.examples = clozeqa::align_records(d.records, d.vocab, stats);
  return d;
}

}  // namespace testing
