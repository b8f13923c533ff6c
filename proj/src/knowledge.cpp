#include "clozeqa/knowledge.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "clozeqa/error.hpp"
#include "clozeqa/lexicon.hpp"

namespace clozeqa {

void KnowledgeTable::add_entity(std::string entity_id, std::string_view lemma, Vector embedding) {
  if (d_kb_ <= 0) throw ContractError("KnowledgeTable: d_kb must be positive");
  if (embedding.size() != d_kb_) {
    throw ShapeError("KnowledgeTable: entity " + entity_id + " has dimension " +
                     std::to_string(embedding.size()) + ", expected " + std::to_string(d_kb_));
  }
  const std::size_t idx = entity_ids_.size();
  std::string lem = lexicon::lemma(lemma);
  lemma_index_[lem].push_back(idx);
  entity_ids_.push_back(std::move(entity_id));
  entity_lemmas_.push_back(std::move(lem));
  embeddings_.push_back(std::move(embedding));
}

std::optional<Vector> KnowledgeTable::lookup(std::string_view token) const {
  auto it = lemma_index_.find(lexicon::lemma(token));
  if (it == lemma_index_.end()) return std::nullopt;
  Vector sum = Vector::Zero(d_kb_);
  for (std::size_t e : it->second) sum += embeddings_[e];
  return sum / static_cast<double>(it->second.size());
}

std::string KnowledgeTable::to_tsv() const {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < entity_ids_.size(); ++i) {
    out += entity_ids_[i];
    out += '\t';
    out += entity_lemmas_[i];
    for (int j = 0; j < d_kb_; ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), embeddings_[i][j]);
      out += '\t';
      out.append(buf, end);
    }
    out += '\n';
  }
  return out;
}

KnowledgeTable KnowledgeTable::from_tsv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  KnowledgeTable kb;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 3) {
      throw DataError("kb line " + std::to_string(line_no) + ": expected id, lemma and a vector");
    }
    const int dim = static_cast<int>(fields.size()) - 2;
    if (kb.d_kb_ == 0) kb.d_kb_ = dim;
    if (dim != kb.d_kb_) {
      throw DataError("kb line " + std::to_string(line_no) + ": dimension " + std::to_string(dim) +
                      " differs from " + std::to_string(kb.d_kb_));
    }
    Vector v(dim);
    for (int j = 0; j < dim; ++j) {
      const auto& f = fields[static_cast<std::size_t>(j) + 2];
      double x = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw DataError("kb line " + std::to_string(line_no) + ": bad number '" + f + "'");
      }
      v[j] = x;
    }
    kb.add_entity(fields[0], fields[1], std::move(v));
  }
  return kb;
}

KnowledgeTable KnowledgeTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read kb " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_tsv(ss.str());
}

void KnowledgeTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write kb " + path.string());
  out << to_tsv();
}

Matrix inject_passage_knowledge(const Matrix& passage_embeddings,
                                const std::vector<std::string>& passage_tokens,
                                const KnowledgeTable& kb, const KnowledgeProjection& proj) {
  if (static_cast<std::size_t>(passage_embeddings.rows()) != passage_tokens.size()) {
    throw ShapeError("inject_passage_knowledge: " + std::to_string(passage_embeddings.rows()) +
                     " rows for " + std::to_string(passage_tokens.size()) + " tokens");
  }
  Matrix g = passage_embeddings;
  if (kb.empty()) return g;
  if (proj.weight.rows() != kb.d_kb() || proj.weight.cols() != passage_embeddings.cols()) {
    throw ShapeError("inject_passage_knowledge: projection is " +
                     std::to_string(proj.weight.rows()) + "x" + std::to_string(proj.weight.cols()) +
                     ", expected " + std::to_string(kb.d_kb()) + "x" +
                     std::to_string(passage_embeddings.cols()));
  }
  for (std::size_t i = 0; i < passage_tokens.size(); ++i) {
    if (auto e = kb.lookup(passage_tokens[i])) {
      const auto r = static_cast<Eigen::Index>(i);
      g.row(r) = passage_embeddings.row(r) + e->transpose() * proj.weight;
    }
  }
  return g;
}

std::vector<std::string> content_lemmas(const Vocab& vocab) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t i = special::kCount; i < vocab.size(); ++i) {
    const auto& t = vocab.tokens()[i];
    if (lexicon::is_punctuation(t) || lexicon::is_stopword(t)) continue;
    auto lem = lexicon::lemma(t);
    if (seen.insert(lem).second) out.push_back(std::move(lem));
  }
  return out;
}

KnowledgeTable generate_synthetic_kb(const Vocab& vocab, double coverage, int d_kb,
                                     std::uint64_t seed) {
  if (coverage < 0.0 || coverage > 1.0) throw ContractError("synthetic kb: coverage not in [0,1]");
  KnowledgeTable kb(d_kb);
  auto lemmas = content_lemmas(vocab);
  std::mt19937_64 rng(seed);
  std::shuffle(lemmas.begin(), lemmas.end(), rng);
  const auto count = static_cast<std::size_t>(std::llround(coverage * static_cast<double>(lemmas.size())));
  lemmas.resize(std::min(count, lemmas.size()));
  std::sort(lemmas.begin(), lemmas.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution second_entity(0.25);
  std::size_t next_id = 0;
  for (const auto& lem : lemmas) {
    const int n_entities = second_entity(rng) ? 2 : 1;
    for (int e = 0; e < n_entities; ++e) {
      Vector v(d_kb);
      for (int j = 0; j < d_kb; ++j) v[j] = normal(rng);
      v /= v.norm();
      kb.add_entity("Q" + std::to_string(next_id++), lem, std::move(v));
    }
  }
  return kb;
}

}  // namespace clozeqa
