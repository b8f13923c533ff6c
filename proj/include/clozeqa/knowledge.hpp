#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clozeqa/tensor.hpp"
#include "clozeqa/vocab.hpp"

namespace clozeqa {

// Entity embeddings indexed by lemma. Immutable once built.
class KnowledgeTable {
 public:
  explicit KnowledgeTable(int d_kb = 0) : d_kb_(d_kb) {}

  // The lemma column is passed through lexicon::lemma before indexing.
  void add_entity(std::string entity_id, std::string_view lemma, Vector embedding);

  int d_kb() const { return d_kb_; }
  std::size_t entity_count() const { return entity_ids_.size(); }
  bool empty() const { return entity_ids_.empty(); }
  bool has_lemma(const std::string& lemma) const { return lemma_index_.count(lemma) > 0; }
  const std::map<std::string, std::vector<std::size_t>>& lemma_index() const {
    return lemma_index_;
  }
  const Vector& embedding(std::size_t entity) const { return embeddings_[entity]; }
  const std::string& entity_id(std::size_t entity) const { return entity_ids_[entity]; }

  // Mean of the embeddings of every entity sharing the token's lemma.
  std::optional<Vector> lookup(std::string_view token) const;

  // TSV: entity_id, lemma, then d_kb floats.
  std::string to_tsv() const;
  static KnowledgeTable from_tsv(std::string_view text);
  static KnowledgeTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  int d_kb_;
  std::vector<std::string> entity_ids_;
  std::vector<std::string> entity_lemmas_;
  std::vector<Vector> embeddings_;
  std::map<std::string, std::vector<std::size_t>> lemma_index_;
};

inline std::optional<Vector> kb_embedding(std::string_view token, const KnowledgeTable& kb) {
  return kb.lookup(token);
}

// Dimension adapter d_kb -> h applied to looked-up entity embeddings.
struct KnowledgeProjection {
  Matrix weight;  // d_kb x h
  bool trainable = true;
};

// Per-row knowledge delta: rows without a match keep p_i bit-for-bit.
Matrix inject_passage_knowledge(const Matrix& passage_embeddings,
                                const std::vector<std::string>& passage_tokens,
                                const KnowledgeTable& kb, const KnowledgeProjection& proj);

// Deterministic stand-in for a pretrained KB: `coverage` of the vocabulary's
// content-word lemmas receive one or two unit-norm random entities.
KnowledgeTable generate_synthetic_kb(const Vocab& vocab, double coverage, int d_kb,
                                     std::uint64_t seed);

// Lemmas of vocabulary tokens that are neither special, stopword nor punctuation.
std::vector<std::string> content_lemmas(const Vocab& vocab);

}  // namespace clozeqa
