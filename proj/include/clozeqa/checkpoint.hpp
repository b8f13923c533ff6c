#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clozeqa/config.hpp"
#include "clozeqa/knowledge.hpp"
#include "clozeqa/model.hpp"
#include "clozeqa/vocab.hpp"

namespace clozeqa {

// Single-file archive:
//   "CLZQCKP1" | u64 header bytes | JSON header | raw little-endian doubles
// The header holds both configs, the vocabulary, the knowledge table (TSV)
// and an index of named tensors {name, rows, cols, offset}.
struct Checkpoint {
  TrainConfig train_config;
  ModelConfig model_config;
  Vocab vocab;
  std::optional<KnowledgeTable> kb;
  std::vector<std::pair<std::string, Matrix>> tensors;
  nlohmann::json metadata = nlohmann::json::object();

  static Checkpoint capture(const Model& model, const TrainConfig& tc, const Vocab& vocab,
                            const std::optional<KnowledgeTable>& kb);

  // Fails with ShapeError when a tensor is missing, extra, or mis-shaped.
  Model restore(std::uint64_t seed = 0) const;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

std::vector<Matrix> snapshot(const Model& model);
void restore(Model& model, const std::vector<Matrix>& state);

}  // namespace clozeqa
