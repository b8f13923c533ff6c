#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "clozeqa/model.hpp"
#include "clozeqa/prompt.hpp"
#include "clozeqa/span.hpp"

namespace clozeqa {

// Experiment configuration. Defaults follow the few-shot protocol: l_mask 10,
// lambda 0.5, gamma 0.01, S 5, batch 8, 64 epochs, warm-up 0.1, backbone lr
// 1e-5, five seeds.
struct TrainConfig {
  int l_mask = 10;
  double lambda = 0.5;
  double gamma = 0.01;
  int num_negatives = 5;
  int beam_width = 5;
  double lr_backbone = 1e-5;
  // One of {1e-5, 3e-5, 5e-5, 1e-4}; no selection rule is given, 1e-4 is used.
  double lr_new_modules = 1e-4;
  double warmup_fraction = 0.1;
  int batch_size = 8;
  int epochs = 64;
  int k = 16;
  std::vector<std::uint64_t> seeds = {12, 21, 42, 87, 100};
  std::uint64_t seed = 42;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  ScoreMode score_mode = ScoreMode::SumProb;
  SelectionPolicy selection = SelectionPolicy::KbLinked;
  DistKernel dist_kernel = DistKernel::InverseDistance;
  bool filter_negatives = true;

  // "best_dev_f1" keeps the epoch with the highest dev F1, "last" the final one.
  std::string model_selection = "best_dev_f1";
  int eval_every = 1;
  // Stop once training-set F1 reaches this value (0 disables the check).
  double target_train_f1 = 0.0;

  // Model shape (its vocab_size and d_kb are filled in from the data).
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int ffn = 128;
  int max_len = 256;
  bool tie_output = true;
  bool use_kpe = true;
  PpiMode ppi = PpiMode::Attention;
  double d_scale = 0.0;

  // Synthetic knowledge base, used when no KB file is given.
  int d_kb = 32;
  double kb_coverage = 0.5;

  // Intermediate max_len for negative spans; <= 0 means l_mask - 1.
  int max_span_len = 0;

  int span_max_len() const { return max_span_len > 0 ? max_span_len : l_mask - 1; }
};

void validate(const TrainConfig& c);

nlohmann::json to_json(const TrainConfig& c);
// Unknown keys are rejected; missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);
void save_train_config(const TrainConfig& c, const std::filesystem::path& path);

ModelConfig model_config_for(const TrainConfig& c, int vocab_size, int d_kb);

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace clozeqa
