#include "clozeqa/config.hpp"

#include <fstream>
#include <set>

#include "clozeqa/error.hpp"

namespace clozeqa {

using nlohmann::json;

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (c.l_mask < 2) fail("l_mask must be >= 2");
  if (c.lambda < 0.0 || c.lambda > 1.0) fail("lambda must lie in [0, 1]");
  if (c.gamma < 0.0 || c.gamma > 1.0) fail("gamma must lie in [0, 1]");
  if (c.num_negatives < 0) fail("num_negatives must be >= 0");
  if (c.beam_width < 1) fail("beam_width must be >= 1");
  if (c.lr_backbone < 0.0 || c.lr_new_modules < 0.0) fail("learning rates must be >= 0");
  if (c.warmup_fraction < 0.0 || c.warmup_fraction > 1.0) fail("warmup_fraction must lie in [0, 1]");
  if (c.batch_size < 1) fail("batch_size must be >= 1");
  if (c.epochs < 0) fail("epochs must be >= 0");
  if (c.k < 1) fail("k must be >= 1");
  if (c.model_selection != "best_dev_f1" && c.model_selection != "last") {
    fail("model_selection must be best_dev_f1 or last");
  }
  if (c.eval_every < 0) fail("eval_every must be >= 0");
  if (c.hidden % c.heads != 0) fail("hidden must be divisible by heads");
  if (c.kb_coverage < 0.0 || c.kb_coverage > 1.0) fail("kb_coverage must lie in [0, 1]");
  if (c.span_max_len() > c.l_mask - 1) fail("max_span_len must leave room for [END]");
}

json to_json(const TrainConfig& c) {
  return json{
      {"l_mask", c.l_mask},
      {"lambda", c.lambda},
      {"gamma", c.gamma},
      {"num_negatives", c.num_negatives},
      {"beam_width", c.beam_width},
      {"lr_backbone", c.lr_backbone},
      {"lr_new_modules", c.lr_new_modules},
      {"warmup_fraction", c.warmup_fraction},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"k", c.k},
      {"seeds", c.seeds},
      {"seed", c.seed},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps},
      {"score_mode", score_mode_name(c.score_mode)},
      {"selection", selection_policy_name(c.selection)},
      {"dist_kernel", c.dist_kernel == DistKernel::InverseDistance ? "inverse" : "constant"},
      {"filter_negatives", c.filter_negatives},
      {"model_selection", c.model_selection},
      {"eval_every", c.eval_every},
      {"target_train_f1", c.target_train_f1},
      {"hidden", c.hidden},
      {"layers", c.layers},
      {"heads", c.heads},
      {"ffn", c.ffn},
      {"max_len", c.max_len},
      {"tie_output", c.tie_output},
      {"use_kpe", c.use_kpe},
      {"ppi", ppi_mode_name(c.ppi)},
      {"d_scale", c.d_scale},
      {"d_kb", c.d_kb},
      {"kb_coverage", c.kb_coverage},
      {"max_span_len", c.max_span_len},
  };
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  TrainConfig c;
  const json defaults = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("l_mask", c.l_mask);
    get("lambda", c.lambda);
    get("gamma", c.gamma);
    get("num_negatives", c.num_negatives);
    get("beam_width", c.beam_width);
    get("lr_backbone", c.lr_backbone);
    get("lr_new_modules", c.lr_new_modules);
    get("warmup_fraction", c.warmup_fraction);
    get("batch_size", c.batch_size);
    get("epochs", c.epochs);
    get("k", c.k);
    get("seeds", c.seeds);
    get("seed", c.seed);
    get("adam_beta1", c.adam_beta1);
    get("adam_beta2", c.adam_beta2);
    get("adam_eps", c.adam_eps);
    if (j.contains("score_mode")) c.score_mode = parse_score_mode(j["score_mode"].get<std::string>());
    if (j.contains("selection")) c.selection = parse_selection_policy(j["selection"].get<std::string>());
    if (j.contains("dist_kernel")) {
      const auto k = j["dist_kernel"].get<std::string>();
      if (k == "inverse") {
        c.dist_kernel = DistKernel::InverseDistance;
      } else if (k == "constant") {
        c.dist_kernel = DistKernel::Constant;
      } else {
        throw ConfigError("config: unknown dist_kernel " + k);
      }
    }
    get("filter_negatives", c.filter_negatives);
    get("model_selection", c.model_selection);
    get("eval_every", c.eval_every);
    get("target_train_f1", c.target_train_f1);
    get("hidden", c.hidden);
    get("layers", c.layers);
    get("heads", c.heads);
    get("ffn", c.ffn);
    get("max_len", c.max_len);
    get("tie_output", c.tie_output);
    get("use_kpe", c.use_kpe);
    if (j.contains("ppi")) c.ppi = parse_ppi_mode(j["ppi"].get<std::string>());
    get("d_scale", c.d_scale);
    get("d_kb", c.d_kb);
    get("kb_coverage", c.kb_coverage);
    get("max_span_len", c.max_span_len);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return train_config_from_json(j);
}

void save_train_config(const TrainConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << to_json(c).dump(2) << '\n';
}

ModelConfig model_config_for(const TrainConfig& c, int vocab_size, int d_kb) {
  ModelConfig m;
  m.vocab_size = vocab_size;
  m.hidden = c.hidden;
  m.layers = c.layers;
  m.heads = c.heads;
  m.ffn = c.ffn;
  m.max_len = c.max_len;
  m.tie_output = c.tie_output;
  m.d_scale = c.d_scale;
  m.use_pki = c.use_kpe;
  m.d_kb = c.use_kpe ? d_kb : 0;
  m.ppi = c.use_kpe ? c.ppi : PpiMode::Off;
  return m;
}

json to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size}, {"hidden", c.hidden},       {"layers", c.layers},
              {"heads", c.heads},           {"ffn", c.ffn},             {"max_len", c.max_len},
              {"d_scale", c.d_scale},       {"tie_output", c.tie_output}, {"use_pki", c.use_pki},
              {"ppi", ppi_mode_name(c.ppi)}, {"d_kb", c.d_kb},          {"init_std", c.init_std},
              {"kb_proj_init_std", c.kb_proj_init_std}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    j.at("vocab_size").get_to(c.vocab_size);
    j.at("hidden").get_to(c.hidden);
    j.at("layers").get_to(c.layers);
    j.at("heads").get_to(c.heads);
    j.at("ffn").get_to(c.ffn);
    j.at("max_len").get_to(c.max_len);
    j.at("d_scale").get_to(c.d_scale);
    j.at("tie_output").get_to(c.tie_output);
    j.at("use_pki").get_to(c.use_pki);
    c.ppi = parse_ppi_mode(j.at("ppi").get<std::string>());
    j.at("d_kb").get_to(c.d_kb);
    j.at("init_std").get_to(c.init_std);
    j.at("kb_proj_init_std").get_to(c.kb_proj_init_std);
  } catch (const json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
  validate(c);
  return c;
}

}  // namespace clozeqa
