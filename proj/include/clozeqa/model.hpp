#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clozeqa/autograd.hpp"
#include "clozeqa/knowledge.hpp"
#include "clozeqa/prompt.hpp"
#include "clozeqa/tensor.hpp"

namespace clozeqa {

// How the selected prompt rows receive passage knowledge.
//   attention: softmax(q W_alpha G^T / sqrt(d)) G + q   (trainable W_alpha)
//   uniform:   mean(G) + q                              (no parameters)
//   off:       prompt rows untouched
enum class PpiMode { Attention, Uniform, Off };

PpiMode parse_ppi_mode(const std::string& name);
const char* ppi_mode_name(PpiMode m);

struct ModelConfig {
  int vocab_size = 0;
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int ffn = 128;
  int max_len = 128;
  double d_scale = 0.0;  // <= 0 means "use hidden"
  bool tie_output = true;
  bool use_pki = true;   // knowledge projection, needs d_kb > 0
  PpiMode ppi = PpiMode::Attention;
  int d_kb = 0;
  double init_std = 0.02;
  double kb_proj_init_std = 0.01;

  double scale_value() const { return d_scale > 0.0 ? d_scale : static_cast<double>(hidden); }
  bool has_kb_projection() const { return use_pki && d_kb > 0; }
  bool has_w_alpha() const { return ppi == PpiMode::Attention; }
};

// Throws ConfigError on an inconsistent configuration.
void validate(const ModelConfig& c);

enum class ParamGroup { Backbone, NewModule };

struct Parameter {
  std::string name;
  ag::Var var;
  ParamGroup group = ParamGroup::Backbone;
};

// Passage rows that have a knowledge-base match, with their averaged entity
// embeddings stacked (matched x d_kb).
struct KnowledgeRows {
  std::vector<int> rows;  // 0-based passage positions
  Matrix embeddings;
};

KnowledgeRows match_knowledge(const std::vector<std::string>& passage_tokens,
                              const KnowledgeTable& kb);

struct PpiResult {
  ag::Var enhanced;   // u = v + q, r x h
  ag::Var soft;       // v, r x h
  ag::Var selected;   // q, r x h
  ag::Var attention;  // r x n (empty for uniform mode)
};

// Knowledge flow from G into the selected rows of the prompt embeddings.
// `w_alpha` is ignored in uniform mode. Empty selection yields empty Vars.
PpiResult passage_to_prompt(const ag::Var& prompt_embeddings, const ag::Var& g,
                            const std::vector<int>& selected, const ag::Var& w_alpha,
                            double d_scale, PpiMode mode = PpiMode::Attention);

// Row-stochastic per-position token distributions.
struct MlmOutput {
  Matrix log_probs;  // sequence length x vocab

  double prob(int position, TokenId token) const;
  double log_prob(int position, TokenId token) const { return log_probs(position, token); }
};

struct ForwardResult {
  ag::Var log_probs;   // L x V
  ag::Var g;           // knowledge-enhanced passage rows, n x h
  ag::Var embeddings;  // encoder input (after overrides, before positions)
  PpiResult ppi;

  MlmOutput mlm() const { return {log_probs.value()}; }
};

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  const Parameter* find(const std::string& name) const;
  Parameter* find(const std::string& name);
  std::size_t parameter_count() const;
  void zero_grad();

  // Embedding rows L x h for the ids (word + position).
  ag::Var embed(const std::vector<TokenId>& ids) const;

  ForwardResult forward(const AssembledInput& input, const KnowledgeRows& knowledge) const;

  // Encoder forward with every injection bypassed.
  ForwardResult forward_plain(const AssembledInput& input) const;

 private:
  struct Layer {
    ag::Var ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };

  ag::Var add_param(const std::string& name, Matrix value, ParamGroup group);
  ag::Var word_embeddings(const std::vector<TokenId>& ids) const;
  ag::Var encode(ag::Var x) const;

  ModelConfig config_;
  std::vector<Parameter> params_;
  ag::Var tok_emb_, pos_emb_, lnf_g_, lnf_b_, out_w_, out_b_;
  std::vector<Layer> layers_;
  ag::Var w_alpha_, kb_proj_;
};

}  // namespace clozeqa
