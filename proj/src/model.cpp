#include "clozeqa/model.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "clozeqa/error.hpp"

namespace clozeqa {

PpiMode parse_ppi_mode(const std::string& name) {
  if (name == "attention") return PpiMode::Attention;
  if (name == "uniform") return PpiMode::Uniform;
  if (name == "off") return PpiMode::Off;
  throw ConfigError("unknown ppi mode: " + name);
}

const char* ppi_mode_name(PpiMode m) {
  switch (m) {
    case PpiMode::Attention: return "attention";
    case PpiMode::Uniform: return "uniform";
    case PpiMode::Off: return "off";
  }
  return "?";
}

void validate(const ModelConfig& c) {
  if (c.vocab_size <= special::kCount) throw ConfigError("model: vocab_size too small");
  if (c.hidden <= 0 || c.layers < 0 || c.heads <= 0 || c.ffn <= 0 || c.max_len <= 0) {
    throw ConfigError("model: dimensions must be positive");
  }
  if (c.hidden % c.heads != 0) throw ConfigError("model: hidden must be divisible by heads");
  if (c.d_kb < 0) throw ConfigError("model: d_kb must be >= 0");
}

KnowledgeRows match_knowledge(const std::vector<std::string>& passage_tokens,
                              const KnowledgeTable& kb) {
  KnowledgeRows out;
  std::vector<Vector> found;
  if (!kb.empty()) {
    for (std::size_t i = 0; i < passage_tokens.size(); ++i) {
      if (auto e = kb.lookup(passage_tokens[i])) {
        out.rows.push_back(static_cast<int>(i));
        found.push_back(std::move(*e));
      }
    }
  }
  out.embeddings.resize(static_cast<Eigen::Index>(found.size()), kb.d_kb());
  for (std::size_t i = 0; i < found.size(); ++i) {
    out.embeddings.row(static_cast<Eigen::Index>(i)) = found[i].transpose();
  }
  return out;
}

PpiResult passage_to_prompt(const ag::Var& prompt_embeddings, const ag::Var& g,
                            const std::vector<int>& selected, const ag::Var& w_alpha,
                            double d_scale, PpiMode mode) {
  PpiResult r;
  if (selected.empty() || mode == PpiMode::Off) return r;
  if (g.rows() == 0) throw ShapeError("ppi: empty passage representation");
  if (d_scale <= 0.0) throw ContractError("ppi: d_scale must be positive");
  if (static_cast<Eigen::Index>(selected.size()) >= prompt_embeddings.rows()) {
    throw ContractError("ppi: need r < m'");
  }
  r.selected = ag::gather_rows(prompt_embeddings, selected);
  if (mode == PpiMode::Attention) {
    const auto scores = ag::scale(ag::matmul_bt(ag::matmul(r.selected, w_alpha), g),
                                  1.0 / std::sqrt(d_scale));
    r.attention = ag::softmax_rows(scores);
    r.soft = ag::matmul(r.attention, g);
  } else {
    Matrix uniform = Matrix::Constant(static_cast<Eigen::Index>(selected.size()), g.rows(),
                                      1.0 / static_cast<double>(g.rows()));
    r.attention = ag::constant(std::move(uniform));
    r.soft = ag::matmul(r.attention, g);
  }
  r.enhanced = ag::add(r.soft, r.selected);
  return r;
}

double MlmOutput::prob(int position, TokenId token) const {
  return std::exp(log_probs(position, token));
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(config) {
  validate(config_);
  const int h = config_.hidden;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, config_.init_std);
  auto randn = [&](int r, int c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  auto zeros = [](int r, int c) { return Matrix::Zero(r, c).eval(); };
  auto ones = [](int r, int c) { return Matrix::Ones(r, c).eval(); };
  const auto bb = ParamGroup::Backbone;

  tok_emb_ = add_param("embed.tokens", randn(config_.vocab_size, h), bb);
  pos_emb_ = add_param("embed.positions", randn(config_.max_len, h), bb);
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Layer L;
    L.ln1_g = add_param(p + "ln1.gain", ones(1, h), bb);
    L.ln1_b = add_param(p + "ln1.bias", zeros(1, h), bb);
    L.wq = add_param(p + "attn.wq", randn(h, h), bb);
    L.bq = add_param(p + "attn.bq", zeros(1, h), bb);
    L.wk = add_param(p + "attn.wk", randn(h, h), bb);
    L.bk = add_param(p + "attn.bk", zeros(1, h), bb);
    L.wv = add_param(p + "attn.wv", randn(h, h), bb);
    L.bv = add_param(p + "attn.bv", zeros(1, h), bb);
    L.wo = add_param(p + "attn.wo", randn(h, h), bb);
    L.bo = add_param(p + "attn.bo", zeros(1, h), bb);
    L.ln2_g = add_param(p + "ln2.gain", ones(1, h), bb);
    L.ln2_b = add_param(p + "ln2.bias", zeros(1, h), bb);
    L.w1 = add_param(p + "ffn.w1", randn(h, config_.ffn), bb);
    L.b1 = add_param(p + "ffn.b1", zeros(1, config_.ffn), bb);
    L.w2 = add_param(p + "ffn.w2", randn(config_.ffn, h), bb);
    L.b2 = add_param(p + "ffn.b2", zeros(1, h), bb);
    layers_.push_back(L);
  }
  lnf_g_ = add_param("final_ln.gain", ones(1, h), bb);
  lnf_b_ = add_param("final_ln.bias", zeros(1, h), bb);
  if (!config_.tie_output) out_w_ = add_param("mlm.weight", randn(h, config_.vocab_size), bb);
  out_b_ = add_param("mlm.bias", zeros(1, config_.vocab_size), bb);

  // Drawn from a separate stream so the backbone is identical with or
  // without the knowledge modules.
  std::mt19937_64 kpe_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  if (config_.has_w_alpha()) {
    std::normal_distribution<double> nd(0.0, config_.init_std);
    Matrix w(h, h);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = nd(kpe_rng);
    w_alpha_ = add_param("ppi.w_alpha", std::move(w), ParamGroup::NewModule);
  }
  if (config_.has_kb_projection()) {
    std::normal_distribution<double> nd(0.0, config_.kb_proj_init_std);
    Matrix w(config_.d_kb, h);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = nd(kpe_rng);
    kb_proj_ = add_param("kb.projection", std::move(w), ParamGroup::NewModule);
  }
}

ag::Var Model::add_param(const std::string& name, Matrix value, ParamGroup group) {
  auto v = ag::leaf(std::move(value));
  params_.push_back({name, v, group});
  return v;
}

const Parameter* Model::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Parameter* Model::find(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.var.value().size());
  return n;
}

void Model::zero_grad() {
  for (auto& p : params_) p.var.node()->grad.resize(0, 0);
}

ag::Var Model::word_embeddings(const std::vector<TokenId>& ids) const {
  std::vector<int> idx(ids.begin(), ids.end());
  for (int id : idx) {
    if (id < 0 || id >= config_.vocab_size) {
      throw ContractError("embed: token id " + std::to_string(id) + " outside vocabulary of " +
                          std::to_string(config_.vocab_size));
    }
  }
  return ag::gather_rows(tok_emb_, idx);
}

ag::Var Model::embed(const std::vector<TokenId>& ids) const {
  if (static_cast<int>(ids.size()) > config_.max_len) {
    throw ShapeError("embed: sequence of " + std::to_string(ids.size()) + " exceeds max_len");
  }
  std::vector<int> pos(ids.size());
  std::iota(pos.begin(), pos.end(), 0);
  return ag::add(word_embeddings(ids), ag::gather_rows(pos_emb_, pos));
}

ag::Var Model::encode(ag::Var x) const {
  const int h = config_.hidden;
  const int dh = h / config_.heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const auto& L : layers_) {
    const auto a = ag::layer_norm(x, L.ln1_g, L.ln1_b);
    const auto q = ag::add_row(ag::matmul(a, L.wq), L.bq);
    const auto k = ag::add_row(ag::matmul(a, L.wk), L.bk);
    const auto v = ag::add_row(ag::matmul(a, L.wv), L.bv);
    std::vector<ag::Var> heads;
    for (int hd = 0; hd < config_.heads; ++hd) {
      const auto qh = ag::slice_cols(q, hd * dh, dh);
      const auto kh = ag::slice_cols(k, hd * dh, dh);
      const auto vh = ag::slice_cols(v, hd * dh, dh);
      const auto p = ag::softmax_rows(ag::scale(ag::matmul_bt(qh, kh), att_scale));
      heads.push_back(ag::matmul(p, vh));
    }
    const auto attn = ag::concat_cols(heads);
    x = ag::add(x, ag::add_row(ag::matmul(attn, L.wo), L.bo));
    const auto f = ag::layer_norm(x, L.ln2_g, L.ln2_b);
    const auto hidden = ag::gelu(ag::add_row(ag::matmul(f, L.w1), L.b1));
    x = ag::add(x, ag::add_row(ag::matmul(hidden, L.w2), L.b2));
  }
  const auto y = ag::layer_norm(x, lnf_g_, lnf_b_);
  const auto logits = config_.tie_output ? ag::add_row(ag::matmul_bt(y, tok_emb_), out_b_)
                                         : ag::add_row(ag::matmul(y, out_w_), out_b_);
  return ag::log_softmax_rows(logits);
}

ForwardResult Model::forward(const AssembledInput& input, const KnowledgeRows& knowledge) const {
  const int len = input.size();
  if (len > config_.max_len) {
    throw ShapeError("forward: input of " + std::to_string(len) + " exceeds max_len " +
                     std::to_string(config_.max_len));
  }
  const int n = input.passage_length();
  ForwardResult out;
  ag::Var x = word_embeddings(input.input_ids);
  const ag::Var passage_rows = ag::slice_rows(x, input.passage_begin, n);
  out.g = passage_rows;

  if (config_.has_kb_projection() && !knowledge.rows.empty()) {
    if (knowledge.embeddings.cols() != config_.d_kb ||
        knowledge.embeddings.rows() != static_cast<Eigen::Index>(knowledge.rows.size())) {
      throw ShapeError("forward/knowledge: embeddings are " +
                       std::to_string(knowledge.embeddings.rows()) + "x" +
                       std::to_string(knowledge.embeddings.cols()) + ", expected d_kb " +
                       std::to_string(config_.d_kb));
    }
    const auto delta = ag::matmul(ag::constant(knowledge.embeddings), kb_proj_);
    out.g = ag::add_at_rows(passage_rows, knowledge.rows, delta);
    std::vector<int> abs_rows;
    for (int r : knowledge.rows) abs_rows.push_back(input.passage_begin + r);
    x = ag::replace_rows(x, abs_rows, ag::gather_rows(out.g, knowledge.rows));
  }

  if (config_.ppi != PpiMode::Off && !input.selected_positions.empty()) {
    const auto prompt = ag::slice_rows(x, input.prompt_begin, input.prompt_length);
    std::vector<int> rel;
    for (int p : input.selected_positions) rel.push_back(p - input.prompt_begin);
    out.ppi = passage_to_prompt(prompt, out.g, rel, w_alpha_, config_.scale_value(), config_.ppi);
    x = ag::replace_rows(x, input.selected_positions, out.ppi.enhanced);
  }

  out.embeddings = x;
  std::vector<int> pos(static_cast<std::size_t>(len));
  std::iota(pos.begin(), pos.end(), 0);
  out.log_probs = encode(ag::add(x, ag::gather_rows(pos_emb_, pos)));
  return out;
}

ForwardResult Model::forward_plain(const AssembledInput& input) const {
  ForwardResult out;
  ag::Var x = word_embeddings(input.input_ids);
  out.g = ag::slice_rows(x, input.passage_begin, input.passage_length());
  out.embeddings = x;
  std::vector<int> pos(input.input_ids.size());
  std::iota(pos.begin(), pos.end(), 0);
  out.log_probs = encode(ag::add(x, ag::gather_rows(pos_emb_, pos)));
  return out;
}

}  // namespace clozeqa
